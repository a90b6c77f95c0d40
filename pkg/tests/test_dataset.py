import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairpsych.dataset import (
    Column,
    DataError,
    LabeledDataset,
    SplitSpec,
    Table,
    dumps_csv,
    group_partition,
    load_csv,
    split_disjoint_groups,
    to_labeled,
    write_csv,
)
from fairpsych.ehr import ADMISSIONS
from fairpsych.featurize import FEATURE_COLUMNS, to_dataset

SCHEMA = (
    Column("id", "identifier"),
    Column("flag", "boolean"),
    Column("count", "integer"),
    Column("value", "float"),
    Column("gender", "categorical", ("man", "woman")),
    Column("when", "date"),
    Column("at", "time"),
)


def write(tmp_path, text, name="t.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8", newline="")
    return path


def test_empty_file_with_header_gives_empty_table(tmp_path):
    path = write(tmp_path, "id,flag,count,value,gender,when,at\r\n")
    assert load_csv(path, SCHEMA).n_rows == 0


def test_blank_numeric_cell_is_missing_not_zero(tmp_path):
    path = write(tmp_path, (
        "id,flag,count,value,gender,when,at\r\n"
        "a,true,1,0.5,man,2020-01-02,10:00:00\r\n"
        "b,false,,1.5,woman,2020-01-03,11:30:00\r\n"
        "c,true,3,2.5,man,2020-01-04,12:00:00\r\n"
    ))
    table = load_csv(path, SCHEMA)
    assert table.n_rows == 3
    assert table.count_missing() == 1
    assert table.column("count") == [1, None, 3]
    assert table.column("when")[0] == dt.date(2020, 1, 2)
    assert table.column("at")[1] == dt.time(11, 30)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_csv(tmp_path / "nope.csv", SCHEMA)


def test_header_mismatch(tmp_path):
    path = write(tmp_path, "id,flag\r\n")
    with pytest.raises(DataError, match="header"):
        load_csv(path, SCHEMA)


def test_unparseable_cell_reports_location(tmp_path):
    path = write(tmp_path, "id,flag,count,value,gender,when,at\r\na,true,x7,0.5,man,2020-01-02,10:00:00\r\n")
    with pytest.raises(DataError) as err:
        load_csv(path, SCHEMA)
    msg = str(err.value)
    assert "line 2" in msg and "'count'" in msg and "x7" in msg


def test_bad_boolean_and_category(tmp_path):
    for row in ("a,yes,1,0.5,man,2020-01-02,10:00:00", "a,true,1,0.5,other,2020-01-02,10:00:00"):
        path = write(tmp_path, "id,flag,count,value,gender,when,at\r\n" + row + "\r\n")
        with pytest.raises(DataError):
            load_csv(path, SCHEMA)


def test_table_rejects_wrong_width_and_kind():
    with pytest.raises(DataError):
        Table("t", SCHEMA[:2], [("a",)])
    with pytest.raises(DataError):
        Table("t", SCHEMA[:2], [("a", 1)])


def test_admissions_round_trip(tmp_path, small_bundle):
    table = small_bundle.admissions
    path = tmp_path / "admissions.csv"
    write_csv(table, path)
    again = load_csv(path, ADMISSIONS, "admissions")
    assert again == table
    write_csv(again, tmp_path / "again.csv")
    assert path.read_bytes() == (tmp_path / "again.csv").read_bytes()


cells = st.tuples(
    st.text(alphabet="abcXYZ019,\" \n", min_size=1, max_size=6),
    st.booleans(),
    st.integers(-10**6, 10**6),
    st.floats(allow_nan=False, allow_infinity=False, width=64),
    st.sampled_from(["man", "woman"]),
    st.dates(dt.date(1900, 1, 1), dt.date(2100, 1, 1)),
    st.times().map(lambda t: t.replace(microsecond=0)),
)


@settings(max_examples=60, deadline=None)
@given(st.lists(cells, max_size=8))
def test_csv_round_trip_is_byte_stable(tmp_path_factory, rows):
    tmp = tmp_path_factory.mktemp("rt")
    table = Table("t", SCHEMA, rows)
    write_csv(table, tmp / "a.csv")
    back = load_csv(tmp / "a.csv", SCHEMA, "t")
    assert back == table
    assert dumps_csv(back).encode("utf-8") == (tmp / "a.csv").read_bytes()


PEOPLE = (Column("pid", "identifier"), Column("gender", "categorical", ("man", "woman")),
          Column("label", "categorical", ("yes", "no")), Column("flag", "boolean"), Column("x", "float"))


def people(rows):
    return Table("people", PEOPLE, rows)


def test_to_labeled_privileged_is_man():
    t = people([("p1", "man", "yes", True, 1.0), ("p2", "woman", "no", False, 2.0), ("p3", "man", "no", True, 3.0)])
    ds = to_labeled(t, "label", "gender", "pid", "man", "yes")
    assert ds.protected.tolist() == [1, 0, 1]
    assert ds.labels.tolist() == [1, 0, 0]
    assert ds.feature_names == ("flag", "x")
    assert ds.features.tolist() == [[1.0, 1.0], [0.0, 2.0], [1.0, 3.0]]
    assert ds.weights.tolist() == [1.0, 1.0, 1.0]
    assert ds.group_ids.tolist() == ["p1", "p2", "p3"]


def test_to_labeled_single_group_is_an_error():
    t = people([("p1", "man", "yes", True, 1.0), ("p2", "man", "no", False, 2.0)])
    with pytest.raises(DataError, match="one distinct value"):
        to_labeled(t, "label", "gender", "pid", "man", "yes")


def test_to_labeled_errors():
    t = people([("p1", "man", "yes", True, 1.0), ("p2", "woman", None, False, 2.0)])
    with pytest.raises(DataError, match="missing"):
        to_labeled(t, "label", "gender", "pid", "man", "yes")
    t = people([("p1", "man", "yes", True, None), ("p2", "woman", "no", False, 2.0)])
    with pytest.raises(DataError, match="missing feature"):
        to_labeled(t, "label", "gender", "pid", "man", "yes")
    with pytest.raises(DataError, match="no column"):
        to_labeled(t, "nope", "gender", "pid", "man", "yes")
    three = Table("t", (Column("pid", "identifier"), Column("g", "categorical"), Column("y", "boolean")),
                  [("a", "m", True), ("b", "w", False), ("c", "x", True)])
    with pytest.raises(DataError, match="more than two"):
        to_labeled(three, "y", "g", "pid", "m", True)


def test_to_labeled_rejects_non_numeric_features():
    t = Table("t", PEOPLE + (Column("ward", "categorical"),),
              [("p1", "man", "yes", True, 1.0, "A"), ("p2", "woman", "no", False, 2.0, "B")])
    with pytest.raises(DataError, match="cannot be used as a feature"):
        to_labeled(t, "label", "gender", "pid", "man", "yes")


def test_feature_table_gives_35_features(small_ds):
    assert len(FEATURE_COLUMNS) == 38
    assert small_ds.n_features == 35
    assert "Gender" not in small_ds.feature_names


def test_to_labeled_is_lossless_for_numeric_columns(small_features):
    table = small_features[0]
    ds = to_dataset(table)
    for j, name in enumerate(ds.feature_names):
        original = table.column(name)
        kind = table.columns[table.index(name)].kind
        rebuilt = [bool(v) if kind == "boolean" else (int(v) if kind == "integer" else v) for v in ds.features[:, j]]
        assert rebuilt == original


def test_labeled_dataset_invariants():
    X = np.zeros((3, 2))
    with pytest.raises(DataError):
        LabeledDataset(X, ["a", "a"], [0, 1, 0], [0, 1, 1])
    with pytest.raises(DataError):
        LabeledDataset(X, ["a", "b"], [0, 2, 0], [0, 1, 1])
    with pytest.raises(DataError):
        LabeledDataset(X, ["a", "b"], [0, 1, 0], [0, 1, 1], weights=[1.0, 0.0, 1.0])
    with pytest.raises(DataError):
        LabeledDataset(X, ["a", "b"], [0, 1], [0, 1, 1])
    ds = LabeledDataset(X, ["a", "b"], [0, 1, 0], [0, 1, 1])
    with pytest.raises(ValueError):
        ds.features[0, 0] = 1.0


def test_split_spec_validation():
    with pytest.raises(DataError):
        SplitSpec((0.5, 0.4))
    with pytest.raises(DataError):
        SplitSpec((1.0, 0.0))
    SplitSpec((0.625, 0.375))


def test_one_row_per_group_halves_are_disjoint(rng):
    groups = np.array([f"g{i}" for i in range(20)])
    a, b = group_partition(groups, SplitSpec((0.5, 0.5), seed=3))
    assert not set(groups[a]) & set(groups[b])
    assert len(a) == len(b) == 10


def test_patient_with_three_admissions_stays_together(small_ds):
    ids, counts = np.unique(small_ds.group_ids, return_counts=True)
    multi = ids[counts >= 3][0]
    parts = split_disjoint_groups(small_ds, SplitSpec((0.2,) * 5, seed=9))
    holders = [i for i, p in enumerate(parts) if multi in set(p.group_ids)]
    assert len(holders) == 1
    assert np.sum(parts[holders[0]].group_ids == multi) == np.sum(small_ds.group_ids == multi)


def test_split_is_deterministic(small_ds):
    spec = SplitSpec((0.625, 0.375), seed=42)
    a = group_partition(small_ds.group_ids, spec)
    b = group_partition(small_ds.group_ids, spec)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_too_few_groups():
    with pytest.raises(DataError):
        group_partition(["a", "a", "b"], SplitSpec((0.25,) * 4))


@settings(max_examples=200, deadline=None)
@given(
    sizes=st.lists(st.integers(1, 5), min_size=1, max_size=40),
    k=st.integers(1, 6),
    seed=st.integers(0, 2**32 - 1),
)
def test_partition_property(sizes, k, seed):
    groups = np.repeat(np.arange(len(sizes)), sizes).astype(str)
    spec = SplitSpec((1.0 / k,) * k, seed)
    if len(sizes) < k:
        with pytest.raises(DataError):
            group_partition(groups, spec)
        return
    parts = group_partition(groups, spec)
    joined = np.sort(np.concatenate(parts))
    assert np.array_equal(joined, np.arange(len(groups)))
    assert all(len(p) > 0 for p in parts)
    owners = {}
    for i, p in enumerate(parts):
        for g in set(groups[p]):
            assert owners.setdefault(g, i) == i
