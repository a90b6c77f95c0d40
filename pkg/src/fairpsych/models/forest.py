"""Random forest of weighted Gini trees.

Each tree is grown on a bootstrap resample drawn with probability
proportional to the instance weights; leaves store the positive rate of the
rows that reach them. The forest score is the mean leaf rate over trees.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ..dataset import DataError, LabeledDataset
from . import _tree


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 500
    min_samples_leaf: int = 25
    max_features: str = "sqrt"
    seed: int = 0
    bootstrap: bool = True

    def __post_init__(self):
        if self.n_trees < 1 or self.min_samples_leaf < 1:
            raise DataError("n_trees and min_samples_leaf must be positive")
        if self.max_features not in ("sqrt", "all"):
            raise DataError(f"max_features must be 'sqrt' or 'all', got {self.max_features!r}")
        if int(self.seed) < 0:
            raise DataError("seed must be unsigned")


@dataclass(frozen=True, eq=False)
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def split_features(self) -> set[int]:
        return {int(f) for f in self.feature if f >= 0}

    def predict(self, X) -> np.ndarray:
        return _tree.apply(self.feature, self.threshold, self.left, self.right, self.value,
                           np.zeros(1, np.int64), np.ascontiguousarray(X, dtype=float))


@dataclass(frozen=True, eq=False)
class ForestModel:
    feature_names: tuple[str, ...]
    trees: tuple[Tree, ...] = field(default_factory=tuple)
    kind = "forest"

    @cached_property
    def _packed(self):
        sizes = [t.n_nodes for t in self.trees]
        roots = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)

        def shifted(a, off):
            return np.where(a >= 0, a + off, -1)

        return (
            np.concatenate([t.feature for t in self.trees]),
            np.concatenate([t.threshold for t in self.trees]),
            np.concatenate([shifted(t.left, r) for t, r in zip(self.trees, roots)]),
            np.concatenate([shifted(t.right, r) for t, r in zip(self.trees, roots)]),
            np.concatenate([t.value for t in self.trees]),
            roots,
        )

    def predict_scores(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != len(self.feature_names):
            raise DataError(f"expected {len(self.feature_names)} features, got shape {X.shape}")
        return _tree.apply(*self._packed, X)


def n_candidate_features(max_features: str, d: int) -> int:
    return d if max_features == "all" else max(1, int(np.sqrt(d)))


def grow_tree(encoded, y, w, min_leaf: int, n_sub: int, rng: np.random.Generator) -> Tree:
    """One tree on rank-encoded features (see :func:`_tree.encode`)."""
    codes, uniq, nuniq = encoded
    cap = 2 * (len(y) // min_leaf) + 1
    keys = rng.random((cap, codes.shape[1]))
    return Tree(*_tree.grow(codes, uniq, nuniq, y, w, min_leaf, n_sub, keys))


def _fit_one(encoded, y, w, cfg: ForestConfig, seed_seq) -> Tree:
    rng = np.random.default_rng(seed_seq)
    codes, uniq, nuniq = encoded
    n_sub = n_candidate_features(cfg.max_features, codes.shape[1])
    if cfg.bootstrap:
        rows = rng.choice(len(y), size=len(y), p=w / w.sum())
        sample = (np.ascontiguousarray(codes[rows]), uniq, nuniq)
        return grow_tree(sample, y[rows], np.ones(len(rows)), cfg.min_samples_leaf, n_sub, rng)
    return grow_tree(encoded, y, w, cfg.min_samples_leaf, n_sub, rng)


def train_forest(ds: LabeledDataset, cfg: ForestConfig | None = None, n_jobs: int = 1) -> ForestModel:
    """Fit a forest; ``n_jobs > 1`` grows trees on threads with identical results."""
    cfg = cfg or ForestConfig()
    if len(np.unique(ds.labels)) < 2:
        raise DataError("random forest needs both classes in the training data")
    encoded = _tree.encode(np.asarray(ds.features, dtype=float))
    y = ds.labels.astype(float)
    w = np.ascontiguousarray(ds.weights, dtype=float)
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.n_trees)
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = list(pool.map(lambda s: _fit_one(encoded, y, w, cfg, s), seeds))
    else:
        trees = [_fit_one(encoded, y, w, cfg, s) for s in seeds]
    return ForestModel(feature_names=ds.feature_names, trees=tuple(trees))
