"""Weighted logistic regression with an optional prejudice-remover penalty.

The training objective, over standardized features, is::

    -sum_i w_i [y_i log p_i + (1 - y_i) log(1 - p_i)]
        + eta * prejudice_index(p, s, w) + l2_lambda / 2 * ||theta||^2

with ``p_i = sigmoid(theta . x_i + b)``. The intercept is not penalized.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit, xlogy

from ..dataset import DataError, LabeledDataset

log = logging.getLogger(__name__)

_PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class LogisticConfig:
    l2_lambda: float = 1.0
    eta: float = 0.0
    max_iters: int = 5000
    step_size: float = 1.0
    tol: float = 1e-6

    def __post_init__(self):
        if self.l2_lambda < 0 or self.eta < 0:
            raise DataError("l2_lambda and eta must be non-negative")
        if self.max_iters < 1 or not self.step_size > 0 or not self.tol > 0:
            raise DataError("max_iters, step_size and tol must be positive")


def _group_means(scores, protected, weights):
    means, totals = [], []
    for g in (0, 1):
        m = protected == g
        if not m.any():
            raise DataError("prejudice index needs both protected groups")
        wg = weights[m]
        totals.append(wg.sum())
        means.append(np.dot(wg, scores[m]) / totals[-1])
    overall = (means[0] * totals[0] + means[1] * totals[1]) / (totals[0] + totals[1])
    return np.array(means), np.array(totals), overall


def prejudice_index(scores, protected, weights=None) -> float:
    """Weighted dependence between soft predictions and the protected group.

    ``sum_i w_i sum_y p_i(y) log(p(y | s_i) / p(y))`` where ``p_i(1)`` is row
    i's score and ``p(y | s)``, ``p(y)`` are weighted mean scores within the
    row's group and overall. Zero iff both groups have the same mean score.
    """
    scores = np.asarray(scores, dtype=float)
    protected = np.asarray(protected)
    weights = np.ones(len(scores)) if weights is None else np.asarray(weights, dtype=float)
    if not (len(scores) == len(protected) == len(weights)):
        raise DataError("scores, protected and weights differ in length")
    means, totals, overall = _group_means(scores, protected, weights)
    total = 0.0
    for m_s, w_s in zip(means, totals):
        pos = m_s * w_s
        neg = w_s - pos
        total += xlogy(pos, m_s) - xlogy(pos, overall)
        total += xlogy(neg, 1.0 - m_s) - xlogy(neg, 1.0 - overall)
    return float(max(total, 0.0))


def objective(params, Xs, y, s, w, eta: float, l2_lambda: float):
    """Objective value and gradient; ``params`` is ``[theta..., intercept]``."""
    theta, b = params[:-1], params[-1]
    z = Xs @ theta + b
    p = expit(z)
    value = np.dot(w, np.logaddexp(0.0, z) - y * z) + 0.5 * l2_lambda * np.dot(theta, theta)
    dz = w * (p - y)
    if eta > 0:
        value += eta * prejudice_index(p, s, w)
        means, _, overall = _group_means(p, s, w)
        means = np.clip(means, _PROB_FLOOR, 1 - _PROB_FLOOR)
        overall = np.clip(overall, _PROB_FLOOR, 1 - _PROB_FLOOR)
        shift = logit(means)[s] - logit(overall)
        dz = dz + eta * w * shift * p * (1.0 - p)
    grad = np.empty_like(params)
    grad[:-1] = Xs.T @ dz + l2_lambda * theta
    grad[-1] = dz.sum()
    return value, grad


@dataclass(frozen=True, eq=False)
class LogisticModel:
    feature_names: tuple[str, ...]
    mean: np.ndarray
    scale: np.ndarray
    coef: np.ndarray
    intercept: float
    converged: bool = True
    n_iter: int = 0
    kind = "logistic"

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != len(self.coef):
            raise DataError(f"expected {len(self.coef)} features, got shape {X.shape}")
        return ((X - self.mean) / self.scale) @ self.coef + self.intercept

    def predict_scores(self, X) -> np.ndarray:
        return expit(self.decision_function(X))

    def raw_coefficients(self) -> tuple[np.ndarray, float]:
        """Coefficients and intercept on the unstandardized features."""
        coef = self.coef / self.scale
        return coef, float(self.intercept - np.dot(coef, self.mean))


def standardize(X):
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    return mean, scale


def _minimize(fun, x0, cfg: LogisticConfig):
    """Gradient descent, Barzilai-Borwein trial steps, non-monotone backtracking."""
    x = x0.copy()
    f, g = fun(x)
    best = (f, x.copy())
    history = [f]
    step = cfg.step_size
    x_prev = g_prev = None
    for it in range(1, cfg.max_iters + 1):
        if np.max(np.abs(g)) < cfg.tol:
            return x, True, it - 1
        if x_prev is not None:
            sx, sg = x - x_prev, g - g_prev
            curv = np.dot(sx, sg)
            step = np.dot(sx, sx) / curv if curv > 0 else step * 2.0
            step = min(max(step, 1e-12), 1e12)
        ref = max(history[-10:])
        gg = np.dot(g, g)
        while True:
            x_new = x - step * g
            f_new, g_new = fun(x_new)
            if np.isfinite(f_new) and f_new <= ref - 1e-4 * step * gg:
                break
            step *= 0.5
            if step < 1e-20:
                return best[1], False, it
        x_prev, g_prev = x, g
        x, f, g = x_new, f_new, g_new
        history.append(f)
        if f < best[0]:
            best = (f, x.copy())
    if np.max(np.abs(g)) < cfg.tol:
        return x, True, cfg.max_iters
    return best[1], False, cfg.max_iters


def train_logistic(ds: LabeledDataset, cfg: LogisticConfig | None = None, init=None) -> LogisticModel:
    cfg = cfg or LogisticConfig()
    if ds.n_rows < 2 or len(np.unique(ds.labels)) < 2:
        raise DataError("logistic regression needs at least two rows and both classes")
    if cfg.eta > 0 and len(np.unique(ds.protected)) < 2:
        raise DataError("the prejudice penalty needs both protected groups")
    X = ds.features
    mean, scale = standardize(X)
    Xs = (X - mean) / scale
    y = ds.labels.astype(float)
    s = ds.protected.astype(np.intp)
    w = ds.weights

    def fun(params):
        return objective(params, Xs, y, s, w, cfg.eta, cfg.l2_lambda)

    x0 = np.zeros(X.shape[1] + 1) if init is None else np.asarray(init, dtype=float)
    params, converged, n_iter = _minimize(fun, x0, cfg)
    if not converged:
        log.warning("logistic regression did not converge in %d iterations", cfg.max_iters)
    return LogisticModel(
        feature_names=ds.feature_names,
        mean=mean,
        scale=scale,
        coef=params[:-1].copy(),
        intercept=float(params[-1]),
        converged=converged,
        n_iter=n_iter,
    )
