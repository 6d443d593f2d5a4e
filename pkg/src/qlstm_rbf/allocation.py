"""Kernel-driven portfolio allocators.

RBF-DivMom
    Greedy discrete selection. Start from the highest-momentum entity and
    repeatedly add the candidate maximising
    ``m_i - lam * mean_{j in S} K_ij``; the ``k`` selected names are held
    equally. Ties go to the lower entity index.

RBF-Graph
    Continuous allocation minimising ``w'Lw - gamma * m'w`` over the
    probability simplex, with ``L = D - K`` the Laplacian of the kernel
    graph. ``w'Lw = 1/2 sum_ij K_ij (w_i - w_j)^2`` pulls strongly similar
    names toward equal weight, so weight concentrates on coherent
    high-momentum clusters. Solved by projected gradient descent.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from sklearn.base import BaseEstimator

from ._io import write_rows
from ._validation import check_kernel, check_vector
from .exceptions import ConfigError, DataError

logger = logging.getLogger(__name__)

MOMENTUM_WEEKS = 13


@dataclass
class MomentumSignal:
    entity_ids: List[str]
    scores: np.ndarray


@dataclass
class PortfolioWeights:
    entity_ids: List[str]
    weights: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if len(self.entity_ids) != self.weights.shape[0]:
            raise ConfigError("weights and entity ids differ in length")

    def is_valid(self, tol=1e-10):
        w = self.weights
        return bool(np.all(np.isfinite(w)) and np.all(w >= 0) and abs(w.sum() - 1.0) <= tol)


@dataclass
class DivMomConfig:
    lam: float = 0.15
    k: int = 30

    def validate(self, n=None):
        if not (np.isfinite(self.lam) and self.lam >= 0):
            raise ConfigError(f"DivMom lambda must be >= 0, got {self.lam}")
        if int(self.k) != self.k or self.k < 1:
            raise ConfigError(f"DivMom k must be a positive integer, got {self.k}")
        if n is not None and self.k > n:
            raise ConfigError(f"DivMom k={self.k} exceeds universe size {n}")
        return self


@dataclass
class GraphConfig:
    gamma: float = 1.0
    max_iters: int = 5000
    step_size: float = 0.05
    tolerance: float = 1e-8

    def validate(self):
        if not self.gamma > 0:
            raise ConfigError(f"gamma must be > 0, got {self.gamma}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ConfigError(f"max_iters must be a positive integer, got {self.max_iters}")
        if not self.step_size > 0:
            raise ConfigError(f"step_size must be > 0, got {self.step_size}")
        if not self.tolerance > 0:
            raise ConfigError(f"tolerance must be > 0, got {self.tolerance}")
        return self


def momentum_scores(training_returns, entity_ids=None, weeks=MOMENTUM_WEEKS) -> MomentumSignal:
    """Cumulative simple return over the last ``weeks`` rows of a ``(T, N)`` panel."""
    R = np.asarray(training_returns, dtype=float)
    if R.ndim == 1:
        R = R[:, None]
    if R.ndim != 2 or R.shape[1] == 0:
        raise DataError("momentum needs a non-empty (weeks, entities) panel")
    if R.shape[0] < weeks:
        raise DataError(f"momentum needs at least {weeks} weeks, got {R.shape[0]}")
    ids = list(entity_ids) if entity_ids is not None else [str(i) for i in range(R.shape[1])]
    scores = np.prod(1.0 + R[-weeks:], axis=0) - 1.0
    return MomentumSignal(ids, scores)


def _unpack(m, K):
    scores = m.scores if isinstance(m, MomentumSignal) else m
    ids = m.entity_ids if isinstance(m, MomentumSignal) else None
    entries = K.entries if hasattr(K, "entries") else K
    entries = check_kernel(entries)
    scores = check_vector(scores, entries.shape[0], name="momentum")
    if ids is None:
        ids = [str(i) for i in range(scores.shape[0])]
    kernel_ids = getattr(K, "entity_ids", None)
    if kernel_ids is not None and list(kernel_ids) != list(ids):
        raise ConfigError("momentum and kernel are not aligned on entity ids")
    return list(ids), scores, entries


def divmom_select(m, K, cfg: DivMomConfig = DivMomConfig()) -> PortfolioWeights:
    ids, scores, entries = _unpack(m, K)
    n = scores.shape[0]
    cfg.validate(n)
    selected = [int(np.argmax(scores))]
    available = np.ones(n, dtype=bool)
    available[selected[0]] = False
    sim_sum = entries[selected[0]].copy()
    while len(selected) < cfg.k:
        gain = scores - cfg.lam * sim_sum / len(selected)
        gain[~available] = -np.inf
        pick = int(np.argmax(gain))
        selected.append(pick)
        available[pick] = False
        sim_sum += entries[pick]
    w = np.zeros(n)
    w[selected] = 1.0 / cfg.k
    return PortfolioWeights(ids, w, {"selected": selected})


def simplex_project(v) -> np.ndarray:
    """Euclidean projection onto ``{w >= 0, sum w = 1}`` (sort-based)."""
    v = check_vector(v, name="vector")
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ranks = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / ranks > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    w = np.maximum(v - theta, 0.0)
    return w / w.sum()


def graph_objective(w, laplacian, scores, gamma):
    return float(w @ laplacian @ w - gamma * scores @ w)


def graph_allocate(m, K, cfg: GraphConfig = GraphConfig()) -> PortfolioWeights:
    """Projected gradient descent from the uniform portfolio.

    A step that raises the objective is rejected and the step size halved,
    so the recorded objective sequence never increases. Stops when the L1
    move falls below ``cfg.tolerance``; otherwise returns the best iterate
    after ``cfg.max_iters`` attempts with ``diagnostics['converged']``
    False.
    """
    cfg.validate()
    ids, scores, entries = _unpack(m, K)
    n = scores.shape[0]
    laplacian = np.diag(entries.sum(axis=1)) - entries
    w = np.full(n, 1.0 / n)
    f = graph_objective(w, laplacian, scores, cfg.gamma)
    history = [f]
    step = cfg.step_size
    converged = False
    iters = 0
    while iters < cfg.max_iters:
        iters += 1
        grad = 2.0 * laplacian @ w - cfg.gamma * scores
        w_new = simplex_project(w - step * grad)
        f_new = graph_objective(w_new, laplacian, scores, cfg.gamma)
        if f_new > f:
            step *= 0.5
            continue
        move = np.abs(w_new - w).sum()
        w, f = w_new, f_new
        history.append(f)
        if move < cfg.tolerance:
            converged = True
            break
    if not converged:
        logger.warning("graph allocation did not converge in %d iterations", cfg.max_iters)
    diagnostics = {"converged": converged, "iterations": iters, "objective": history, "step_size": step}
    return PortfolioWeights(ids, w, diagnostics)


# --------------------------------------------------------------------------
# estimators


class DivMomAllocator(BaseEstimator):
    """``fit(K, momentum)`` selects ``k`` names; result in ``weights_``."""

    def __init__(self, lam=0.15, k=30):
        self.lam = lam
        self.k = k

    def fit(self, K, momentum):
        result = divmom_select(momentum, K, DivMomConfig(self.lam, self.k))
        self.weights_ = result.weights
        self.selected_ = np.array(result.diagnostics["selected"])
        return self


class GraphAllocator(BaseEstimator):
    """``fit(K, momentum)`` solves the Laplacian-regularised simplex program."""

    def __init__(self, gamma=1.0, step_size=0.05, tolerance=1e-8, max_iters=5000):
        self.gamma = gamma
        self.step_size = step_size
        self.tolerance = tolerance
        self.max_iters = max_iters

    def fit(self, K, momentum):
        cfg = GraphConfig(self.gamma, self.max_iters, self.step_size, self.tolerance)
        result = graph_allocate(momentum, K, cfg)
        self.weights_ = result.weights
        self.converged_ = result.diagnostics["converged"]
        self.objective_history_ = np.array(result.diagnostics["objective"])
        return self


def write_weights_csv(path, rows):
    """``rows``: iterable of ``(period_id, PortfolioWeights)``."""
    out = []
    for period_id, pw in rows:
        out.extend((period_id, eid, float(w)) for eid, w in zip(pw.entity_ids, pw.weights))
    write_rows(path, ["period_id", "entity_id", "weight"], out)
