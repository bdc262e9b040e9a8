"""Zeroth-order gradient, Hessian-vector and gradient-norm estimators.

All estimators evaluate their perturbed points in a single metered batch and
reduce in a fixed order, so the result does not depend on how the batch is
evaluated.  Advertised costs (single-component queries):

=================  ===========================
coord-central      ``2 d`` per component
coord-forward      ``(d + 1)`` per component
rand-central       ``2`` per component
hv_estimate        ``4 d`` (``2 d`` with cache)
=================  ===========================
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .oracle import BlackBoxProblem


class Verdict(enum.Enum):
    LARGE = "Large"
    SMALL = "Small"


@dataclass
class GradEstimate:
    g: np.ndarray
    variant: str
    mu: float
    queries_spent: int
    batch: np.ndarray


@dataclass
class HvEstimate:
    Hv: np.ndarray
    mu: float
    x0: np.ndarray
    v: np.ndarray
    queries_spent: int


@dataclass
class HvCache:
    """Cached ``f_i(x0 +- mu e_j)`` for one ``(i, x0, mu)`` triple."""

    i: int
    x0: np.ndarray
    mu: float
    plus: np.ndarray
    minus: np.ndarray

    def matches(self, i, x0, mu) -> bool:
        return self.i == i and self.mu == mu and np.array_equal(self.x0, x0)


def _check_mu(mu):
    if not mu > 0:
        raise ValueError(f"smoothing parameter must be positive, got {mu}")


def _as_batch(batch) -> np.ndarray:
    b = np.atleast_1d(np.asarray(batch, dtype=np.int64))
    if b.size == 0:
        raise ValueError("empty component batch")
    return b


def coord_grad_central(problem: BlackBoxProblem, batch, x, mu: float) -> GradEstimate:
    _check_mu(mu)
    b = _as_batch(batch)
    x = np.asarray(x, dtype=float)
    d = problem.dim
    E = mu * np.eye(d)
    # rows ordered (component, coordinate, sign)
    pts = np.concatenate([x + E, x - E])  # (2d, d)
    X = np.tile(pts, (len(b), 1))
    idx = np.repeat(b, 2 * d)
    vals = problem.eval_batch(idx, X).reshape(len(b), 2, d)
    diff = vals[:, 0, :] - vals[:, 1, :]
    g = diff.sum(axis=0) / (2 * mu * len(b))
    return GradEstimate(g, "coord-central", mu, 2 * d * len(b), b)


def coord_grad_forward(problem: BlackBoxProblem, batch, x, mu: float) -> GradEstimate:
    _check_mu(mu)
    b = _as_batch(batch)
    x = np.asarray(x, dtype=float)
    d = problem.dim
    pts = np.concatenate([x[None, :], x + mu * np.eye(d)])  # (d+1, d)
    X = np.tile(pts, (len(b), 1))
    idx = np.repeat(b, d + 1)
    vals = problem.eval_batch(idx, X).reshape(len(b), d + 1)
    g = (vals[:, 1:] - vals[:, :1]).sum(axis=0) / (mu * len(b))
    return GradEstimate(g, "coord-forward", mu, (d + 1) * len(b), b)


def unit_sphere(d: int, rng: np.random.Generator) -> np.ndarray:
    u = rng.standard_normal(d)
    return u / np.linalg.norm(u)


def rand_grad_central(problem: BlackBoxProblem, batch, x, mu: float,
                      rng: np.random.Generator, u: Optional[np.ndarray] = None) -> GradEstimate:
    """``d [f_S(x + mu u) - f_S(x - mu u)] / (2 mu) u`` with ``u`` uniform on the sphere."""
    _check_mu(mu)
    b = _as_batch(batch)
    x = np.asarray(x, dtype=float)
    d = problem.dim
    if u is None:
        u = unit_sphere(d, rng)
    X = np.tile(np.stack([x + mu * u, x - mu * u]), (len(b), 1))
    vals = problem.eval_batch(np.repeat(b, 2), X).reshape(len(b), 2)
    diff = (vals[:, 0] - vals[:, 1]).sum() / len(b)
    return GradEstimate(d * diff / (2 * mu) * u, "rand-central", mu, 2 * len(b), b)


def make_hv_cache(problem: BlackBoxProblem, i: int, x0, mu: float) -> HvCache:
    _check_mu(mu)
    x0 = np.asarray(x0, dtype=float)
    d = problem.dim
    E = mu * np.eye(d)
    vals = problem.eval_batch(np.full(2 * d, i), np.concatenate([x0 + E, x0 - E]))
    return HvCache(i, x0.copy(), mu, vals[:d], vals[d:])


def hv_estimate(problem: BlackBoxProblem, i: int, x0, v, mu: float,
                cache: Optional[HvCache] = None) -> HvEstimate:
    """Four-point finite-difference estimate of ``grad^2 f_i(x0) v``.

    ``(Hv)_j = [f(x0+v+mu e_j) - f(x0+v-mu e_j) + f(x0-mu e_j) - f(x0+mu e_j)] / (2 mu)``
    """
    _check_mu(mu)
    x0 = np.asarray(x0, dtype=float)
    v = np.asarray(v, dtype=float)
    d = problem.dim
    E = mu * np.eye(d)
    y = x0 + v
    if cache is not None and cache.matches(i, x0, mu):
        vals = problem.eval_batch(np.full(2 * d, i), np.concatenate([y + E, y - E]))
        fp, fm = vals[:d], vals[d:]
        base_p, base_m = cache.plus, cache.minus
        cost = 2 * d
    else:
        vals = problem.eval_batch(np.full(4 * d, i), np.concatenate([y + E, y - E, x0 + E, x0 - E]))
        fp, fm, base_p, base_m = vals[:d], vals[d:2 * d], vals[2 * d:3 * d], vals[3 * d:]
        cost = 4 * d
    Hv = ((fp - fm) + (base_m - base_p)) / (2 * mu)
    return HvEstimate(Hv, mu, x0, v, cost)


def hv_estimate_batch(problem: BlackBoxProblem, idx: Sequence[int], x0, V, mu) -> np.ndarray:
    """Row-wise ``hv_estimate(i_k, x0, V[k], mu[k])`` in one metered call (cost ``4 d`` each)."""
    idx = _as_batch(idx)
    x0 = np.asarray(x0, dtype=float)
    V = np.atleast_2d(np.asarray(V, dtype=float))
    mu = np.broadcast_to(np.asarray(mu, dtype=float), (len(idx),))
    if np.any(mu <= 0):
        raise ValueError("smoothing parameter must be positive")
    d = problem.dim
    eye = np.eye(d)
    blocks = []
    for v, m in zip(V, mu):
        E = m * eye
        y = x0 + v
        blocks.append(np.concatenate([y + E, y - E, x0 + E, x0 - E]))
    vals = problem.eval_batch(np.repeat(idx, 4 * d), np.concatenate(blocks)).reshape(len(idx), 4, d)
    return ((vals[:, 0] - vals[:, 1]) + (vals[:, 3] - vals[:, 2])) / (2 * mu[:, None])


# ---------------------------------------------------------------------------
# gradient-norm verification


def verification_mu(epsilon: float, rho: float, d: int, mode: str) -> float:
    rho = max(rho, 1e-6)
    c = 1.5 if mode == "deterministic" else 0.75
    return math.sqrt(c * epsilon / (rho * math.sqrt(d)))


def online_verification_batch(epsilon: float, sigma: float, K: int, p: float) -> int:
    return int(math.ceil(max(32 * sigma**2 / epsilon**2, 1.0) * math.log(2 * K / p)))


def sample_batch(n: int, size: int, rng: np.random.Generator, replace: bool = False) -> np.ndarray:
    """Uniform component batch; ``size >= n`` without replacement degrades to ``[n]``."""
    size = max(int(size), 1)
    if replace:
        return rng.integers(0, n, size=size)
    if size >= n:
        return np.arange(n)
    return np.sort(rng.choice(n, size=size, replace=False))


def verify_gradient_norm(problem: BlackBoxProblem, x, epsilon: float, p: float, mode: str,
                         rng: np.random.Generator, *, K: int = 1, mu: Optional[float] = None,
                         batch_size: Optional[int] = None, median_of_means: bool = False,
                         groups: Optional[int] = None) -> Verdict:
    """Classify ``||grad f(x)||`` as Large (``>= eps/2``) or Small (``<= eps``).

    The estimate is compared against ``3 eps / 4``; a norm exactly on the
    threshold counts as Large.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if mode not in ("deterministic", "online"):
        raise ValueError(f"unknown verification mode {mode!r}")
    d, n = problem.dim, problem.n
    if mu is None:
        mu = verification_mu(epsilon, problem.smoothness.rho, d, mode)
    if mode == "deterministic":
        g = coord_grad_central(problem, np.arange(n), x, mu).g
    else:
        if batch_size is None:
            batch_size = online_verification_batch(epsilon, problem.smoothness.sigma_var, K, p)
        if median_of_means:
            m = groups or max(1, int(math.ceil(math.log(1 / p))))
            ests = [coord_grad_central(problem, sample_batch(n, batch_size, rng, replace=True), x, mu).g
                    for _ in range(m)]
            norms = np.array([np.linalg.norm(e) for e in ests])
            g = ests[int(np.argsort(norms, kind="stable")[(m - 1) // 2])]
        else:
            g = coord_grad_central(problem, sample_batch(n, batch_size, rng), x, mu).g
    return Verdict.LARGE if np.linalg.norm(g) >= 0.75 * epsilon else Verdict.SMALL
