"""Negative-curvature finding from function values only.

Two families are provided:

* an online, Oja-style iteration driven by single-component Hessian-vector
  estimates (:func:`ncf_online_weak`), boosted to high confidence by repeated
  runs plus a Rayleigh-quotient check (:func:`ncf_online`);
* a deterministic Chebyshev-accelerated iteration on the full objective
  (:func:`ncf_deterministic`).

Both return :class:`Direction` holding a unit vector, or :class:`Bottom`,
which claims ``grad^2 f(x0) >= -delta I`` with the requested confidence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .estimators import hv_estimate, hv_estimate_batch, unit_sphere
from .oracle import BlackBoxProblem

MU_FLOOR = 1e-12
RHO_FLOOR = 1e-6


@dataclass
class NcfOutcome:
    iterations: int = 0
    queries: int = 0
    info: dict = field(default_factory=dict)

    @property
    def is_bottom(self) -> bool:
        return isinstance(self, Bottom)


@dataclass
class Direction(NcfOutcome):
    v: np.ndarray = None

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=float)
        self.v = self.v / np.linalg.norm(self.v)


@dataclass
class Bottom(NcfOutcome):
    pass


@dataclass(frozen=True)
class NcfParams:
    """Constants and schedule overrides shared by all NCF routines.

    ``preset="theory"`` evaluates the closed-form schedules as written with
    constants ``c0``/``c1``.  ``preset="practical"`` keeps their shape with
    unit constants but uses a larger step and a floating-point-safe
    perturbation radius (``sigma_floor * max(1, ||x0||)``, escape radius
    ``r_factor * sigma_pert``).  Any explicit override wins in either preset.
    """

    delta: float
    p: float = 0.05
    c0: float = 1.0
    c1: float = 1.0
    preset: str = "practical"
    eta: Optional[float] = None
    T: Optional[int] = None
    sigma_pert: Optional[float] = None
    r: Optional[float] = None
    m: Optional[int] = None
    kappa: float = 1.0
    sigma_floor: float = 1e-5
    r_factor: float = 100.0
    probe_factor: float = 10.0

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not 0 < self.p <= 1:
            raise ValueError("p must lie in (0, 1]")
        if self.preset not in ("theory", "practical"):
            raise ValueError(f"unknown preset {self.preset!r}")

    def with_p(self, p: float) -> "NcfParams":
        return replace(self, p=p)

    def _check(self, ell):
        if self.delta > ell:
            raise ValueError(f"delta={self.delta} exceeds ell={ell}")

    def online_schedule(self, d: int, ell: float, rho: float, x0=None) -> dict:
        self._check(ell)
        rho = max(rho, RHO_FLOOR)
        c0, delta, L = self.c0, self.delta, math.log(100 * d)
        if self.preset == "theory":
            eta = delta / (c0**2 * ell**2 * L)
        else:
            eta = 1.0 / (c0 * ell)
        eta = self.eta if self.eta is not None else eta
        T = self.T if self.T is not None else int(math.ceil(c0**2 * L / (eta * delta)))
        sigma = eta**2 * delta**3 / ((100 * d) ** (3 * c0) * rho)
        if self.preset == "practical":
            sigma = max(sigma, self._floor(x0))
        sigma = self.sigma_pert if self.sigma_pert is not None else sigma
        if self.r is not None:
            r = self.r
        elif self.preset == "theory":
            r = (100 * d) ** c0 * sigma
        else:
            r = self.r_factor * sigma
        return {"eta": eta, "T": T, "sigma_pert": sigma, "r": r}

    def deterministic_schedule(self, d: int, ell: float, rho: float, x0=None) -> dict:
        self._check(ell)
        rho = max(rho, RHO_FLOOR)
        c1, delta, q = self.c1, self.delta, d / self.p
        T_real = c1**2 * math.log(q) * math.sqrt(ell) / math.sqrt(delta)
        T = self.T if self.T is not None else max(1, int(math.ceil(T_real)))
        sigma = q ** (-2 * c1) * delta / (T_real**4 * rho) if T_real > 0 else delta / rho
        if self.preset == "practical":
            sigma = max(sigma, self._floor(x0))
        sigma = self.sigma_pert if self.sigma_pert is not None else sigma
        if self.r is not None:
            r = self.r
        elif self.preset == "theory":
            r = q**c1 * sigma
        else:
            r = self.r_factor * sigma
        return {"T": T, "sigma_pert": sigma, "r": r}

    def repetitions(self) -> int:
        return max(1, int(math.ceil(self.kappa * math.log(1.0 / self.p))))

    def probe_size(self, n: int, ell: float) -> int:
        if self.m is not None:
            return int(self.m)
        if n == 1:
            # every draw is the same deterministic query
            return 1
        m_theory = int(math.ceil(ell**2 * math.log(1.0 / self.p) / self.delta**2))
        if self.preset == "theory":
            return max(1, m_theory)
        return max(1, min(m_theory, int(math.ceil(self.probe_factor * math.log(1.0 / self.p)))))

    def _floor(self, x0) -> float:
        scale = 1.0 if x0 is None else max(1.0, float(np.linalg.norm(x0)))
        return self.sigma_floor * scale


def ncf_online_weak(problem: BlackBoxProblem, x0, params: NcfParams, rng: np.random.Generator,
                    monitor: Optional[Callable[[int, np.ndarray], None]] = None) -> NcfOutcome:
    """Single Oja-style run; finds negative curvature with probability >= 2/3."""
    x0 = np.asarray(x0, dtype=float)
    d, n = problem.dim, problem.n
    sm = problem.smoothness
    sched = params.online_schedule(d, sm.ell, sm.rho, x0)
    eta, T, r = sched["eta"], sched["T"], sched["r"]
    start = problem.ledger.total
    with problem.ledger.phase("ncf"):
        y = sched["sigma_pert"] * unit_sphere(d, rng)
        hist = [y]
        for t in range(1, T + 1):
            if monitor is not None:
                monitor(t, x0 + y)
            i = int(rng.integers(n))
            mu = max(float(np.linalg.norm(y)), MU_FLOOR)
            y = y - eta * hv_estimate(problem, i, x0, y, mu).Hv
            if np.linalg.norm(y) >= r:
                s = int(rng.integers(1, t + 1))
                return Direction(iterations=t, queries=problem.ledger.total - start,
                                 info={"s": s, "advertised": 4 * d * t, **sched}, v=hist[s - 1])
            hist.append(y)
    return Bottom(iterations=T, queries=problem.ledger.total - start,
                  info={"advertised": 4 * d * T, **sched})


def rayleigh_probe(problem: BlackBoxProblem, x0, v_unit, delta: float, p: float,
                   rng: np.random.Generator, m: Optional[int] = None,
                   params: Optional[NcfParams] = None) -> float:
    """Averaged ``v'^T H_i v' / ||v'||^2`` over ``m`` random components."""
    x0 = np.asarray(x0, dtype=float)
    v = np.asarray(v_unit, dtype=float)
    d, n = problem.dim, problem.n
    sm = problem.smoothness
    if m is None:
        m = (params or NcfParams(delta=delta, p=p)).probe_size(n, sm.ell)
    vs = delta / (16 * d * max(sm.rho, RHO_FLOOR)) * v
    nv = float(np.linalg.norm(vs))
    idx = rng.integers(n, size=m)
    with problem.ledger.phase("ncf"):
        Hv = hv_estimate_batch(problem, idx, x0, np.tile(vs, (m, 1)), max(nv, MU_FLOOR))
    return float(np.mean(Hv @ vs) / nv**2)


def ncf_online(problem: BlackBoxProblem, x0, params: NcfParams, rng: np.random.Generator) -> NcfOutcome:
    """Boosted online NCF: up to ``ceil(kappa log(1/p))`` weak runs, each verified by a probe."""
    start = problem.ledger.total
    reps = params.repetitions()
    m = params.probe_size(problem.n, problem.smoothness.ell)
    iters = cost = 0
    for j in range(reps):
        out = ncf_online_weak(problem, x0, params, rng)
        iters += out.iterations
        cost += out.info["advertised"]
        if isinstance(out, Direction):
            z = rayleigh_probe(problem, x0, out.v, params.delta, params.p, rng, m=m)
            cost += 4 * problem.dim * m
            if z <= -0.75 * params.delta:
                return Direction(iterations=iters, queries=problem.ledger.total - start,
                                 info={"weak_calls": j + 1, "z": z, "advertised": cost}, v=out.v)
    return Bottom(iterations=iters, queries=problem.ledger.total - start,
                  info={"weak_calls": reps, "advertised": cost})


def chebyshev_scalar(n: int, x: float) -> float:
    if n < 0:
        raise ValueError("degree must be nonnegative")
    t_prev, t = 1.0, x
    if n == 0:
        return t_prev
    for _ in range(n - 1):
        t_prev, t = t, 2 * x * t - t_prev
    return t


def _full_hv(problem, x0, y, mu):
    if problem.n == 1:
        return hv_estimate(problem, 0, x0, y, mu).Hv
    idx = np.arange(problem.n)
    return hv_estimate_batch(problem, idx, x0, np.tile(y, (problem.n, 1)), mu).mean(axis=0)


def ncf_deterministic(problem: BlackBoxProblem, x0, params: NcfParams, rng: np.random.Generator,
                      xi: Optional[np.ndarray] = None) -> NcfOutcome:
    """Chebyshev-accelerated NCF on the full objective.

    With ``M = I - (H + 3 delta/4 I)/ell`` the iterates satisfy
    ``y_t = U_{t-1}(M) xi`` and ``x_{t+1} - x0 = T_t(M) xi`` up to the
    Hessian-vector estimation error.  Components with curvature below
    ``-3 delta / 4`` grow like ``cosh(t sqrt(delta/ell))``; the rest stay
    bounded, so escaping radius ``r`` signals negative curvature.
    """
    x0 = np.asarray(x0, dtype=float)
    d = problem.dim
    sm = problem.smoothness
    sched = params.deterministic_schedule(d, sm.ell, sm.rho, x0)
    T, r = sched["T"], sched["r"]
    ell, shift = sm.ell, 1.0 - 0.75 * params.delta / sm.ell
    start = problem.ledger.total
    with problem.ledger.phase("ncf"):
        if xi is None:
            xi = sched["sigma_pert"] * unit_sphere(d, rng)
        y_prev, y = np.zeros(d), np.asarray(xi, dtype=float)
        disp = y
        for t in range(1, T + 1):
            mu = max(float(np.linalg.norm(y)), MU_FLOOR)
            My = -_full_hv(problem, x0, y, mu) / ell + shift * y
            y_prev, y = y, 2 * My - y_prev
            disp = y - My
            if np.linalg.norm(disp) >= r:
                return Direction(iterations=t, queries=problem.ledger.total - start,
                                 info={"displacement": disp, "advertised": 4 * d * problem.n * t,
                                       **sched}, v=disp)
    return Bottom(iterations=T, queries=problem.ledger.total - start,
                  info={"displacement": disp, "advertised": 4 * d * problem.n * T, **sched})
