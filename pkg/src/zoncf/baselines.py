"""Comparison methods: ZPSGD, PAGD with EscapeSaddle, and RSPI with DFPI.

All three work on the full objective.  Finite-sum problems are evaluated
through the mean of all components, so one function value costs ``n``
queries; use :meth:`BlackBoxProblem.collapsed` to count it as one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from .estimators import unit_sphere
from .oracle import BlackBoxProblem
from .solvers import DEFAULT_K, Termination, _run

RHO_FLOOR = 1e-6


@dataclass(frozen=True)
class BaselineParams:
    epsilon: float
    delta: Optional[float] = None
    preset: str = "practical"
    K: Optional[int] = None
    budget: Optional[int] = None
    record_clock: bool = True
    # ZPSGD
    eta: Optional[float] = None
    r: Optional[float] = None
    m: Optional[int] = None
    sigma_g: Optional[float] = None
    # PAGD
    c: Optional[float] = None
    c_h: float = 1.0
    chi: Optional[float] = None
    g_thres: Optional[float] = None
    f_thres: Optional[float] = None
    t_thres: Optional[int] = None
    h_low: Optional[float] = None
    terminate_on_failed_escape: bool = True
    # RSPI / DFPI
    sigma1: float = 1.0
    sigma2: float = 1.25
    rho_sigma1: float = 0.95
    T_sigma1: int = 20
    T_dfpi: int = 20
    dfpi_c: float = 1e-4
    dfpi_r: float = 1e-3
    dfpi_eta: Optional[float] = None
    # problem constants overriding the problem's smoothness profile
    ell: Optional[float] = None
    rho: Optional[float] = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        for name in ("eta", "r", "m", "sigma_g", "c", "g_thres", "t_thres"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise ValueError(f"{name} must be positive")
        if min(self.sigma1, self.sigma2, self.rho_sigma1, self.T_sigma1, self.T_dfpi) <= 0:
            raise ValueError("RSPI parameters must be positive")

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]

    def constants(self, problem: BlackBoxProblem):
        sm = problem.smoothness
        ell = self.ell if self.ell is not None else sm.ell
        rho = self.rho if self.rho is not None else sm.rho
        delta = self.delta if self.delta is not None else math.sqrt(max(rho, RHO_FLOOR) * self.epsilon)
        return ell, max(rho, RHO_FLOOR), delta


class _Full:
    """Metered full-objective evaluation with a declared per-point cost of ``n``."""

    def __init__(self, problem: BlackBoxProblem, rec):
        self.p, self.rec, self.n = problem, rec, problem.n

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        n = self.n
        idx = np.tile(np.arange(n), len(X))
        vals = self.p.eval_batch(idx, np.repeat(X, n, axis=0)).reshape(len(X), n).mean(axis=1)
        self.rec.charge(n * len(X))
        return vals


def uniform_ball(d: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    return radius * rng.random() ** (1.0 / d) * unit_sphere(d, rng)


# ---------------------------------------------------------------------------
# ZPSGD


def resolve_zpsgd(problem: BlackBoxProblem, params: BaselineParams) -> dict:
    ell, rho, _ = params.constants(problem)
    d, eps = problem.dim, params.epsilon
    return {
        "eta": params.eta if params.eta is not None else 1 / (2 * ell),
        "r": params.r if params.r is not None else eps,
        "m": int(params.m if params.m is not None else d),
        "sigma_g": params.sigma_g if params.sigma_g is not None else math.sqrt(eps / (rho * d)),
        "K": params.K or DEFAULT_K,
    }


def zpsgd_step(problem: BlackBoxProblem, x, params: BaselineParams, rng: np.random.Generator,
               *, resolved: Optional[dict] = None, _f=None) -> np.ndarray:
    """One step ``x - eta (g + xi)`` with the Gaussian-smoothing estimate ``g``; costs ``m + 1`` evaluations."""
    r = resolved or resolve_zpsgd(problem, params)
    f = _f or (lambda X: _plain_full(problem, X))
    x = np.asarray(x, dtype=float)
    d, m, s = problem.dim, r["m"], r["sigma_g"]
    Z = s * rng.standard_normal((m, d))
    vals = f(np.concatenate([x[None, :], x + Z]))
    g = (Z * (vals[1:] - vals[0])[:, None]).sum(axis=0) / (m * s**2)
    return x - r["eta"] * (g + uniform_ball(d, r["r"], rng))


def _plain_full(problem, X):
    X = np.atleast_2d(X)
    n = problem.n
    return problem.eval_batch(np.tile(np.arange(n), len(X)), np.repeat(X, n, axis=0)).reshape(len(X), n).mean(axis=1)


def zpsgd_run(problem: BlackBoxProblem, x0, params: BaselineParams, rng: np.random.Generator):
    r = resolve_zpsgd(problem, params)

    def body(rec, info, state):
        info["resolved"] = r
        f = _Full(problem, rec)
        x = np.array(x0, dtype=float)
        for t in range(r["K"]):
            state["iterations"] = t + 1
            x = zpsgd_step(problem, x, params, rng, resolved=r, _f=f)
            rec.log("descent", x)
        return Termination.ITERATION_CAP

    return _run("zpsgd", problem, x0, params, body)


# ---------------------------------------------------------------------------
# PAGD


def resolve_pagd(problem: BlackBoxProblem, params: BaselineParams) -> dict:
    ell, rho, delta = params.constants(problem)
    d, eps = problem.dim, params.epsilon
    c = params.c
    if c is None:
        c = params.eta * ell if params.eta is not None else 0.25
    dfv = problem.smoothness.delta_f or 1.0
    chi = params.chi if params.chi is not None else 3 * max(math.log(d * ell * dfv / (c * eps**2 * delta)), 4)
    eta = params.eta if params.eta is not None else c / ell
    r = params.r if params.r is not None else math.sqrt(c) / chi**2 * eps / ell
    g_thres = params.g_thres if params.g_thres is not None else math.sqrt(c) / chi**2 * eps
    f_thres = params.f_thres if params.f_thres is not None else c / chi**3 * math.sqrt(eps**3 / rho)
    t_thres = params.t_thres if params.t_thres is not None else (chi / c**2) * ell / math.sqrt(rho * eps)
    S = math.sqrt(c) / chi * math.sqrt(rho * eps) / rho
    h_low = params.h_low
    if h_low is None:
        h_low = min(g_thres, r * rho * delta * S / (2 * math.sqrt(d))) / params.c_h
    return {"c": c, "chi": chi, "eta": eta, "r": r, "g_thres": g_thres, "f_thres": f_thres,
            "t_thres": int(math.ceil(t_thres)), "S": S, "h_low": h_low,
            "h_main": g_thres / (4 * params.c_h), "K": params.K or DEFAULT_K}


def _forward_grad(f, x, h):
    d = len(x)
    vals = f(np.concatenate([x[None, :], x + h * np.eye(d)]))
    return (vals[1:] - vals[0]) / h


def escape_saddle(f, x_hat, r: dict, rng: np.random.Generator):
    """Perturb, then take up to ``t_thres`` descent steps; returns ``x_hat`` if ``f_thres`` is never gained."""
    x_hat = np.asarray(x_hat, dtype=float)
    d = len(x_hat)
    f_hat = f(x_hat)[0]
    x = x_hat + uniform_ball(d, r["r"], rng)
    for i in range(r["t_thres"] + 1):
        if f_hat - f(x)[0] >= r["f_thres"]:
            return x
        if i < r["t_thres"]:
            # the update after the final check cannot be returned, so it is skipped
            x = x - r["eta"] * _forward_grad(f, x, r["h_low"])
    return x_hat


def pagd_run(problem: BlackBoxProblem, x0, params: BaselineParams, rng: np.random.Generator):
    """Perturbed gradient descent with forward-difference gradients.

    With ``terminate_on_failed_escape=False`` a failed EscapeSaddle draws a
    new perturbation on the next iteration instead of stopping.
    """
    r = resolve_pagd(problem, params)

    def body(rec, info, state):
        info["resolved"] = r
        f = _Full(problem, rec)
        x = np.array(x0, dtype=float)
        info["failed_escapes"] = 0
        for t in range(r["K"]):
            state["iterations"] = t + 1
            z = _forward_grad(f, x, r["h_main"])
            if np.linalg.norm(z) >= 0.75 * r["g_thres"]:
                x = x - r["eta"] * z
                rec.log("descent", x)
                continue
            rec.log("verify", x)
            x_new = escape_saddle(f, x, r, rng)
            if np.array_equal(x_new, x):
                info["failed_escapes"] += 1
                rec.log("ncf_call", x)
                if params.terminate_on_failed_escape:
                    return Termination.SOSP_CERTIFIED
                continue
            x = x_new
            rec.log("nc_step", x)
        return Termination.ITERATION_CAP

    return _run("pagd", problem, x0, params, body)


# ---------------------------------------------------------------------------
# RSPI


def dfpi(problem: BlackBoxProblem, x, params: BaselineParams, rng: np.random.Generator, *, _f=None) -> np.ndarray:
    """Inexact power iteration ``s <- normalize(s - eta H s)`` with finite-difference ``H s``.

    Converges to the eigenvector of ``I - eta H`` with the largest modulus;
    with ``eta = 1/ell`` this is the most negative curvature direction.
    Costs ``4 d`` evaluations per iteration.
    """
    f = _f or (lambda X: _plain_full(problem, X))
    x = np.asarray(x, dtype=float)
    d = problem.dim
    ell, _, _ = params.constants(problem)
    eta = params.dfpi_eta if params.dfpi_eta is not None else 1.0 / ell
    c, r = params.dfpi_c, params.dfpi_r
    E = c * np.eye(d)
    s = unit_sphere(d, rng)
    for _ in range(params.T_dfpi):
        xp, xm = x + r * s, x - r * s
        vals = f(np.concatenate([xp + E, xp - E, xm + E, xm - E])).reshape(4, d)
        gp = (vals[0] - vals[1]) / (2 * c)
        gm = (vals[2] - vals[3]) / (2 * c)
        s = s - eta * (gp - gm) / (2 * r)
        s = s / np.linalg.norm(s)
    return s


def _triplet(f, x, fx, step):
    vals = f(np.stack([x + step, x - step]))
    best = int(np.argmin(vals))
    # ties keep the incumbent
    if vals[best] < fx:
        return (x + step if best == 0 else x - step), float(vals[best])
    return x, fx


def rspi_run(problem: BlackBoxProblem, x0, params: BaselineParams, rng: np.random.Generator):
    """Random search alternated with DFPI-direction search; ``sigma1`` decays geometrically."""
    K = params.K or DEFAULT_K

    def body(rec, info, state):
        f = _Full(problem, rec)
        x = np.array(x0, dtype=float)
        fx = float(f(x)[0])
        s1_len = params.sigma1
        for k in range(K):
            state["iterations"] = k + 1
            if k > 0 and k % params.T_sigma1 == 0:
                s1_len *= params.rho_sigma1
            x_k = x
            x, fx = _triplet(f, x, fx, s1_len * unit_sphere(problem.dim, rng))
            rec.log("descent", x)
            s2 = dfpi(problem, x_k, params, rng, _f=f)
            x, fx = _triplet(f, x, fx, params.sigma2 * s2)
            rec.log("nc_step", x)
        info["sigma1_final"] = s1_len
        return Termination.ITERATION_CAP

    return _run("rspi", problem, x0, params, body)


BASELINES = {"zpsgd": zpsgd_run, "pagd": pagd_run, "rspi": rspi_run}
