"""Statistical and exact invariant checks, grouped into suites with a JSON report.

Each check is a plain function with its sample sizes as keyword arguments;
the suites below run them at sizes that finish in seconds, and the
acceptance tests call the same functions at full size.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np

from ..baselines import BaselineParams, dfpi, pagd_run, rspi_run, zpsgd_run
from ..estimators import coord_grad_central, hv_estimate, rand_grad_central
from ..ncf import Direction, NcfParams, chebyshev_scalar, ncf_deterministic, ncf_online, ncf_online_weak
from ..oracle import (make_cubic_reg, make_octopus, make_quadratic, make_sum_cubes, sample_cubic_reg,
                      sample_cubic_reg_stochastic)
from ..solvers import (SolverParams, geometric_epoch_length, negative_curvature_step, zo_gd_ncf,
                       zo_scsg_ncf, zo_sgd_ncf, zo_spider_coord, zo_spider_ncf)

SUITES = ("estimators", "ncf", "solvers", "baselines")
# floating-point slack on inequalities that hold with equality in exact arithmetic
REL_TOL = 1e-6


@dataclass
class Check:
    suite: str
    test: str
    status: str
    observed: float
    bound: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def line(self) -> str:
        return f"[{self.status.upper()}] {self.suite}/{self.test}: observed={self.observed:.6g} bound={self.bound:.6g} {self.detail}".rstrip()


def _check(suite, test, ok, observed, bound, detail="") -> Check:
    return Check(suite, test, "pass" if ok else "fail", float(observed), float(bound), detail)


# ---------------------------------------------------------------------------
# estimators


def estimator_bounds(dims=(1, 5, 20, 100), mus=(1e-1, 1e-2, 1e-3), points=50, seed=0,
                     mu_scale: float = 1.0) -> list:
    """Sweep the coordinate-gradient and Hessian-vector error bounds on ``sum x^3``.

    ``mu_scale != 1`` evaluates the estimators at a corrupted smoothing
    parameter while keeping the bound at the nominal one (negative control).
    """
    rng = np.random.default_rng(seed)
    viol_g = viol_h = total = 0
    worst_g = worst_h = None
    for d in dims:
        prob = make_sum_cubes(d)
        rho = prob.smoothness.rho
        for mu in mus:
            for _ in range(points):
                x = rng.uniform(-1, 1, d)
                v = rng.standard_normal(d)
                v *= rng.uniform(0.1, 10) * mu / np.linalg.norm(v)
                total += 1
                err = np.linalg.norm(coord_grad_central(prob, [0], x, mu * mu_scale).g - prob.gradient(x))
                bnd = math.sqrt(d) * rho * mu**2 / 6
                if err > bnd * (1 + REL_TOL):
                    viol_g += 1
                    worst_g = f"||g_hat - grad f|| = {err:.3e} > sqrt(d) rho mu^2/6 = {bnd:.3e} (d={d}, mu={mu:g})"
                err = np.linalg.norm(hv_estimate(prob, 0, x, v, mu * mu_scale).Hv - prob.hessian(x) @ v)
                bnd = rho * (v @ v / 2 + math.sqrt(d) * mu**2 / 3)
                if err > bnd * (1 + REL_TOL):
                    viol_h += 1
                    worst_h = (f"||Hv_hat - Hv|| = {err:.3e} > rho(||v||^2/2 + sqrt(d) mu^2/3) = {bnd:.3e} "
                               f"(d={d}, mu={mu:g})")
    return [
        _check("estimators", "coord_grad_bound", viol_g == 0, viol_g, 0, worst_g or f"{total} points"),
        _check("estimators", "hv_bound", viol_h == 0, viol_h, 0, worst_h or f"{total} points"),
    ]


def quadratic_exactness(instances=100, seed=0, tol=1e-9) -> Check:
    """Central estimators and ``hv_estimate`` are exact on quadratics up to rounding."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        d = int(rng.integers(1, 21))
        M = rng.standard_normal((d, d))
        H = (M + M.T) / 2
        g = rng.standard_normal(d)
        prob = make_quadratic(H, g)
        x, v = rng.standard_normal(d), rng.standard_normal(d)
        mu = 10.0 ** rng.uniform(-3, 0)
        grad = H @ x + g
        worst = max(worst, np.abs(coord_grad_central(prob, [0], x, mu).g - grad).max())
        # the random-direction estimate is exact for the directional derivative
        u = rng.standard_normal(d)
        u /= np.linalg.norm(u)
        worst = max(worst, np.abs(rand_grad_central(prob, [0], x, mu, rng, u=u).g - d * (u @ grad) * u).max())
        worst = max(worst, np.abs(hv_estimate(prob, 0, x, v, mu).Hv - H @ v).max())
    return _check("estimators", "quadratic_exactness", worst <= tol, worst, tol)


# ---------------------------------------------------------------------------
# NCF


def ncf_instance(seed: int, negative: bool = True, d: int = 20):
    """Quadratic with spectrum in ``[0.1, 1]`` and, if ``negative``, one eigenvalue ``-1``."""
    rng = np.random.default_rng(1000 + seed)
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    ev = rng.uniform(0.1, 1.0, d)
    if negative:
        ev[0] = -1.0
    H = Q @ np.diag(ev) @ Q.T
    return make_quadratic(H, ell=1.0), H


def ncf_rate(fn: Callable, seeds: int, negative: bool, threshold: float, delta=0.5, p=0.05, d=20) -> float:
    """Fraction of seeds with the expected outcome (Direction below ``threshold``, or Bottom)."""
    params = NcfParams(delta=delta, p=p)
    hits = 0
    for s in range(seeds):
        prob, H = ncf_instance(s, negative, d)
        out = fn(prob, np.zeros(d), params, np.random.default_rng(s))
        if negative:
            hits += isinstance(out, Direction) and out.v @ H @ out.v <= threshold
        else:
            hits += out.is_bottom
    return hits / seeds


def ncf_checks(seeds=40, weak_seeds=60, delta=0.5, p=0.05, rate=0.9, weak_rate=None) -> list:
    out = []
    for name, fn in (("online", ncf_online), ("deterministic", ncf_deterministic)):
        r = ncf_rate(fn, seeds, True, -delta / 2, delta, p)
        out.append(_check("ncf", f"{name}_direction_rate", r >= rate, r, rate, f"target 1-p={1 - p:g}"))
        r = ncf_rate(fn, seeds, False, 0.0, delta, p)
        out.append(_check("ncf", f"{name}_bottom_rate", r >= rate, r, rate))
    if weak_rate is None:
        weak_rate = 2 / 3 - 3 * math.sqrt(2 / 9 / weak_seeds)
    r = ncf_rate(ncf_online_weak, weak_seeds, True, -0.75 * delta, delta, p)
    out.append(_check("ncf", "weak_success_rate", r >= weak_rate, r, weak_rate, "target 2/3"))
    return out


def chebyshev_equivalence(instances=20, seed=0, T=30, tol=1e-8) -> Check:
    """The inexact recurrence matches the dense ``T_T(M) xi`` on quadratics."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        d = int(rng.integers(2, 21))
        Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
        ev = rng.uniform(-1, 1, d)
        H = Q @ np.diag(ev) @ Q.T
        ell, delta = 1.0, 0.2
        prob = make_quadratic(H, ell=ell)
        xi = rng.standard_normal(d)
        params = NcfParams(delta=delta, p=0.1, T=T, r=1e300)
        x0 = rng.standard_normal(d)
        got = ncf_deterministic(prob, x0, params, rng, xi=xi).info["displacement"]
        lam = 1 - (ev + 0.75 * delta) / ell
        want = Q @ (np.array([chebyshev_scalar(T, l) for l in lam]) * (Q.T @ xi))
        worst = max(worst, np.linalg.norm(got - want) / np.linalg.norm(want))
    return _check("ncf", "chebyshev_equivalence", worst <= tol, worst, tol)


# ---------------------------------------------------------------------------
# solvers


def nc_step_decrease(steps=2000, seed=0, d=10, delta=0.5, rho=1.0) -> Check:
    """Random-sign steps along a ``-delta/2`` curvature direction decrease f by ``delta^3/(12 rho^2)`` on average.

    The instance attains the bound with equality: ``f(0 +- s v) - f(0)`` is
    ``+- s b'v - delta s^2/4 + rho s^3/6`` with ``s = delta/rho``.
    """
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    ev = rng.uniform(0.5, 1.0, d)
    ev[0] = -delta / 2
    A = Q @ np.diag(ev) @ Q.T
    A = (A + A.T) / 2
    b = rng.standard_normal(d)
    # a small linear term keeps the random-sign noise (and so the SE slack) small
    b *= 0.05 * delta**2 / np.linalg.norm(b)
    prob = make_cubic_reg(A, b, rho / 2, ell=2.0, rho=rho)
    x = np.zeros(d)
    f0 = prob.objective(x)
    v = Q[:, 0]
    dec = np.array([f0 - prob.objective(negative_curvature_step(prob, x, v, delta, rho, rng))
                    for _ in range(steps)])
    se = dec.std(ddof=1) / math.sqrt(steps)
    bound = delta**3 / (12 * rho**2) - 3 * se
    return _check("solvers", "nc_step_decrease", dec.mean() >= bound, dec.mean(), bound)


def scsg_epoch_mean(draws=10_000, B=128, b=10, seed=0, tol=0.05) -> Check:
    rng = np.random.default_rng(seed)
    theta = B / (B + b)
    mean = np.mean([geometric_epoch_length(theta, rng) for _ in range(draws)])
    rel = abs(mean - B / b) / (B / b)
    return _check("solvers", "scsg_epoch_mean", rel <= tol, rel, tol, f"mean N={mean:.4f}, B/b={B / b:g}")


def spider_estimate_quality(seeds=(0,), d=20, epsilon=1e-2, K=400, frac=0.05) -> list:
    """Fraction of iterations with ``||v_k - grad f(x_k)||^2 > eps * eps_tilde`` under the theory preset."""
    out = []
    for seed in seeds:
        prob = sample_cubic_reg_stochastic(d, seed)
        params = SolverParams(epsilon=epsilon, preset="theory", K=K)
        bad = []

        def mon(k, x, v):
            bad.append(float(np.sum((v - prob.gradient(x)) ** 2)))

        rep = zo_spider_coord(prob, np.zeros(d), params, np.random.default_rng(seed), monitor=mon)
        et = rep.info["resolved"]["eps_tilde"]
        f = float(np.mean(np.array(bad) > epsilon * et))
        out.append(_check("solvers", f"spider_estimate_quality_seed{seed}", f <= frac, f, frac,
                          f"{len(bad)} iterations"))
    return out


def _ledger_check(suite, name, rep) -> Check:
    adv, rec = rep.info["advertised_queries"], rep.ledger["total"]
    return _check(suite, f"ledger_{name}", adv == rec, rec - adv, 0, f"recorded={rec} closed-form={adv}")


def solver_ledgers(K=15, seed=0) -> list:
    det = sample_cubic_reg(10, seed)
    sto = sample_cubic_reg_stochastic(5, seed, n=32)
    x_det, x_sto = np.zeros(10), np.zeros(5)
    out = []
    runs = [
        ("zo-gd-ncf", zo_gd_ncf, det, x_det, {}),
        ("zo-gd-ncf-II", zo_gd_ncf, det, x_det, {"option": "II"}),
        ("zo-gd-ncf-greedy", zo_gd_ncf, det, x_det, {"greedy_sign": True}),
        ("zo-sgd-ncf", zo_sgd_ncf, sto, x_sto, {"batch": 8, "verify_batch": 16}),
        ("zo-scsg-ncf", zo_scsg_ncf, sto, x_sto, {"B": 16, "b": 4, "verify_batch": 16}),
        ("zo-scsg-ncf-II", zo_scsg_ncf, sto, x_sto, {"option": "II", "B": 16, "b": 4, "verify_batch": 16}),
        ("zo-spider-ncf", zo_spider_ncf, sto, x_sto, {"s1": 16, "s2": 4, "mini_epoch": 5}),
        ("zo-spider-coord", zo_spider_coord, sto, x_sto, {"s1": 16, "s2": 4}),
    ]
    for name, fn, prob, x0, kw in runs:
        params = SolverParams(epsilon=1e-2, K=K, **kw)
        out.append(_ledger_check("solvers", name, fn(prob.fresh(), x0, params, np.random.default_rng(seed))))
    return out


# ---------------------------------------------------------------------------
# baselines


def baseline_ledgers(K=10, seed=0) -> list:
    prob = make_octopus(5)
    fs = sample_cubic_reg_stochastic(4, seed, n=8)
    out = []
    for name, fn, p in (("zpsgd", zpsgd_run, prob), ("pagd", pagd_run, prob), ("rspi", rspi_run, prob),
                        ("rspi-finite-sum", rspi_run, fs)):
        params = BaselineParams(epsilon=1e-4, K=K, T_dfpi=5, terminate_on_failed_escape=False)
        x0 = np.zeros(p.dim)
        out.append(_ledger_check("baselines", name, fn(p.fresh(), x0, params, np.random.default_rng(seed))))
    return out


def rspi_monotone(seeds=3, K=40) -> Check:
    worst = -math.inf
    for s in range(seeds):
        rep = rspi_run(make_octopus(5), np.zeros(5), BaselineParams(epsilon=1e-4, K=K), np.random.default_rng(s))
        f = np.array([pt.f for pt in rep.trajectory])
        worst = max(worst, float(np.max(np.diff(f))) if len(f) > 1 else 0.0)
    return _check("baselines", "rspi_monotone", worst <= 0, worst, 0)


def dfpi_convergence(seeds=40, d=20, T=200, angle=1e-2, rate=0.95, gap=0.2) -> Check:
    """DFPI converges to the dominant eigenvector of ``I - H/ell`` on quadratics with a spectral gap."""
    hits = 0
    for s in range(seeds):
        rng = np.random.default_rng(5000 + s)
        Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
        ev = rng.uniform(-0.5, 1.0, d)
        ev[0] = -1.0
        ev[1:] = np.clip(ev[1:], -1.0 + 2 * gap, 1.0 - 2 * gap)
        H = Q @ np.diag(ev) @ Q.T
        prob = make_quadratic(H, ell=1.0)
        s_hat = dfpi(prob, rng.standard_normal(d), BaselineParams(epsilon=1e-4, T_dfpi=T), rng)
        cos = min(1.0, abs(float(s_hat @ Q[:, 0])))
        hits += math.acos(cos) <= angle
    r = hits / seeds
    return _check("baselines", "dfpi_convergence", r >= rate, r, rate)


# ---------------------------------------------------------------------------


def run_suite(suite: str = "all", *, mu_scale: float = 1.0) -> list:
    if suite not in SUITES + ("all",):
        raise ValueError(f"unknown suite {suite!r}; expected one of {SUITES + ('all',)}")
    todo = SUITES if suite == "all" else (suite,)
    checks: list = []
    if "estimators" in todo:
        checks += estimator_bounds(dims=(1, 5, 20), points=10, mu_scale=mu_scale)
        checks.append(quadratic_exactness(instances=20))
    if "ncf" in todo:
        checks += ncf_checks()
        checks.append(chebyshev_equivalence(instances=5))
    if "solvers" in todo:
        checks.append(nc_step_decrease(steps=500))
        checks.append(scsg_epoch_mean())
        checks += solver_ledgers()
    if "baselines" in todo:
        checks += baseline_ledgers()
        checks.append(rspi_monotone())
        checks.append(dfpi_convergence(seeds=20))
    return checks


def report_json(checks: list, path: Optional[str] = None) -> str:
    # the report carries exactly these fields; details stay in the printed lines
    text = json.dumps([{k: v for k, v in asdict(c).items() if k != "detail"} for c in checks], indent=2)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    return text
