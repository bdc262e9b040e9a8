"""Second-order stationary point solvers built on zeroth-order NCF.

Every solver alternates first-order progress with a negative-curvature check:

* :func:`zo_gd_ncf` - deterministic gradient descent + Chebyshev NCF;
* :func:`zo_sgd_ncf` - minibatch SGD + online NCF;
* :func:`zo_scsg_ncf` - SCSG epochs with geometric length + online NCF;
* :func:`zo_spider_ncf` / :func:`zo_spider_coord` - SPIDER tracking with
  normalized steps (the former interleaves NCF mini-steps).

Solvers return a :class:`SolverReport` whose trajectory records the
unmetered objective after each atomic operation, indexed by the number of
metered queries spent so far.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field, fields, replace
from typing import Callable, Optional

import numpy as np

from .estimators import (Verdict, coord_grad_central, rand_grad_central, sample_batch,
                         unit_sphere, verify_gradient_norm)
from .ncf import RHO_FLOOR, Bottom, Direction, NcfOutcome, NcfParams, ncf_deterministic, ncf_online
from .oracle import BlackBoxProblem

EVENTS = ("start", "descent", "ncf_call", "nc_step", "verify")


class Termination(enum.Enum):
    SOSP_CERTIFIED = "SOSPCertified"
    FOSP_CERTIFIED = "FOSPCertified"
    ITERATION_CAP = "IterationCapReached"
    BUDGET_EXHAUSTED = "QueryBudgetExhausted"


@dataclass
class TrajectoryPoint:
    queries: int
    f: float
    event: str
    ms: float = 0.0


@dataclass
class SolverReport:
    algorithm: str
    x: np.ndarray
    termination: Termination
    trajectory: list
    ledger: dict
    iterations: int = 0
    info: dict = field(default_factory=dict)

    @property
    def query_total(self) -> int:
        return self.ledger["total"]

    @property
    def final_f(self) -> float:
        return self.trajectory[-1].f


@dataclass(frozen=True)
class SolverParams:
    """Hyperparameters for every solver; ``None`` means "derive from the preset".

    ``preset="theory"`` derives unset values from the closed-form complexity
    bounds (unit constants inside Theta/O).  ``preset="practical"`` uses the
    experiment-table defaults listed in each solver's resolver.
    """

    epsilon: float
    delta: Optional[float] = None
    p: float = 0.01
    option: str = "I"
    preset: str = "practical"
    eta: Optional[float] = None
    K: Optional[int] = None
    budget: Optional[int] = None
    mu1: Optional[float] = None
    mu2: Optional[float] = None
    batch: Optional[int] = None
    verify_batch: Optional[int] = None
    B: Optional[int] = None
    b: Optional[int] = None
    s1: Optional[int] = None
    s2: Optional[int] = None
    q: Optional[int] = None
    n0: float = 1.0
    eps_tilde: Optional[float] = None
    mini_epoch: Optional[int] = None
    J: Optional[int] = None
    scsg_c: float = 1.0
    greedy_sign: bool = False
    record_clock: bool = True
    ncf: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.option not in ("I", "II"):
            raise ValueError(f"option must be 'I' or 'II', got {self.option!r}")
        if self.preset not in ("theory", "practical"):
            raise ValueError(f"unknown preset {self.preset!r}")
        if not 0 < self.p <= 1:
            raise ValueError("p must lie in (0, 1]")

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]

    def resolved_delta(self, rho: float) -> float:
        return self.delta if self.delta is not None else math.sqrt(max(rho, RHO_FLOOR) * self.epsilon)

    def ncf_params(self, delta: float, p: float) -> NcfParams:
        kw = {"preset": self.preset, **self.ncf}
        return NcfParams(delta=delta, p=p, **kw)


DEFAULT_K = 10_000


class _BudgetExhausted(Exception):
    pass


class Recorder:
    """Collects trajectory points and enforces the query budget.

    Queries are counted relative to the ledger total at construction so a
    problem instance can be reused.  Points with no new queries replace the
    previous point, which keeps ``queries`` strictly increasing.
    """

    def __init__(self, problem: BlackBoxProblem, budget: Optional[int], clock: bool = True):
        self.problem = problem
        self.base = problem.ledger.total
        self.budget = budget
        self.clock = clock
        self.t0 = time.perf_counter()
        self.points: list = []
        self.advertised = 0
        self.x = None

    @property
    def spent(self) -> int:
        return self.problem.ledger.total - self.base

    def charge(self, k: int) -> None:
        self.advertised += int(k)

    def log(self, event: str, x) -> None:
        self.x = np.array(x, dtype=float)
        q = self.spent
        ms = (time.perf_counter() - self.t0) * 1e3 if self.clock else 0.0
        pt = TrajectoryPoint(q, self.problem.objective(x), event, round(ms, 3))
        if self.points and self.points[-1].queries == q:
            self.points[-1] = pt
        else:
            self.points.append(pt)
        if self.budget is not None and q >= self.budget:
            raise _BudgetExhausted

    def ledger(self) -> dict:
        snap = self.problem.ledger.snapshot()
        snap["total"] = self.spent
        return snap


def _run(name: str, problem: BlackBoxProblem, x0, params: SolverParams, body) -> SolverReport:
    rec = Recorder(problem, params.budget, params.record_clock)
    info: dict = {}
    state = {"iterations": 0}
    rec.log("start", x0)
    try:
        term = body(rec, info, state)
    except _BudgetExhausted:
        term = Termination.BUDGET_EXHAUSTED
    info["advertised_queries"] = rec.advertised
    return SolverReport(name, rec.x, term, rec.points, rec.ledger(), state["iterations"], info)


def negative_curvature_step(problem: BlackBoxProblem, x, v, delta: float, rho: float,
                            rng: np.random.Generator, greedy: bool = False):
    """Move ``delta / rho`` along ``+-v``; random sign, or the better sign if ``greedy``.

    The greedy variant costs two full-objective evaluations (``2 n`` queries).
    """
    if not rho > 0:
        raise ValueError("negative-curvature step needs rho > 0")
    x = np.asarray(x, dtype=float)
    step = (delta / rho) * np.asarray(v, dtype=float)
    if not greedy:
        return x + step if rng.random() < 0.5 else x - step
    n = problem.n
    with problem.ledger.phase("other"):
        vals = problem.eval_batch(np.tile(np.arange(n), 2), np.repeat(np.stack([x + step, x - step]), n, axis=0))
    fp, fm = vals[:n].mean(), vals[n:].mean()
    return x + step if fp <= fm else x - step


def _ncf_cost(out: NcfOutcome) -> int:
    return int(out.info.get("advertised", out.queries))


def _nc_move(problem, rec, x, out, delta, rho, params, rng):
    x = negative_curvature_step(problem, x, out.v, delta, rho, rng, params.greedy_sign)
    if params.greedy_sign:
        rec.charge(2 * problem.n)
    rec.log("nc_step", x)
    return x


# ---------------------------------------------------------------------------
# ZO-GD-NCF


def resolve_gd(problem: BlackBoxProblem, params: SolverParams) -> dict:
    d, sm, eps = problem.dim, problem.smoothness, params.epsilon
    rho, ell = max(sm.rho, RHO_FLOOR), sm.ell
    delta = params.resolved_delta(sm.rho)
    if params.option == "I":
        eta = 1 / (4 * ell)
        mu2 = math.sqrt(3 * eps / (4 * rho * math.sqrt(d)))
    else:
        eta = 1 / (8 * d * ell)
        mu2 = min(math.sqrt(3 * eps / (4 * rho * d)), eps / (16 * math.sqrt(d) * ell))
    K = params.K
    if K is None:
        K = _theory_K(params, sm, delta, d) if params.preset == "theory" else DEFAULT_K
    return {
        "delta": delta, "rho": rho, "K": K,
        "eta": params.eta if params.eta is not None else eta,
        "mu1": params.mu1 if params.mu1 is not None else math.sqrt(3 * eps / (2 * rho * math.sqrt(d))),
        "mu2": params.mu2 if params.mu2 is not None else mu2,
    }


def _theory_K(params, sm, delta, d):
    if sm.delta_f is None:
        return DEFAULT_K
    rho, eps = max(sm.rho, RHO_FLOOR), params.epsilon
    scale = d if params.option == "II" else 1
    return max(1, int(math.ceil(rho**2 * sm.delta_f / delta**3 + scale * sm.ell * sm.delta_f / eps**2)))


def zo_gd_ncf(problem: BlackBoxProblem, x0, params: SolverParams, rng: np.random.Generator) -> SolverReport:
    """Deterministic descent; certify with :func:`ncf_deterministic` when the gradient is small."""
    r = resolve_gd(problem, params)
    d, n = problem.dim, problem.n
    full = np.arange(n)
    ncfp = params.ncf_params(r["delta"], params.p / r["K"])

    def body(rec, info, state):
        info["resolved"] = r
        x = np.array(x0, dtype=float)
        for t in range(r["K"]):
            state["iterations"] = t + 1
            with problem.ledger.phase("verify"):
                g1 = coord_grad_central(problem, full, x, r["mu1"])
            rec.charge(g1.queries_spent)
            if np.linalg.norm(g1.g) >= 0.75 * params.epsilon:
                with problem.ledger.phase("gradient"):
                    if params.option == "I":
                        g = coord_grad_central(problem, full, x, r["mu2"])
                    else:
                        g = rand_grad_central(problem, full, x, r["mu2"], rng)
                rec.charge(g.queries_spent)
                x = x - r["eta"] * g.g
                rec.log("descent", x)
                continue
            rec.log("verify", x)
            out = ncf_deterministic(problem, x, ncfp, rng)
            rec.charge(_ncf_cost(out))
            if isinstance(out, Bottom):
                rec.log("ncf_call", x)
                return Termination.SOSP_CERTIFIED
            x = _nc_move(problem, rec, x, out, r["delta"], r["rho"], params, rng)
        return Termination.ITERATION_CAP

    return _run("zo-gd-ncf", problem, x0, params, body)


# ---------------------------------------------------------------------------
# ZO-SGD-NCF


def resolve_sgd(problem: BlackBoxProblem, params: SolverParams) -> dict:
    d, sm, eps = problem.dim, problem.smoothness, params.epsilon
    rho, ell, sig = max(sm.rho, RHO_FLOOR), sm.ell, sm.sigma_var
    delta = params.resolved_delta(sm.rho)
    if params.option == "I":
        batch = max(32 * sig**2 / eps**2, 1)
        eta = 1 / (4 * ell)
        mu2 = math.sqrt(3 * eps / (4 * rho * math.sqrt(d)))
    else:
        batch = max(8 * sig**2 / eps**2, 1)
        eta = 1 / (32 * d * ell)
        mu2 = min(math.sqrt(3 * eps / (4 * rho * d)), eps / (32 * math.sqrt(d) * ell))
    K = params.K
    if K is None:
        K = _theory_K(params, sm, delta, d) if params.preset == "theory" else DEFAULT_K
    vb = math.ceil(max(sig**2 / eps**2, 1) * math.log(2 * K / params.p))
    return {
        "delta": delta, "rho": rho, "K": K,
        "eta": params.eta if params.eta is not None else eta,
        "mu1": params.mu1 if params.mu1 is not None else math.sqrt(3 * eps / (2 * rho * math.sqrt(d))),
        "mu2": params.mu2 if params.mu2 is not None else mu2,
        "batch": int(params.batch if params.batch is not None else math.ceil(batch)),
        "verify_batch": int(params.verify_batch if params.verify_batch is not None else vb),
    }


def zo_sgd_ncf(problem: BlackBoxProblem, x0, params: SolverParams, rng: np.random.Generator) -> SolverReport:
    """Minibatch zeroth-order SGD; online NCF with confidence ``p / (2K)`` at small gradients."""
    return _sgd(problem, x0, params, rng, "zo-sgd-ncf")


def _sgd(problem, x0, params, rng, name):
    r = resolve_sgd(problem, params)
    n = problem.n
    ncfp = params.ncf_params(r["delta"], params.p / (2 * r["K"]))

    def body(rec, info, state):
        info["resolved"] = r
        x = np.array(x0, dtype=float)
        for t in range(r["K"]):
            state["iterations"] = t + 1
            with problem.ledger.phase("verify"):
                g1 = coord_grad_central(problem, sample_batch(n, r["verify_batch"], rng), x, r["mu1"])
            rec.charge(g1.queries_spent)
            if np.linalg.norm(g1.g) >= 0.75 * params.epsilon:
                S = sample_batch(n, r["batch"], rng)
                with problem.ledger.phase("gradient"):
                    if params.option == "I":
                        g = coord_grad_central(problem, S, x, r["mu2"])
                    else:
                        g = rand_grad_central(problem, S, x, r["mu2"], rng)
                rec.charge(g.queries_spent)
                x = x - r["eta"] * g.g
                rec.log("descent", x)
                continue
            rec.log("verify", x)
            out = ncf_online(problem, x, ncfp, rng)
            rec.charge(_ncf_cost(out))
            if isinstance(out, Bottom):
                rec.log("ncf_call", x)
                return Termination.SOSP_CERTIFIED
            x = _nc_move(problem, rec, x, out, r["delta"], r["rho"], params, rng)
        return Termination.ITERATION_CAP

    return _run(name, problem, x0, params, body)


# ---------------------------------------------------------------------------
# ZO-SCSG(-NCF)


def resolve_scsg(problem: BlackBoxProblem, params: SolverParams) -> dict:
    d, sm, eps = problem.dim, problem.smoothness, params.epsilon
    rho, ell, sig = max(sm.rho, RHO_FLOOR), sm.ell, sm.sigma_var
    delta = params.resolved_delta(sm.rho)
    opt1 = params.option == "I"
    if params.preset == "theory":
        B = max(480 * sig**2 / eps**2, 1) if opt1 else max(1152 * sig**2 / eps**2, 1)
        core = (eps**2 + sig**2) * eps**4 * rho**6 / (delta**9 * ell**3)
        b = max(1, core) if opt1 else max(1, d * core)
    else:
        B, b = 128, 10
    B = int(math.ceil(params.B if params.B is not None else B))
    b = int(math.ceil(params.b if params.b is not None else b))
    bd = b if opt1 else b / d
    if params.preset == "theory":
        eta = (0.25 if opt1 else 0.125) * (bd / B) ** (2 / 3) / ell
    else:
        eta = 1 / (4 * ell) if opt1 else 1 / (10 * ell)
    K = params.K
    if K is None:
        if params.preset == "theory" and sm.delta_f is not None:
            K = max(1, int(math.ceil(ell * bd ** (1 / 3) * sm.delta_f / (eps**2 * B ** (1 / 3)))))
        else:
            K = DEFAULT_K
    c = params.scsg_c
    mu2 = eps / (4 * math.sqrt(c * d) * ell) if opt1 else eps / (4 * math.sqrt(c) * d * ell)
    vb = math.ceil(max(sig**2 / eps**2, 1) * max(math.log(K), 1.0))
    return {
        "delta": delta, "rho": rho, "K": K, "B": B, "b": b,
        "theta": B / (B + bd),
        "eta": params.eta if params.eta is not None else eta,
        "mu1": params.mu1 if params.mu1 is not None else math.sqrt(3 * eps / (4 * rho * math.sqrt(d))),
        "mu2": params.mu2 if params.mu2 is not None else mu2,
        "verify_batch": int(params.verify_batch if params.verify_batch is not None else vb),
    }


def geometric_epoch_length(theta: float, rng: np.random.Generator) -> int:
    """``N ~ Geom(theta)`` on ``{0, 1, ...}`` with ``P(N = k) = theta^k (1 - theta)``; mean ``theta/(1-theta)``."""
    return int(rng.geometric(1.0 - theta)) - 1


def zo_scsg_epoch(problem: BlackBoxProblem, x_anchor, params: SolverParams, rng: np.random.Generator,
                  *, resolved: Optional[dict] = None, on_step: Optional[Callable] = None):
    """One SCSG epoch; returns ``(x_N, stats)`` with ``stats = {"N", "queries"}``."""
    r = resolved or resolve_scsg(problem, params)
    if r["b"] > r["B"]:
        raise ValueError(f"minibatch b={r['b']} exceeds batch B={r['B']}")
    n, d = problem.n, problem.dim
    x0 = np.array(x_anchor, dtype=float)
    cost = 0
    with problem.ledger.phase("gradient"):
        anchor = coord_grad_central(problem, sample_batch(n, r["B"], rng), x0, r["mu2"])
    cost += anchor.queries_spent
    N = geometric_epoch_length(r["theta"], rng)
    x = x0
    for k in range(N):
        I = sample_batch(n, r["b"], rng)
        with problem.ledger.phase("gradient"):
            if params.option == "I":
                ga = coord_grad_central(problem, I, x, r["mu2"])
                gb = coord_grad_central(problem, I, x0, r["mu2"])
            else:
                u = unit_sphere(d, rng)
                ga = rand_grad_central(problem, I, x, r["mu2"], rng, u=u)
                gb = rand_grad_central(problem, I, x0, r["mu2"], rng, u=u)
        step_cost = ga.queries_spent + gb.queries_spent + (anchor.queries_spent if k == 0 else 0)
        cost += ga.queries_spent + gb.queries_spent
        x = x - r["eta"] * (ga.g - gb.g + anchor.g)
        if on_step is not None:
            on_step(x, step_cost)
    if N == 0 and on_step is not None:
        on_step(x, anchor.queries_spent)
    return x, {"N": N, "queries": cost}


def zo_scsg_ncf(problem: BlackBoxProblem, x0, params: SolverParams, rng: np.random.Generator) -> SolverReport:
    """SCSG epochs while the verified gradient is large; online NCF with confidence ``1/(20K)`` otherwise."""
    r = resolve_scsg(problem, params)
    if r["b"] > r["B"]:
        rep = _sgd(problem, x0, replace(params, p=2 / 3), rng, "zo-scsg-ncf")
        rep.info["delegated"] = "zo-sgd-ncf"
        return rep
    n = problem.n
    ncfp = params.ncf_params(r["delta"], 1.0 / (20 * r["K"]))

    def body(rec, info, state):
        info["resolved"] = r
        info["epochs"] = []
        x = np.array(x0, dtype=float)

        def on_step(xk, c):
            rec.charge(c)
            rec.log("descent", xk)

        for t in range(r["K"]):
            state["iterations"] = t + 1
            with problem.ledger.phase("verify"):
                g1 = coord_grad_central(problem, sample_batch(n, r["verify_batch"], rng), x, r["mu1"])
            rec.charge(g1.queries_spent)
            if np.linalg.norm(g1.g) >= 0.75 * params.epsilon:
                x, stats = zo_scsg_epoch(problem, x, params, rng, resolved=r, on_step=on_step)
                info["epochs"].append(stats["N"])
                continue
            rec.log("verify", x)
            out = ncf_online(problem, x, ncfp, rng)
            rec.charge(_ncf_cost(out))
            if isinstance(out, Bottom):
                rec.log("ncf_call", x)
                return Termination.SOSP_CERTIFIED
            x = _nc_move(problem, rec, x, out, r["delta"], r["rho"], params, rng)
        return Termination.ITERATION_CAP

    return _run("zo-scsg-ncf", problem, x0, params, body)


# ---------------------------------------------------------------------------
# ZO-SPIDER


def resolve_spider(problem: BlackBoxProblem, params: SolverParams, with_ncf: bool) -> dict:
    d, sm, eps = problem.dim, problem.smoothness, params.epsilon
    rho, ell, sig, n0 = max(sm.rho, RHO_FLOOR), sm.ell, sm.sigma_var, params.n0
    delta = params.resolved_delta(sm.rho)
    theory = params.preset == "theory"
    if theory:
        s1 = 16 * sig**2 / eps**2
        s2 = 16 * sig / (eps * n0)
        eta = eps / (ell * n0)
        q = sig * n0 / eps
    else:
        s1, s2, eta = 128, 10, 1 / (15 * ell)
        q = None
    s1 = int(math.ceil(params.s1 if params.s1 is not None else s1))
    s2 = int(math.floor(params.s2 if params.s2 is not None else s2))
    if s2 < 1:
        raise ValueError("|S2| rounds to 0; choose a smaller n0")
    eta = params.eta if params.eta is not None else eta
    if params.q is not None:
        q = params.q
    elif q is None:
        q = s1 / s2
    q = max(1, int(math.ceil(q)))
    if with_ncf:
        mini = params.mini_epoch
        if mini is None:
            mini = delta * ell * n0 / (rho * eps) if theory else delta / (rho * eta)
        mini = max(1, int(math.ceil(mini)))
        J = params.J
        if J is None:
            if theory and sm.delta_f is not None:
                J = 8 * (int(math.floor(max(12 * rho**2 * sm.delta_f / delta**3,
                                            4 * rho * sm.delta_f / (delta * eps)))) + 1)
            else:
                J = max(1, int(math.ceil((params.K or DEFAULT_K) / mini)))
        K0 = J * mini
    else:
        mini, J = None, None
        K0 = params.K
        if K0 is None:
            K0 = int(math.floor(4 * ell * n0 / eps**2)) + 2 if theory else DEFAULT_K
    if params.eps_tilde is not None:
        et = params.eps_tilde
    else:
        # same log factors in both presets
        et = 10 * eps * (math.log(128 * (K0 + 1)) if with_ncf else math.log(4 * (K0 + 1) / params.p))
    mu = params.mu2 if params.mu2 is not None else (eps * et / (8 * q**2 * rho**2 * d)) ** 0.25
    return {"delta": delta, "rho": rho, "s1": s1, "s2": s2, "eta": eta, "q": q, "mu": mu,
            "eps_tilde": et, "mini_epoch": mini, "J": J, "K0": K0}


class _Spider:
    """SPIDER gradient tracker: refresh on ``S1`` every ``q`` steps, path-integrate on ``S2`` otherwise."""

    def __init__(self, problem, r, rng, rec, monitor=None):
        self.problem, self.r, self.rng, self.rec, self.monitor = problem, r, rng, rec, monitor
        self.k = 0
        self.v = None
        self.x_prev = None
        self.refreshes = []

    def update(self, x):
        p, r, n = self.problem, self.r, self.problem.n
        with p.ledger.phase("gradient"):
            if self.k % r["q"] == 0:
                est = coord_grad_central(p, sample_batch(n, r["s1"], self.rng), x, r["mu"])
                self.v = est.g
                cost = est.queries_spent
                self.refreshes.append(self.k)
            else:
                S2 = sample_batch(n, r["s2"], self.rng, replace=True)
                a = coord_grad_central(p, S2, x, r["mu"])
                b = coord_grad_central(p, S2, self.x_prev, r["mu"])
                self.v = a.g - b.g + self.v
                cost = a.queries_spent + b.queries_spent
        self.rec.charge(cost)
        if self.monitor is not None:
            self.monitor(self.k, x, self.v)
        return self.v

    def advance(self, x_old):
        self.x_prev = x_old
        self.k += 1


def zo_spider_coord(problem: BlackBoxProblem, x0, params: SolverParams, rng: np.random.Generator,
                    monitor: Optional[Callable] = None) -> SolverReport:
    """SPIDER with normalized steps; stops once the tracked gradient norm is at most ``2 eps_tilde``.

    ``monitor(k, x_k, v_k)`` is called after every estimate update.
    """
    r = resolve_spider(problem, params, with_ncf=False)

    def body(rec, info, state):
        info["resolved"] = r
        sp = _Spider(problem, r, rng, rec, monitor)
        info["refreshes"] = sp.refreshes
        x = np.array(x0, dtype=float)
        for k in range(r["K0"] + 1):
            state["iterations"] = k + 1
            v = sp.update(x)
            nv = float(np.linalg.norm(v))
            if nv <= 2 * r["eps_tilde"]:
                rec.log("verify", x)
                return Termination.FOSP_CERTIFIED
            sp.advance(x)
            x = x - r["eta"] * v / nv
            rec.log("descent", x)
        return Termination.ITERATION_CAP

    return _run("zo-spider-coord", problem, x0, params, body)


def zo_spider_ncf(problem: BlackBoxProblem, x0, params: SolverParams, rng: np.random.Generator,
                  monitor: Optional[Callable] = None) -> SolverReport:
    """SPIDER descent interleaved with online NCF; negative curvature is followed in ``eta`` mini-steps.

    The SPIDER estimate keeps being updated during mini-steps even though it
    does not drive them, so the tracker stays continuous across branches.
    """
    r = resolve_spider(problem, params, with_ncf=True)
    ncfp = params.ncf_params(r["delta"], 1.0 / (16 * r["J"]))

    def body(rec, info, state):
        info["resolved"] = r
        sp = _Spider(problem, r, rng, rec, monitor)
        info["refreshes"] = sp.refreshes
        x = np.array(x0, dtype=float)
        for j in range(r["J"] + 1):
            state["iterations"] = j + 1
            w1 = ncf_online(problem, x, ncfp, rng)
            rec.charge(_ncf_cost(w1))
            rec.log("ncf_call", x)
            w2 = None
            if isinstance(w1, Direction):
                w2 = (1.0 if rng.random() < 0.5 else -1.0) * r["eta"] * w1.v
            for _ in range(r["mini_epoch"]):
                v = sp.update(x)
                if w2 is not None:
                    sp.advance(x)
                    x = x - w2
                    rec.log("nc_step", x)
                    continue
                nv = float(np.linalg.norm(v))
                if nv <= 2 * r["eps_tilde"]:
                    rec.log("verify", x)
                    return Termination.SOSP_CERTIFIED
                sp.advance(x)
                x = x - r["eta"] * v / nv
                rec.log("descent", x)
        return Termination.ITERATION_CAP

    return _run("zo-spider-ncf", problem, x0, params, body)


SOLVERS = {
    "zo-gd-ncf": zo_gd_ncf,
    "zo-sgd-ncf": zo_sgd_ncf,
    "zo-scsg-ncf": zo_scsg_ncf,
    "zo-spider-ncf": zo_spider_ncf,
    "zo-spider-coord": zo_spider_coord,
}
