"""Black-box finite-sum objectives with exact function-query accounting.

Every solver in this package sees an objective only through
:meth:`BlackBoxProblem.eval` / :meth:`BlackBoxProblem.eval_batch`, and every
single-component evaluation made through those entry points increments the
problem's :class:`QueryLedger` by one.  Analytic gradients and Hessians are
attached as test-only hooks and are never consumed by the algorithms.
"""

from __future__ import annotations

import contextlib
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator, Optional

import numpy as np

PHASES = ("gradient", "ncf", "verify", "other")

BatchFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


class ProblemError(ValueError):
    """Invalid problem construction parameters."""


class LibsvmParseError(ValueError):
    """Malformed LIBSVM input; the message carries the 1-based line number."""


@dataclass(frozen=True)
class SmoothnessProfile:
    ell: float
    rho: float
    sigma_var: float = 0.0
    delta_f: Optional[float] = None

    def __post_init__(self):
        if not self.ell > 0:
            raise ProblemError(f"ell must be positive, got {self.ell}")
        if self.rho < 0 or self.sigma_var < 0:
            raise ProblemError("rho and sigma_var must be nonnegative")


class QueryLedger:
    """Thread-safe counter of single-component function evaluations.

    Counts are split by phase; ``total`` is always the sum of the phase
    counters.  The active phase is tracked per thread so concurrent callers
    sharing one ledger do not clobber each other's attribution.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._counts = dict.fromkeys(PHASES, 0)
        self._local = threading.local()

    @property
    def total(self) -> int:
        with self._lock:
            return sum(self._counts.values())

    @property
    def current_phase(self) -> str:
        return getattr(self._local, "phase", "other")

    def add(self, k: int = 1) -> None:
        if k < 0:
            raise ValueError("ledger is monotone")
        with self._lock:
            self._counts[self.current_phase] += int(k)

    @contextlib.contextmanager
    def phase(self, name: str) -> Iterator[None]:
        if name not in PHASES:
            raise ValueError(f"unknown phase {name!r}")
        prev = self.current_phase
        self._local.phase = name
        try:
            yield
        finally:
            self._local.phase = prev

    def snapshot(self) -> dict:
        with self._lock:
            snap = dict(self._counts)
        snap["total"] = sum(snap[p] for p in PHASES)
        return snap


class BlackBoxProblem:
    """Finite-sum objective ``f = (1/n) sum_i f_i`` exposing component queries only.

    ``batch_fn(idx, X)`` evaluates ``f_{idx[k]}(X[k])`` for every row and must
    be deterministic.  ``n == 1`` denotes a deterministic problem.
    """

    def __init__(
        self,
        name: str,
        dim: int,
        n_components: int,
        batch_fn: BatchFn,
        smoothness: SmoothnessProfile,
        *,
        gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        hessian: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        component_gradients: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        meta: Optional[dict] = None,
    ):
        if dim < 1 or n_components < 1:
            raise ProblemError("dimension and component count must be positive")
        self.name = name
        self.dim = int(dim)
        self.n = int(n_components)
        self._batch_fn = batch_fn
        self.smoothness = smoothness
        self.gradient = gradient
        self.hessian = hessian
        self.component_gradients = component_gradients
        self.meta = dict(meta or {})
        self.ledger = QueryLedger()

    def __repr__(self):
        return f"BlackBoxProblem({self.name!r}, d={self.dim}, n={self.n})"

    # metered access -------------------------------------------------------
    def eval(self, i: int, x) -> float:
        x = np.asarray(x, dtype=float).reshape(1, self.dim)
        return float(self.eval_batch(np.array([i]), x)[0])

    def eval_batch(self, idx, X) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64).ravel()
        X = np.asarray(X, dtype=float).reshape(len(idx), self.dim)
        if len(idx) and (idx.min() < 0 or idx.max() >= self.n):
            raise IndexError("component index out of range")
        self.ledger.add(len(idx))
        return np.asarray(self._batch_fn(idx, X), dtype=float)

    # unmetered oracle access ----------------------------------------------
    def objective(self, x) -> float:
        """Full objective value, NOT charged to the ledger (reporting only)."""
        x = np.asarray(x, dtype=float)
        full = self.meta.get("full_batch_fn")
        if full is not None and self.n > 1:
            return float(full(np.zeros(1, dtype=np.int64), x.reshape(1, self.dim))[0])
        idx = np.arange(self.n)
        return float(np.mean(self._batch_fn(idx, np.broadcast_to(x, (self.n, self.dim)))))

    def objective_many(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.array([self.objective(x) for x in X])

    # derived problems -----------------------------------------------------
    def fresh(self) -> "BlackBoxProblem":
        """Same objective with a new, zeroed ledger."""
        return BlackBoxProblem(
            self.name, self.dim, self.n, self._batch_fn, self.smoothness,
            gradient=self.gradient, hessian=self.hessian,
            component_gradients=self.component_gradients, meta=self.meta,
        )

    def collapsed(self) -> "BlackBoxProblem":
        """Deterministic view: one query evaluates the full mean objective."""
        if self.n == 1:
            return self.fresh()
        n, d, fn = self.n, self.dim, self._batch_fn

        def full(idx, X):
            rows = np.repeat(X, n, axis=0)
            comps = np.tile(np.arange(n), len(X))
            return fn(comps, rows).reshape(len(X), n).mean(axis=1)

        fast = self.meta.get("full_batch_fn")
        return BlackBoxProblem(
            self.name + "-det", d, 1, fast or full, self.smoothness,
            gradient=self.gradient, hessian=self.hessian, meta=self.meta,
        )

    def with_smoothness(self, **kw) -> "BlackBoxProblem":
        prof = SmoothnessProfile(**{**self.smoothness.__dict__, **kw})
        p = self.fresh()
        p.smoothness = prof
        return p

    def lambda_min(self, x) -> float:
        """Test-only: smallest Hessian eigenvalue via the analytic hook."""
        if self.hessian is None:
            raise NotImplementedError(f"{self.name} has no Hessian hook")
        return float(np.linalg.eigvalsh(self.hessian(np.asarray(x, dtype=float)))[0])


# ---------------------------------------------------------------------------
# octopus


class _OctopusPieces:
    """Scalar building blocks of the octopus construction of Du et al. (2017).

    ``phi`` is the per-coordinate profile once a coordinate is "active":
    ``-gamma b^2`` on [0, tau], the quartic ``g1`` on [tau, 2 tau], and the
    well ``L (b - 4 tau)^2 - nu`` beyond.  ``w`` is the quintic switch that
    turns the next coordinate from ``L x^2`` into ``phi``; it equals
    ``(L - g2) / (L + gamma)`` with the published ``g2``.
    """

    def __init__(self, tau, L, gamma):
        self.tau, self.L, self.gamma = tau, L, gamma
        self.nu = -self.g1(2 * tau)[0] + 4 * L * tau**2

    def g1(self, x):
        t, L, g = self.tau, self.L, self.gamma
        s = x - t
        a3 = (-14 * L + 10 * g) / (3 * t)
        a4 = (5 * L - 3 * g) / (2 * t**2)
        val = -g * x**2 + a3 * s**3 + a4 * s**4
        d1 = -2 * g * x + 3 * a3 * s**2 + 4 * a4 * s**3
        d2 = -2 * g + 6 * a3 * s + 12 * a4 * s**2
        return val, d1, d2

    def g2(self, x):
        t, c = self.tau, self.L + self.gamma
        s = x - 2 * t
        val = -self.gamma - 10 * c / t**3 * s**3 - 15 * c / t**4 * s**4 - 6 * c / t**5 * s**5
        d1 = -30 * c / t**3 * s**2 - 60 * c / t**4 * s**3 - 30 * c / t**5 * s**4
        d2 = -60 * c / t**3 * s - 180 * c / t**4 * s**2 - 120 * c / t**5 * s**3
        return val, d1, d2

    def phi(self, x):
        """Even extension phi(|x|) with first/second derivatives in x."""
        t, L, g = self.tau, self.L, self.gamma
        b = np.abs(x)
        sg = np.sign(x)
        v1, d1_1, d2_1 = -g * b**2, -2 * g * b, np.full_like(b, -2 * g)
        v2, d1_2, d2_2 = self.g1(b)
        v3, d1_3, d2_3 = L * (b - 4 * t) ** 2 - self.nu, 2 * L * (b - 4 * t), np.full_like(b, 2 * L)
        lo, hi = b <= t, b >= 2 * t
        val = np.where(lo, v1, np.where(hi, v3, v2))
        d1 = np.where(lo, d1_1, np.where(hi, d1_3, d1_2)) * sg
        d2 = np.where(lo, d2_1, np.where(hi, d2_3, d2_2))
        return val, d1, d2

    def switch(self, x):
        t, c = self.tau, self.L + self.gamma
        a = np.abs(x)
        sg = np.sign(x)
        gv, gd1, gd2 = self.g2(a)
        mid = (a > t) & (a < 2 * t)
        val = np.where(a <= t, 0.0, np.where(a >= 2 * t, 1.0, (self.L - gv) / c))
        d1 = np.where(mid, -gd1 / c, 0.0) * sg
        d2 = np.where(mid, -gd2 / c, 0.0)
        return val, d1, d2


def make_octopus(d: int, tau: float = math.e, L: float = math.e, gamma: float = 1.0,
                 rho: Optional[float] = None) -> BlackBoxProblem:
    """Octopus function with ``2^d`` local minima at ``(+-4 tau, ..., +-4 tau)``.

    Coordinates are unlocked in order: coordinate ``j`` is a stable ``L x_j^2``
    bowl until ``|x_{j-1}|`` passes ``tau`` and becomes the unstable/well
    profile once ``|x_{j-1}| >= 2 tau``.  Inside the region visited by descent
    from the origin this coincides with the piecewise construction of Du et
    al.; elsewhere it is a C^2 blend of the same pieces.
    """
    if d < 2:
        raise ProblemError("octopus needs d >= 2")
    if min(tau, L, gamma) <= 0:
        raise ProblemError("tau, L, gamma must be positive")
    pc = _OctopusPieces(tau, L, gamma)

    def batch(idx, X):
        ph, _, _ = pc.phi(X)
        w, _, _ = pc.switch(X[:, :-1])
        tail = w * ph[:, 1:] + (1.0 - w) * L * X[:, 1:] ** 2
        return ph[:, 0] + tail.sum(axis=1)

    def grad(x):
        x = np.asarray(x, dtype=float)
        ph, ph1, _ = pc.phi(x)
        w, w1, _ = pc.switch(x[:-1])
        g = np.zeros(d)
        g[0] = ph1[0]
        g[1:] += w * ph1[1:] + (1.0 - w) * 2 * L * x[1:]
        g[:-1] += w1 * (ph[1:] - L * x[1:] ** 2)
        return g

    def hess(x):
        x = np.asarray(x, dtype=float)
        ph, ph1, ph2 = pc.phi(x)
        w, w1, w2 = pc.switch(x[:-1])
        diag = np.zeros(d)
        diag[0] = ph2[0]
        diag[1:] += w * ph2[1:] + (1.0 - w) * 2 * L
        diag[:-1] += w2 * (ph[1:] - L * x[1:] ** 2)
        off = w1 * (ph1[1:] - 2 * L * x[1:])
        return np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)

    # curvature at every critical point is in {-2 gamma, 2 L}
    prof = SmoothnessProfile(ell=2 * max(L, gamma), rho=L if rho is None else rho,
                             delta_f=d * pc.nu)
    return BlackBoxProblem(
        f"octopus-d{d}", d, 1, batch, prof, gradient=grad, hessian=hess,
        meta={"tau": tau, "L": L, "gamma": gamma, "nu": pc.nu, "f_min": -d * pc.nu},
    )


# ---------------------------------------------------------------------------
# cubic regularization


def _cubic_parts(A, b, alpha):
    def grad(w):
        w = np.asarray(w, dtype=float)
        return A @ w + b + alpha * np.linalg.norm(w) * w

    def hess(w):
        w = np.asarray(w, dtype=float)
        nw = np.linalg.norm(w)
        H = A + alpha * nw * np.eye(len(w))
        if nw > 0:
            H = H + alpha * np.outer(w, w) / nw
        return H

    return grad, hess


def make_cubic_reg(A, b, alpha: float, *, ell: float = 100.0, rho: float = 1.0) -> BlackBoxProblem:
    """Deterministic ``f(w) = w'Aw/2 + b'w + (alpha/3)||w||^3``."""
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or b.shape != (A.shape[0],):
        raise ProblemError("A must be square and match b")
    if np.max(np.abs(A - A.T), initial=0.0) > 1e-12:
        raise ProblemError("A must be symmetric")
    if alpha < 0:
        raise ProblemError("alpha must be nonnegative")
    d = len(b)

    def batch(idx, X):
        return 0.5 * ((X @ A) * X).sum(axis=1) + X @ b + alpha / 3 * np.linalg.norm(X, axis=1) ** 3

    grad, hess = _cubic_parts(A, b, alpha)
    return BlackBoxProblem(
        f"cubic-det-d{d}", d, 1, batch, SmoothnessProfile(ell=ell, rho=rho),
        gradient=grad, hessian=hess, meta={"A": A, "b": b, "alpha": alpha},
    )


def cubic_diagonal(d: int, rng: np.random.Generator) -> np.ndarray:
    """Diagonal with 10% of entries equal to -1 and the rest uniform in [1, 2]."""
    diag = rng.uniform(1.0, 2.0, size=d)
    k = max(1, int(round(0.1 * d)))
    diag[rng.choice(d, size=k, replace=False)] = -1.0
    return diag


def sample_cubic_reg(d: int, seed: int, alpha: float = 0.5, **kw) -> BlackBoxProblem:
    rng = np.random.default_rng(seed)
    return make_cubic_reg(np.diag(cubic_diagonal(d, rng)), np.zeros(d), alpha, **kw)


def sample_cubic_reg_stochastic(d: int, seed: int, alpha: float = 0.5, n: int = 256, *,
                                ell: float = 100.0, rho: float = 1.0,
                                radius: Optional[float] = None) -> BlackBoxProblem:
    """Finite-sum cubic regularization with per-component diagonal/linear noise.

    ``f_i(w) = w'(A' + diag xi_i)w/2 + xi'_i w + (alpha/3)||w||^3`` with
    ``xi_i ~ U[-0.1, 0.1]^d`` and ``xi'_i ~ U[-1, 1]^d``; the mean over the
    ``n`` components is a deterministic cubic problem with
    ``A = A' + diag(mean xi)`` and ``b = mean xi'``.  ``sigma_var`` bounds the
    component-gradient deviation on the ball of the given radius.
    """
    if d < 1 or n < 1:
        raise ProblemError("d and n must be positive")
    if alpha < 0:
        raise ProblemError("alpha must be nonnegative")
    rng = np.random.default_rng(seed)
    base = cubic_diagonal(d, rng)
    xi = rng.uniform(-0.1, 0.1, size=(n, d))
    xi_lin = rng.uniform(-1.0, 1.0, size=(n, d))
    diag_mean = base + xi.mean(axis=0)
    b_mean = xi_lin.mean(axis=0)
    A = np.diag(diag_mean)

    half_diag = 0.5 * (base + xi)
    ones = np.ones(d)

    def batch(idx, X):
        # row sums via matvec; much faster than reductions over a short axis
        X2 = X * X
        sq = X2 @ ones
        return (half_diag[idx] * X2) @ ones + (xi_lin[idx] * X) @ ones + alpha / 3 * sq * np.sqrt(sq)

    def full(idx, X):
        return (0.5 * (diag_mean * X**2).sum(axis=1) + X @ b_mean
                + alpha / 3 * np.linalg.norm(X, axis=1) ** 3)

    def comp_grads(w):
        w = np.asarray(w, dtype=float)
        return (base + xi) * w + xi_lin + alpha * np.linalg.norm(w) * w

    R = 4.0 / alpha if radius is None else radius
    dev = R * np.abs(xi - xi.mean(axis=0)).max(axis=1) + np.linalg.norm(xi_lin - b_mean, axis=1)
    grad, hess = _cubic_parts(A, b_mean, alpha)
    prof = SmoothnessProfile(ell=ell, rho=rho, sigma_var=float(np.sqrt(np.mean(dev**2))))
    return BlackBoxProblem(
        f"cubic-stoch-d{d}", d, n, batch, prof, gradient=grad, hessian=hess,
        component_gradients=comp_grads,
        meta={"A": A, "b": b_mean, "alpha": alpha, "sigma_max": float(dev.max()),
              "radius": R, "full_batch_fn": full},
    )


# ---------------------------------------------------------------------------
# regularized nonlinear least squares


@dataclass
class LibsvmDataset:
    X: np.ndarray
    y: np.ndarray

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def parse_libsvm(path, n_features: Optional[int] = None) -> LibsvmDataset:
    """Read ``label idx:val ...`` lines; labels -1/+1 map to 0/1, indices are 1-based."""
    rows, labels = [], []
    with open(Path(path)) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tok = line.split()
            try:
                lab = float(tok[0])
            except ValueError:
                raise LibsvmParseError(f"line {lineno}: bad label {tok[0]!r}") from None
            if lab in (-1.0, 0.0):
                labels.append(0.0)
            elif lab == 1.0:
                labels.append(1.0)
            else:
                raise LibsvmParseError(f"line {lineno}: label {tok[0]!r} not in {{-1, 0, +1}}")
            feats, last = {}, 0
            for t in tok[1:]:
                k, sep, v = t.partition(":")
                try:
                    j, val = int(k), float(v)
                except ValueError:
                    raise LibsvmParseError(f"line {lineno}: malformed feature {t!r}") from None
                if not sep or j < 1:
                    raise LibsvmParseError(f"line {lineno}: malformed feature {t!r}")
                if j <= last:
                    raise LibsvmParseError(f"line {lineno}: feature indices must increase")
                feats[j - 1] = val
                last = j
            rows.append(feats)
    if not rows:
        raise LibsvmParseError(f"{path}: no data rows")
    d = max((max(r) + 1 for r in rows if r), default=0)
    if n_features is not None:
        if n_features < d:
            raise LibsvmParseError(f"{path}: feature index {d} exceeds n_features={n_features}")
        d = n_features
    X = np.zeros((len(rows), d))
    for i, r in enumerate(rows):
        for j, v in r.items():
            X[i, j] = v
    return LibsvmDataset(X, np.array(labels))


def _sigmoid(s):
    return 0.5 * (1.0 + np.tanh(0.5 * s))


def make_reg_nls(data: LibsvmDataset, lam: float = 1.0, alpha: float = 1.0, *,
                 ell: float = 100.0, rho: float = 1.0) -> BlackBoxProblem:
    """``f_i(w) = (y_i - sigmoid(w'x_i))^2 + sum_j lam w_j^2 / (1 + alpha w_j^2)``.

    The regularizer sits inside every component so single-component queries
    see the regularized objective and the component mean equals the full
    objective.
    """
    if data.n == 0:
        raise ProblemError("empty dataset")
    if lam < 0 or alpha < 0:
        raise ProblemError("lambda and alpha must be nonnegative")
    Xd, y = data.X, data.y
    d = data.d

    def reg(W):
        return (lam * W**2 / (1 + alpha * W**2)).sum(axis=1)

    def batch(idx, W):
        s = _sigmoid((Xd[idx] * W).sum(axis=1))
        return (y[idx] - s) ** 2 + reg(W)

    def full(idx, W):
        s = _sigmoid(W @ Xd.T)
        return ((y - s) ** 2).mean(axis=1) + reg(W)

    def grad(w):
        s = _sigmoid(Xd @ w)
        coef = -2 * (y - s) * s * (1 - s)
        return Xd.T @ coef / data.n + 2 * lam * w / (1 + alpha * w**2) ** 2

    def hess(w):
        s = _sigmoid(Xd @ w)
        ds = s * (1 - s)
        coef = 2 * ds**2 - 2 * (y - s) * ds * (1 - 2 * s)
        H = (Xd * coef[:, None]).T @ Xd / data.n
        return H + np.diag(2 * lam * (1 - 3 * alpha * w**2) / (1 + alpha * w**2) ** 3)

    return BlackBoxProblem(
        f"reg-nls-n{data.n}", d, data.n, batch, SmoothnessProfile(ell=ell, rho=rho),
        gradient=grad, hessian=hess, meta={"lambda": lam, "alpha": alpha, "full_batch_fn": full},
    )


# ---------------------------------------------------------------------------
# synthetic instances used by the test suites


def make_quadratic(H, g=None, *, components=None, ell: Optional[float] = None,
                   rho: float = 0.0) -> BlackBoxProblem:
    """``f(x) = x'Hx/2 + g'x``; optional ``components`` are per-component Hessians."""
    H = np.array(H, dtype=float)
    d = H.shape[0]
    g = np.zeros(d) if g is None else np.array(g, dtype=float)
    Hs = np.array([H]) if components is None else np.array(components, dtype=float)
    n = len(Hs)
    H_mean = Hs.mean(axis=0)

    def batch(idx, X):
        if n == 1:
            return full(idx, X)
        return 0.5 * np.einsum("ij,ijk,ik->i", X, Hs[idx], X) + X @ g

    def full(idx, X):
        return 0.5 * ((X @ H_mean) * X).sum(axis=1) + X @ g

    ell = float(np.abs(np.linalg.eigvalsh(H_mean)).max()) if ell is None else ell
    return BlackBoxProblem(
        f"quadratic-d{d}", d, n, batch, SmoothnessProfile(ell=max(ell, 1e-12), rho=rho),
        gradient=lambda x: H_mean @ np.asarray(x, float) + g, hessian=lambda x: H_mean.copy(),
        meta={"H": H_mean, "full_batch_fn": full},
    )


def make_sum_cubes(d: int) -> BlackBoxProblem:
    """``f(x) = sum_j x_j^3``; Hessian Lipschitz with rho = 6 exactly."""

    def batch(idx, X):
        return (X**3).sum(axis=1)

    return BlackBoxProblem(
        f"sumcubes-d{d}", d, 1, batch, SmoothnessProfile(ell=6.0, rho=6.0),
        gradient=lambda x: 3 * np.asarray(x, float) ** 2,
        hessian=lambda x: np.diag(6 * np.asarray(x, float)),
    )


def make_from_function(fn: Callable[[np.ndarray], float], d: int, *, ell=1.0, rho=1.0,
                       gradient=None, hessian=None, name="custom") -> BlackBoxProblem:
    """Wrap a scalar Python function of one point as a deterministic problem."""

    def batch(idx, X):
        return np.array([fn(x) for x in X])

    return BlackBoxProblem(name, d, 1, batch, SmoothnessProfile(ell=ell, rho=rho),
                           gradient=gradient, hessian=hessian)
