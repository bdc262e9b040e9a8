import numpy as np
import pytest

from zoncf.baselines import (BaselineParams, dfpi, escape_saddle, pagd_run, resolve_pagd, resolve_zpsgd,
                             rspi_run, uniform_ball, zpsgd_run, zpsgd_step)
from zoncf.harness.invariants import baseline_ledgers, dfpi_convergence, rspi_monotone
from zoncf.oracle import make_from_function, make_octopus, make_quadratic, sample_cubic_reg
from zoncf.solvers import Termination


def test_dfpi_finds_negative_eigenvector():
    prob = make_quadratic(np.diag([-1.0, 1.0]))
    s = dfpi(prob, np.zeros(2), BaselineParams(epsilon=1e-2, T_dfpi=50), np.random.default_rng(0))
    assert abs(s[0]) == pytest.approx(1.0, abs=1e-6)
    assert prob.ledger.total == 50 * 4 * 2


def test_dfpi_one_dimensional_is_unit():
    prob = make_quadratic(np.array([[2.0]]))
    s = dfpi(prob, np.zeros(1), BaselineParams(epsilon=1e-2), np.random.default_rng(3))
    assert abs(s[0]) == pytest.approx(1.0)


def test_dfpi_convergence_rate_small():
    assert dfpi_convergence(seeds=10, d=10, T=150).passed


def test_rspi_constant_function_never_moves():
    prob = make_from_function(lambda x: 3.0, 4)
    x0 = np.array([1.0, -2.0, 0.5, 0.0])
    rep = rspi_run(prob, x0, BaselineParams(epsilon=1e-2, K=15, T_dfpi=3), np.random.default_rng(0))
    assert np.array_equal(rep.x, x0)


def test_rspi_monotone():
    assert rspi_monotone(seeds=2, K=20).passed


def test_rspi_sigma1_decay():
    prob = make_quadratic(np.eye(2))
    rep = rspi_run(prob, np.ones(2), BaselineParams(epsilon=1e-2, K=41, T_sigma1=10, rho_sigma1=0.5, T_dfpi=2),
                   np.random.default_rng(0))
    assert rep.info["sigma1_final"] == pytest.approx(0.5**4)


def test_zpsgd_ledger_is_m_plus_one_per_step():
    prob = make_octopus(4)
    rep = zpsgd_run(prob, np.zeros(4), BaselineParams(epsilon=1e-2, K=7, m=3), np.random.default_rng(0))
    assert rep.query_total == 7 * 4
    assert [pt.queries for pt in rep.trajectory] == [0, 4, 8, 12, 16, 20, 24, 28]


def test_zpsgd_on_constant_function_is_bounded_random_walk():
    prob = make_from_function(lambda x: 0.0, 3)
    params = BaselineParams(epsilon=1e-2, K=50, eta=0.5, r=0.2)
    rep = zpsgd_run(prob, np.zeros(3), params, np.random.default_rng(0))
    xs = [np.zeros(3)]
    rng = np.random.default_rng(0)
    for _ in range(50):
        xs.append(zpsgd_step(prob, xs[-1], params, rng))
    assert np.allclose(xs[-1], rep.x)
    steps = np.linalg.norm(np.diff(xs, axis=0), axis=1)
    assert np.all(steps <= 0.5 * 0.2 + 1e-15)
    assert np.linalg.norm(rep.x) > 0


def test_zpsgd_defaults():
    prob = make_octopus(10)
    r = resolve_zpsgd(prob, BaselineParams(epsilon=1e-4))
    assert r["eta"] == pytest.approx(1 / (2 * prob.smoothness.ell))
    assert r["r"] == 1e-4 and r["m"] == 10


def test_uniform_ball_radius():
    rng = np.random.default_rng(0)
    pts = np.array([uniform_ball(5, 0.3, rng) for _ in range(500)])
    norms = np.linalg.norm(pts, axis=1)
    assert norms.max() <= 0.3
    # mass concentrates near the boundary in dimension 5
    assert np.mean(norms > 0.3 * 0.5 ** (1 / 5)) == pytest.approx(0.5, abs=0.08)


def test_pagd_descends_then_stops_at_minimum():
    prob = make_quadratic(np.diag([1.0, 2.0]), rho=1.0)
    rep = pagd_run(prob, np.array([1.0, 1.0]), BaselineParams(epsilon=1e-2, K=2000), np.random.default_rng(0))
    events = [pt.event for pt in rep.trajectory]
    assert events[0] == "start" and events[1] == "descent"
    assert rep.termination is Termination.SOSP_CERTIFIED
    assert rep.info["failed_escapes"] == 1
    assert np.linalg.norm(rep.x) < 1e-2


def test_pagd_keeps_going_when_asked():
    prob = make_quadratic(np.diag([1.0, 2.0]), rho=1.0)
    rep = pagd_run(prob, np.zeros(2), BaselineParams(epsilon=1e-2, K=5, t_thres=10, terminate_on_failed_escape=False),
                   np.random.default_rng(0))
    assert rep.termination is Termination.ITERATION_CAP
    assert rep.info["failed_escapes"] == 5


def test_escape_saddle_leaves_a_strict_saddle():
    prob = make_quadratic(np.diag([-1.0, 1.0]), rho=1.0)
    r = resolve_pagd(prob, BaselineParams(epsilon=1e-2, r=0.1, t_thres=50, f_thres=1e-3))
    f = lambda X: prob.objective_many(X)  # noqa: E731
    x = escape_saddle(f, np.zeros(2), r, np.random.default_rng(0))
    assert prob.objective(x) <= -1e-3


def test_pagd_escapes_octopus_origin():
    prob = make_octopus(3)
    params = BaselineParams(epsilon=1e-2, ell=prob.smoothness.ell, rho=prob.smoothness.rho, eta=1 / 10,
                            r=0.05, t_thres=1, g_thres=0.05, K=2000, terminate_on_failed_escape=False)
    rep = pagd_run(prob, np.zeros(3), params, np.random.default_rng(0))
    assert rep.final_f < prob.objective(np.zeros(3)) - 1.0


def test_baseline_ledgers():
    checks = baseline_ledgers()
    assert checks and all(c.passed for c in checks)


def test_params_reject_nonpositive():
    with pytest.raises(ValueError):
        BaselineParams(epsilon=1e-2, eta=0.0)
    with pytest.raises(ValueError):
        BaselineParams(epsilon=1e-2, T_dfpi=0)
    with pytest.raises(ValueError):
        BaselineParams(epsilon=-1.0)


def test_baselines_run_on_cubic():
    prob = sample_cubic_reg(10, 0)
    for fn in (zpsgd_run, pagd_run, rspi_run):
        rep = fn(prob.fresh(), np.zeros(10), BaselineParams(epsilon=1e-2, K=20), np.random.default_rng(0))
        assert rep.iterations == 20 and np.isfinite(rep.final_f)
        assert rep.trajectory[0].queries == 0
