import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from zoncf.harness import config as cfg
from zoncf.harness.cli import main, parse_seeds
from zoncf.harness.invariants import report_json, run_suite
from zoncf.harness.plotting import PlotError, emit_plot, read_trajectories, step_values
from zoncf.harness.runner import HEADER, run_experiment

CONFIGS = sorted((Path(__file__).resolve().parents[1] / "configs").glob("*.toml"))

SMALL = """
name = "small"
epsilon = 1e-2
seeds = [0, 1]
budget = 20000
record_wall_clock = false

[problem]
name = "cubic-det"
d = 5

[[algorithms]]
name = "zo-gd-ncf"
params = { eta = 0.0025 }

[[algorithms]]
name = "rspi"
params = { T_dfpi = 5 }
"""


def small_config(**kw):
    conf = cfg.loads(SMALL)
    for k, v in kw.items():
        setattr(conf, k, v)
    return conf


# ---------------------------------------------------------------------------
# config


@pytest.mark.parametrize("path", CONFIGS, ids=lambda p: p.stem)
def test_bundled_configs_round_trip(path):
    conf = cfg.load(path)
    again = cfg.loads(conf.dumps())
    assert again == conf
    assert again.dumps() == conf.dumps()


algo = st.sampled_from(["zo-gd-ncf", "zo-sgd-ncf", "zo-scsg-ncf", "zo-spider-ncf", "zpsgd", "pagd", "rspi"])
finite = st.floats(1e-6, 1e3, allow_nan=False)


@given(
    name=st.text("abcdefgh-_0123", min_size=1, max_size=12),
    eps=finite,
    delta=st.none() | finite,
    seeds=st.lists(st.integers(0, 10**6), min_size=1, max_size=6, unique=True),
    budget=st.none() | st.integers(1, 10**9),
    algs=st.lists(algo, min_size=1, max_size=4, unique=True),
    eta=st.none() | finite,
    problem=st.sampled_from(["octopus", "cubic-det", "cubic-stoch"]),
    d=st.integers(1, 200),
    clock=st.booleans(),
)
def test_config_round_trip_is_identity(name, eps, delta, seeds, budget, algs, eta, problem, d, clock):
    raw = {"name": name, "epsilon": eps, "seeds": seeds, "record_wall_clock": clock,
           "problem": {"name": problem, "d": d},
           "algorithms": [{"name": a, **({"params": {"eta": eta}} if eta is not None else {})} for a in algs]}
    if delta is not None:
        raw["delta"] = delta
    if budget is not None:
        raw["budget"] = budget
    conf = cfg.ExperimentConfig.from_dict(raw)
    assert cfg.loads(conf.dumps()) == conf


def test_delta_defaults_to_sqrt_rho_eps():
    conf = small_config()
    assert conf.resolved_delta(4.0) == pytest.approx(0.2)
    conf.delta = 0.7
    assert conf.resolved_delta(4.0) == 0.7


@pytest.mark.parametrize("mutate, msg", [
    (lambda t: t.replace("seeds = [0, 1]", "seeds = []"), "seeds"),
    (lambda t: t.replace("seeds = [0, 1]", "seeds = [1, 1]"), "duplicate"),
    (lambda t: t.replace('name = "rspi"', 'name = "newton"'), "unknown algorithm"),
    (lambda t: t.replace('name = "cubic-det"', 'name = "rosenbrock"'), "unknown problem"),
    (lambda t: t.replace("eta = 0.0025", "step = 0.0025"), "unknown parameters"),
    (lambda t: t.replace("epsilon = 1e-2", "epsilon = 0.0"), "epsilon"),
    (lambda t: t.replace("epsilon = 1e-2", "epsilon = 1e-2\ncolour = 1"), "unknown top-level"),
    (lambda t: t.replace("epsilon = 1e-2\n", ""), "missing"),
    (lambda t: t + "\n[[algorithms]]\nname = \"rspi\"\n", "duplicate algorithm labels"),
    (lambda t: t.replace("[problem]", "[problem"), "invalid TOML"),
])
def test_config_errors(mutate, msg):
    with pytest.raises(cfg.ConfigError, match=msg):
        cfg.loads(mutate(SMALL))


def test_missing_dataset_is_file_not_found(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv(cfg.DATA_ENV, raising=False)
    with pytest.raises(FileNotFoundError):
        cfg.check_problem({"name": "reg-nls", "dataset": "nope.svm"})


def test_dataset_found_through_env(libsvm_file, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path.parent)
    monkeypatch.setenv(cfg.DATA_ENV, str(libsvm_file.parent))
    assert cfg.resolve_dataset(libsvm_file.name) == libsvm_file
    prob = cfg.build_problem({"name": "reg-nls", "dataset": libsvm_file.name, "deterministic": True}, 0)
    assert prob.n == 1 and prob.dim == 3


def test_build_problem_seeds_instances():
    a = cfg.build_problem({"name": "cubic-det", "d": 8}, 0)
    b = cfg.build_problem({"name": "cubic-det", "d": 8}, 1)
    c = cfg.build_problem({"name": "cubic-det", "d": 8, "instance_seed": 0}, 1)
    assert not np.array_equal(a.meta["A"], b.meta["A"])
    assert np.array_equal(a.meta["A"], c.meta["A"])


def test_start_point():
    assert np.array_equal(cfg.start_point({}, 3), np.zeros(3))
    assert np.array_equal(cfg.start_point({"x0": [1, 2]}, 2), [1.0, 2.0])
    with pytest.raises(cfg.ConfigError):
        cfg.start_point({"x0": [1, 2]}, 3)


# ---------------------------------------------------------------------------
# runner and plots


def test_run_writes_csvs_with_exact_header(tmp_path):
    res = run_experiment(small_config(), tmp_path, workers=1)
    assert len(res.pairs) == 4
    for p in res.pairs:
        lines = Path(p.csv_path).read_text().splitlines()
        assert lines[0] == ",".join(HEADER)
        queries = [int(line.split(",")[2]) for line in lines[1:]]
        assert queries[0] == 0 and all(b > a for a, b in zip(queries, queries[1:]))
        assert p.queries <= 20000 + 4 * 5 * 5 or p.termination != "QueryBudgetExhausted"
    assert (tmp_path / "summary.csv").read_text().startswith("algorithm,seed,termination")
    assert cfg.load(tmp_path / "config.toml") == small_config()
    assert res.plot_path.read_text().lstrip().startswith("<?xml")


def test_runs_are_byte_identical(tmp_path):
    a = run_experiment(small_config(), tmp_path / "a", workers=1)
    b = run_experiment(small_config(), tmp_path / "b", workers=2)
    for pa, pb in zip(a.pairs, b.pairs):
        assert Path(pa.csv_path).read_bytes() == Path(pb.csv_path).read_bytes()
    assert (tmp_path / "a" / "summary.csv").read_bytes() == (tmp_path / "b" / "summary.csv").read_bytes()
    assert a.plot_path.read_bytes() == b.plot_path.read_bytes()


def test_wall_clock_recorded_when_enabled(tmp_path):
    res = run_experiment(small_config(record_wall_clock=True, seeds=[0]), tmp_path, workers=1, plot=False)
    assert all(p.seconds is not None and p.seconds >= 0 for p in res.pairs)


def test_runner_overrides(tmp_path):
    res = run_experiment(small_config(), tmp_path, seeds=[3], budget=500, workers=1, plot=False,
                         keep_reports=True)
    assert {p.seed for p in res.pairs} == {3}
    assert all(p.report is not None for p in res.pairs)
    assert all(p.queries >= 500 or p.termination != "QueryBudgetExhausted" for p in res.pairs)


def write_csv(path, rows, header=",".join(HEADER)):
    path.write_text(header + "\n" + "".join(",".join(map(str, r)) + "\n" for r in rows))
    return path


def test_two_point_trajectory_plots_a_polyline(tmp_path):
    p = write_csv(tmp_path / "a.csv", [(0, "alg", 0, 1.0, "start", 0.0), (0, "alg", 10, 0.5, "descent", 0.0)])
    out = emit_plot([p], tmp_path / "p.svg")
    svg = out.read_text()
    assert "<path" in svg and "alg" in svg


def test_svg_bytes_are_deterministic(tmp_path):
    rows = [(s, "alg", q, 1.0 / (q + 1 + s), "descent", 0.0) for s in range(3) for q in (0, 5, 9)]
    for s in range(3):
        write_csv(tmp_path / f"alg_seed{s}.csv", [r for r in rows if r[0] == s])
    a = emit_plot(tmp_path, tmp_path / "out" / "a.svg", style="log").read_bytes()
    b = emit_plot(tmp_path, tmp_path / "out" / "b.svg", style="log").read_bytes()
    assert a == b


def test_inconsistent_header_rejected(tmp_path):
    p = write_csv(tmp_path / "bad.csv", [(0, "alg", 0, 1.0, "start", 0.0)], header="seed,alg,queries,f,event,ms")
    with pytest.raises(PlotError, match="header"):
        read_trajectories([p])
    with pytest.raises(PlotError):
        emit_plot([p], tmp_path / "x.svg", style="cubic")


def test_step_values_hold_last_record():
    q, f = np.array([0, 10, 20]), np.array([3.0, 2.0, 1.0])
    assert step_values(q, f, np.array([0, 5, 10, 19, 50])).tolist() == [3.0, 3.0, 2.0, 2.0, 1.0]


# ---------------------------------------------------------------------------
# CLI


def test_parse_seeds():
    assert parse_seeds("0-4") == [0, 1, 2, 3, 4]
    assert parse_seeds("0,2, 5-6") == [0, 2, 5, 6]


def test_cli_run_and_plot(tmp_path, capsys):
    conf = tmp_path / "small.toml"
    conf.write_text(SMALL)
    out = tmp_path / "out"
    assert main(["run", str(conf), "--seeds", "0", "--budget", "2000", "--out", str(out), "--workers", "1"]) == 0
    assert sorted(p.name for p in out.glob("*.csv")) == ["rspi_seed0.csv", "summary.csv", "zo-gd-ncf_seed0.csv"]
    assert main(["plot", str(out), "--out", str(tmp_path / "again.svg"), "--style", "log"]) == 0
    assert (tmp_path / "again.svg").exists()
    assert "wrote" in capsys.readouterr().out


def test_cli_errors(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text(SMALL.replace("seeds = [0, 1]", "seeds = []"))
    assert main(["run", str(bad)]) == 2
    assert main(["run", str(tmp_path / "missing.toml")]) == 3
    assert main(["plot", str(tmp_path / "nothing")]) == 2
    assert "error" in capsys.readouterr().err


def test_cli_check_json_report(tmp_path, capsys):
    out = tmp_path / "report.json"
    assert main(["check", "baselines", "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report and all(set(r) == {"suite", "test", "status", "observed", "bound"} for r in report)
    assert all(r["status"] == "pass" for r in report)


def test_negative_control_fails_estimator_suite():
    checks = run_suite("estimators", mu_scale=3.0)
    assert any(not c.passed for c in checks)
    text = report_json(checks)
    assert '"fail"' in text
