"""Execute every (algorithm, seed) pair of an experiment and write CSV trajectories."""

from __future__ import annotations

import csv
import io
import logging
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..baselines import BASELINES, BaselineParams
from ..solvers import SOLVERS, SolverParams, SolverReport
from .config import AlgorithmSpec, ExperimentConfig, build_problem, check_problem, start_point

log = logging.getLogger(__name__)

HEADER = ("seed", "algorithm", "queries", "f", "event", "ms")
SUMMARY_HEADER = ("algorithm", "seed", "termination", "queries", "final_f", "grad_norm", "lambda_min",
                  "queries_to_target", "seconds")


@dataclass
class PairResult:
    label: str
    seed: int
    termination: str
    queries: int
    final_f: float
    grad_norm: Optional[float]
    lambda_min: Optional[float]
    queries_to_target: Optional[int]
    seconds: Optional[float]
    csv_path: str
    report: Optional[SolverReport] = field(default=None, repr=False)

    def row(self) -> list:
        return [self.label, self.seed, self.termination, self.queries, _fmt(self.final_f),
                _fmt(self.grad_norm), _fmt(self.lambda_min),
                "" if self.queries_to_target is None else self.queries_to_target, _fmt(self.seconds)]


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    out_dir: Path
    pairs: list
    summary_path: Path
    plot_path: Optional[Path]

    def by_label(self) -> dict:
        out: dict = {}
        for p in self.pairs:
            out.setdefault(p.label, []).append(p)
        return out


def _fmt(v) -> str:
    if v is None:
        return ""
    return repr(float(v))


def trajectory_csv(report: SolverReport, seed: int, label: str) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for pt in report.trajectory:
        w.writerow([seed, label, pt.queries, repr(float(pt.f)), pt.event, repr(float(pt.ms))])
    return buf.getvalue()


def atomic_write(path: Path, text: str) -> None:
    """Write via a temporary file in the same directory and rename over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def make_params(config: ExperimentConfig, spec: AlgorithmSpec, rho: float, budget, preset):
    common = dict(epsilon=config.epsilon, delta=config.resolved_delta(rho), preset=preset, budget=budget,
                  record_clock=config.record_wall_clock)
    cls = SolverParams if spec.is_solver else BaselineParams
    return cls(**{**common, **spec.params})


def run_pair(config: ExperimentConfig, spec: AlgorithmSpec, seed: int, out_dir: Path, *,
             budget=None, preset=None, keep_report: bool = False) -> PairResult:
    problem = build_problem(config.problem, seed)
    if spec.smoothness:
        problem = problem.with_smoothness(**spec.smoothness)
    budget = config.budget if budget is None else budget
    preset = preset or config.preset
    params = make_params(config, spec, problem.smoothness.rho, budget, preset)
    fn = SOLVERS.get(spec.name) or BASELINES[spec.name]
    x0 = start_point(config.problem, problem.dim)
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    report = fn(problem, x0, params, rng)
    secs = time.perf_counter() - t0 if config.record_wall_clock else None
    path = Path(out_dir) / f"{spec.label}_seed{seed}.csv"
    atomic_write(path, trajectory_csv(report, seed, spec.label))

    grad_norm = lam = None
    if problem.gradient is not None:
        grad_norm = float(np.linalg.norm(problem.gradient(report.x)))
    if problem.hessian is not None:
        lam = problem.lambda_min(report.x)
    hit = None
    f_min = problem.meta.get("f_min")
    if config.target_gap is not None and f_min is not None:
        hit = next((pt.queries for pt in report.trajectory if pt.f <= f_min + config.target_gap), None)
    log.info("%s seed=%d %s queries=%d f=%.6g", spec.label, seed, report.termination.value,
             report.query_total, report.final_f)
    return PairResult(spec.label, seed, report.termination.value, report.query_total, report.final_f,
                      grad_norm, lam, hit, secs, str(path), report if keep_report else None)


def _pair_job(args):
    return run_pair(*args[:4], **args[4])


def run_experiment(config: ExperimentConfig, out_dir=None, *, seeds: Optional[Sequence[int]] = None,
                   budget: Optional[int] = None, preset: Optional[str] = None,
                   workers: Optional[int] = None, plot: bool = True,
                   keep_reports: bool = False) -> ExperimentResult:
    """Run all pairs, then write ``summary.csv`` and ``convergence.svg`` into ``out_dir``.

    Pairs run in a process pool when ``workers > 1``; every pair builds its
    own problem instance and RNG from the seed, so the outputs do not depend
    on scheduling.
    """
    if seeds is not None:
        config = replace(config, seeds=list(seeds))
    check_problem(config.problem)
    out = Path(out_dir or config.output)
    out.mkdir(parents=True, exist_ok=True)
    atomic_write(out / "config.toml", config.dumps())
    opts = {"budget": budget, "preset": preset, "keep_report": keep_reports}
    jobs = [(config, spec, seed, out, opts) for spec in config.algorithms for seed in config.seeds]
    workers = workers if workers is not None else min(os.cpu_count() or 1, len(jobs))
    if workers > 1 and not keep_reports:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            pairs = list(pool.map(_pair_job, jobs))
    else:
        pairs = [_pair_job(j) for j in jobs]

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_HEADER)
    for p in pairs:
        w.writerow(p.row())
    summary = out / "summary.csv"
    atomic_write(summary, buf.getvalue())

    plot_path = None
    if plot:
        from .plotting import emit_plot

        plot_path = emit_plot([p.csv_path for p in pairs], out / "convergence.svg",
                              title=config.name)
    return ExperimentResult(config, out, pairs, summary, plot_path)
