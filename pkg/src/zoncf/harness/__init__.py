"""Experiment harness: TOML configs, the run loop, plots and invariant suites."""

from .config import AlgorithmSpec, ConfigError, ExperimentConfig, build_problem, load, loads
from .invariants import Check, run_suite
from .plotting import PlotError, emit_plot
from .runner import HEADER, ExperimentResult, PairResult, run_experiment, run_pair
