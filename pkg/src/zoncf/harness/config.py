"""Declarative experiment configuration (TOML) and problem/algorithm registries."""

from __future__ import annotations

import copy
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import tomli_w

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from ..baselines import BASELINES, BaselineParams
from ..oracle import (BlackBoxProblem, make_octopus, make_reg_nls, parse_libsvm, sample_cubic_reg,
                      sample_cubic_reg_stochastic)
from ..solvers import SOLVERS, SolverParams

PROBLEMS = ("octopus", "cubic-det", "cubic-stoch", "reg-nls")
ALGORITHMS = tuple(SOLVERS) + tuple(BASELINES)
DATA_ENV = "ZONCF_DATA_DIR"


class ConfigError(ValueError):
    pass


@dataclass
class AlgorithmSpec:
    name: str
    label: str = ""
    params: dict = field(default_factory=dict)
    smoothness: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.name!r}; expected one of {ALGORITHMS}")
        self.label = self.label or self.name
        allowed = set((SolverParams if self.is_solver else BaselineParams).field_names())
        bad = set(self.params) - allowed
        if bad:
            raise ConfigError(f"{self.label}: unknown parameters {sorted(bad)}")
        bad = set(self.smoothness) - {"ell", "rho", "sigma_var", "delta_f"}
        if bad:
            raise ConfigError(f"{self.label}: unknown smoothness keys {sorted(bad)}")

    @property
    def is_solver(self) -> bool:
        return self.name in SOLVERS

    def to_dict(self) -> dict:
        out = {"name": self.name, "label": self.label}
        if self.params:
            out["params"] = dict(self.params)
        if self.smoothness:
            out["smoothness"] = dict(self.smoothness)
        return out


@dataclass
class ExperimentConfig:
    name: str
    problem: dict
    algorithms: list
    epsilon: float
    delta: Optional[float] = None
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    budget: Optional[int] = None
    output: str = "results"
    preset: str = "practical"
    record_wall_clock: bool = True
    target_gap: Optional[float] = None

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("seeds list is empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("duplicate seeds")
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if self.preset not in ("theory", "practical"):
            raise ConfigError(f"unknown preset {self.preset!r}")
        pname = self.problem.get("name")
        if pname not in PROBLEMS:
            raise ConfigError(f"unknown problem {pname!r}; expected one of {PROBLEMS}")
        if not self.algorithms:
            raise ConfigError("no algorithms configured")
        self.algorithms = [a if isinstance(a, AlgorithmSpec) else AlgorithmSpec(**a) for a in self.algorithms]
        labels = [a.label for a in self.algorithms]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"duplicate algorithm labels {labels}")

    # serialization ----------------------------------------------------------
    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        raw = copy.deepcopy(raw)
        known = {"name", "problem", "algorithms", "epsilon", "delta", "seeds", "budget", "output",
                 "preset", "record_wall_clock", "target_gap"}
        bad = set(raw) - known
        if bad:
            raise ConfigError(f"unknown top-level keys {sorted(bad)}")
        for key in ("name", "problem", "algorithms", "epsilon"):
            if key not in raw:
                raise ConfigError(f"missing required key {key!r}")
        return cls(**raw)

    def to_dict(self) -> dict:
        out = {"name": self.name, "epsilon": self.epsilon, "seeds": list(self.seeds),
               "output": self.output, "preset": self.preset,
               "record_wall_clock": self.record_wall_clock}
        for key in ("delta", "budget", "target_gap"):
            if getattr(self, key) is not None:
                out[key] = getattr(self, key)
        out["problem"] = dict(self.problem)
        out["algorithms"] = [a.to_dict() for a in self.algorithms]
        return out

    def dumps(self) -> str:
        return tomli_w.dumps(self.to_dict())

    # derived ---------------------------------------------------------------
    def resolved_delta(self, rho: float) -> float:
        """``delta = sqrt(rho * epsilon)`` unless set explicitly."""
        return self.delta if self.delta is not None else math.sqrt(rho * self.epsilon)


def loads(text: str) -> ExperimentConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from None
    return ExperimentConfig.from_dict(raw)


def load(path) -> ExperimentConfig:
    return loads(Path(path).read_text())


# ---------------------------------------------------------------------------
# problem construction


def resolve_dataset(path: str) -> Path:
    """Resolve a dataset path directly, then relative to ``$ZONCF_DATA_DIR``."""
    p = Path(path)
    if p.is_file():
        return p
    base = os.environ.get(DATA_ENV)
    if base and (Path(base) / path).is_file():
        return Path(base) / path
    raise FileNotFoundError(f"dataset {path!r} not found (searched cwd and ${DATA_ENV}={base!r})")


def check_problem(spec: dict) -> None:
    """Fail early on problems that cannot be built (e.g. missing datasets)."""
    if spec["name"] == "reg-nls":
        if "dataset" not in spec:
            raise ConfigError("reg-nls needs a 'dataset' entry")
        resolve_dataset(spec["dataset"])


def build_problem(spec: dict, seed: int) -> BlackBoxProblem:
    """Build a fresh problem instance; randomly generated instances use ``instance_seed`` or the run seed."""
    spec = dict(spec)
    name = spec.pop("name")
    deterministic = spec.pop("deterministic", False)
    inst = int(spec.pop("instance_seed", seed))
    if name == "octopus":
        prob = make_octopus(int(spec.pop("d")), **spec)
    elif name == "cubic-det":
        prob = sample_cubic_reg(int(spec.pop("d")), inst, **spec)
    elif name == "cubic-stoch":
        prob = sample_cubic_reg_stochastic(int(spec.pop("d")), inst, **spec)
    elif name == "reg-nls":
        data = parse_libsvm(resolve_dataset(spec.pop("dataset")), spec.pop("n_features", None))
        prob = make_reg_nls(data, **spec)
    else:
        raise ConfigError(f"unknown problem {name!r}")
    return prob.collapsed() if deterministic else prob


def start_point(spec: dict, d: int) -> np.ndarray:
    x0 = spec.get("x0", "zeros")
    if x0 == "zeros":
        return np.zeros(d)
    arr = np.asarray(x0, dtype=float)
    if arr.shape != (d,):
        raise ConfigError(f"x0 must have length {d}")
    return arr
