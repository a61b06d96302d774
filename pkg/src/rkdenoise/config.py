"""Experiment configuration: dataclasses plus strict YAML loading.

Unknown keys are rejected so a typo in a committed config cannot silently
fall back to a default.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .loss import LossConfig
from .optimize import OptimizerOptions
from .serialize import canonical_hash
from .stepper import TABLEAUX
from .systems import SYSTEMS

DEFAULT_X0 = {"cubic": (2.0, 0.0), "lorenz": (5.0, 5.0, 25.0), "double_pendulum": (1.0, 0.0, 0.0, 0.0)}


@dataclass(frozen=True)
class SimulationSpec:
    x0: tuple | None = None
    t0: float = 0.0
    t1: float = 25.0
    m: int = 2500
    sampling: str = "fixed"
    mean_dt: float | None = None
    n_trajectories: int = 1
    x0_box: tuple | None = None
    seed: int = 0

    def __post_init__(self):
        if self.m < 2:
            raise ValueError(f"simulation.m must be at least 2, got {self.m}")
        if not self.t1 > self.t0:
            raise ValueError("simulation.t1 must exceed t0")
        if self.sampling not in ("fixed", "exponential"):
            raise ValueError(f"simulation.sampling must be 'fixed' or 'exponential', got {self.sampling!r}")
        if self.n_trajectories < 1:
            raise ValueError("simulation.n_trajectories must be positive")
        if self.n_trajectories > 1 and self.x0_box is None:
            raise ValueError("several trajectories need simulation.x0_box for their initial states")
        if self.x0 is not None:
            object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))
        if self.x0_box is not None:
            box = tuple((float(lo), float(hi)) for lo, hi in self.x0_box)
            if any(not hi > lo for lo, hi in box):
                raise ValueError("simulation.x0_box rows must be [low, high] with high > low")
            object.__setattr__(self, "x0_box", box)

    @property
    def dt(self) -> float:
        """Fixed spacing, or the mean gap of exponential sampling."""
        if self.mean_dt is not None:
            return float(self.mean_dt)
        return (self.t1 - self.t0) / (self.m - 1)

    def times(self, seed_offset: int = 0) -> np.ndarray:
        from .integrate import sample_exponential_times
        if self.sampling == "fixed":
            return np.linspace(self.t0, self.t1, self.m)
        return sample_exponential_times(self.dt, self.t0, self.m, self.seed + seed_offset)

    def initial_states(self, system: str) -> list:
        if self.x0_box is None:
            x0 = self.x0 if self.x0 is not None else DEFAULT_X0[system]
            return [np.array(x0, dtype=float)]
        rng = np.random.default_rng(self.seed)
        lo, hi = np.array(self.x0_box).T
        return [rng.uniform(lo, hi) for _ in range(self.n_trajectories)]


@dataclass(frozen=True)
class CorruptionSpec:
    distribution: str = "gaussian"
    percents: tuple = (10.0,)
    dof: int | None = None
    seed: int = 100

    def __post_init__(self):
        if self.distribution not in ("gaussian", "student_t"):
            raise ValueError(f"corruption.distribution must be 'gaussian' or 'student_t', "
                             f"got {self.distribution!r}")
        if self.distribution == "student_t" and self.dof is None:
            raise ValueError("corruption.dof is required for student_t noise")
        percents = (self.percents,) if np.isscalar(self.percents) else self.percents
        percents = tuple(float(p) for p in percents)
        if not percents or any(not p >= 0 for p in percents):
            raise ValueError("corruption.percents must be non-negative")
        object.__setattr__(self, "percents", percents)


@dataclass(frozen=True)
class ModelSpec:
    hidden: tuple = (32, 32, 32)
    tableau: str = "rk4"
    smoothing_window: int = 5

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if any(h < 1 for h in self.hidden):
            raise ValueError("model.hidden widths must be positive")
        if self.tableau not in TABLEAUX:
            raise ValueError(f"model.tableau must be one of {sorted(TABLEAUX)}, got {self.tableau!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "experiment"
    system: str | None = "cubic"
    input: str | None = None
    simulation: SimulationSpec = field(default_factory=SimulationSpec)
    corruption: CorruptionSpec = field(default_factory=CorruptionSpec)
    model: ModelSpec = field(default_factory=ModelSpec)
    loss: LossConfig = field(default_factory=LossConfig)
    optimizer: OptimizerOptions = field(default_factory=OptimizerOptions)
    trials: int = 1
    seed: int = 0
    out: str = "runs/experiment"

    def __post_init__(self):
        if self.system is None and self.input is None:
            raise ValueError("config needs a system or an input file")
        if self.system is not None and self.system not in SYSTEMS:
            raise ValueError(f"unknown system {self.system!r}; expected one of {sorted(SYSTEMS)}")
        if self.input is not None and not Path(self.input).is_file():
            raise ValueError(f"input file {self.input!r} does not exist")
        if self.trials < 1:
            raise ValueError("trials must be positive")
        if self.system is not None:
            n = SYSTEMS[self.system].dim
            x0 = self.simulation.x0
            if x0 is not None and len(x0) != n:
                raise ValueError(f"simulation.x0 has {len(x0)} entries, system {self.system} has {n}")
            if self.simulation.x0_box is not None and len(self.simulation.x0_box) != n:
                raise ValueError(f"simulation.x0_box needs {n} rows")

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))

    def fingerprint(self) -> str:
        """Hash of every setting that affects results (the output directory is excluded)."""
        data = self.to_dict()
        data.pop("out")
        return canonical_hash(data)


_SECTIONS = {"simulation": SimulationSpec, "corruption": CorruptionSpec, "model": ModelSpec,
             "loss": LossConfig, "optimizer": OptimizerOptions}


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _build(cls, data, where):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ValueError(f"{where}: expected a mapping")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ValueError(f"{where}: unknown keys {unknown}; allowed {sorted(names)}")
    return cls(**data)


def config_from_dict(data: dict, base_dir=None) -> ExperimentConfig:
    data = dict(data or {})
    kwargs = {}
    for key, cls in _SECTIONS.items():
        if key in data:
            kwargs[key] = _build(cls, data.pop(key), key)
    if data.get("input") is not None and base_dir is not None:
        p = Path(data["input"])
        if not p.is_absolute() and not p.exists():
            data["input"] = str(Path(base_dir) / p)
    kwargs.update(data)
    return _build(ExperimentConfig, kwargs, "config")


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ValueError(f"cannot read config {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ValueError(f"{path}: invalid YAML ({exc})") from None
    try:
        return config_from_dict(data, base_dir=path.parent)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{path}: {exc}") from None


def override(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    """Copy of ``cfg`` with top-level fields replaced (``None`` values ignored)."""
    changes = {k: v for k, v in changes.items() if v is not None}
    return dataclasses.replace(cfg, **changes)
