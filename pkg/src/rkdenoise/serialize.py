"""File formats: trajectory CSV, dataset and model JSON.

Floats are written with ``repr``, the shortest decimal string that parses
back to the same double, so write -> read -> write is byte-identical.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .corrupt import NoisyDataset
from .integrate import Trajectory
from .loss import LossConfig
from .network import flatten, unflatten
from .stepper import FlowModel, RkTableau

DATASET_FORMAT = "rkdenoise-dataset"
MODEL_FORMAT = "rkdenoise-model"
FORMAT_VERSION = 1


def _fmt(v) -> str:
    return repr(float(v))


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def canonical_hash(obj) -> str:
    """sha256 of the sorted-key compact JSON encoding of ``obj``."""
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def _dump_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=1) + "\n")


def _load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON ({exc})") from None


# -- column CSV ----------------------------------------------------------------
def write_columns_csv(path, times, states, prefix="x"):
    """One row per sample: ``t, <prefix>1, ..., <prefix>n``."""
    states = np.asarray(states, dtype=float)
    lines = [",".join(["t"] + [f"{prefix}{i + 1}" for i in range(states.shape[0])])]
    for j, t in enumerate(times):
        lines.append(",".join([_fmt(t)] + [_fmt(v) for v in states[:, j]]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_columns_csv(path, prefix="x"):
    text = Path(path).read_text().splitlines()
    if not text:
        raise ValueError(f"{path}: empty file")
    header = text[0].strip().split(",")
    n = len(header) - 1
    if header[0] != "t" or n < 1 or header[1:] != [f"{prefix}{i + 1}" for i in range(n)]:
        raise ValueError(f"{path}: expected header t,{prefix}1,...,{prefix}n; got {text[0]!r}")
    rows = []
    for k, line in enumerate(text[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != n + 1:
            raise ValueError(f"{path}:{k}: expected {n + 1} fields, got {len(parts)}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise ValueError(f"{path}:{k}: non-numeric field") from None
    if not rows:
        raise ValueError(f"{path}: no samples")
    data = np.array(rows)
    return data[:, 0], data[:, 1:].T.copy()


def write_trajectory(path, traj: Trajectory):
    write_columns_csv(path, traj.times, traj.states)


def read_trajectory(path) -> Trajectory:
    times, states = read_columns_csv(path)
    try:
        return Trajectory(times, states)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None


def write_noise(path, times, noise):
    write_columns_csv(path, times, noise, prefix="nu")


def read_noise(path):
    return read_columns_csv(path, prefix="nu")[1]


# -- dataset bundle ------------------------------------------------------------
def _matrix(rows):
    return [[float(v) for v in row] for row in np.asarray(rows, dtype=float)]


def dataset_to_dict(data: NoisyDataset) -> dict:
    return {
        "format": DATASET_FORMAT,
        "version": FORMAT_VERSION,
        "provenance": data.provenance,
        "times": [float(t) for t in data.times],
        "Y": _matrix(data.observations),
        "X": None if data.truth is None else _matrix(data.truth.states),
        "N": None if data.true_noise is None else _matrix(data.true_noise),
    }


def dataset_from_dict(obj, source="dataset") -> NoisyDataset:
    if obj.get("format") != DATASET_FORMAT:
        raise ValueError(f"{source}: not a dataset bundle (format={obj.get('format')!r})")
    if obj.get("version") != FORMAT_VERSION:
        raise ValueError(f"{source}: unsupported dataset version {obj.get('version')!r}")
    times = np.array(obj["times"], dtype=float)
    truth = None if obj.get("X") is None else Trajectory(times, np.array(obj["X"], dtype=float))
    N = None if obj.get("N") is None else np.array(obj["N"], dtype=float)
    data = NoisyDataset(np.array(obj["Y"], dtype=float), times, truth, N,
                        obj.get("provenance") or {})
    data.validate()
    return data


def write_dataset(path, data: NoisyDataset):
    _dump_json(path, dataset_to_dict(data))


def read_dataset(path) -> NoisyDataset:
    try:
        return dataset_from_dict(_load_json(path), str(path))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"{path}: malformed dataset bundle ({exc})") from None


# -- model file ----------------------------------------------------------------
@dataclass
class ModelRecord:
    """Everything stored in a model file.

    ``noise`` lists one entry per training dataset with the learned noise
    file name (relative to the model file) and the sha256 of the dataset
    bundle it was fit to.
    """

    model: FlowModel
    loss: LossConfig
    noise: list = field(default_factory=list)
    report: dict = field(default_factory=dict)
    config_hash: str = ""

    def to_dict(self) -> dict:
        t = self.model.tableau
        return {
            "format": MODEL_FORMAT,
            "version": FORMAT_VERSION,
            "widths": list(self.model.params.widths),
            "params": [float(v) for v in flatten(self.model.params)],
            "tableau": {"name": t.name, "A": _matrix(t.A), "b": [float(v) for v in t.b]},
            "loss": asdict(self.loss),
            "noise": self.noise,
            "report": self.report,
            "config_hash": self.config_hash,
        }

    @classmethod
    def from_dict(cls, obj, source="model"):
        if obj.get("format") != MODEL_FORMAT:
            raise ValueError(f"{source}: not a model file (format={obj.get('format')!r})")
        if obj.get("version") != FORMAT_VERSION:
            raise ValueError(f"{source}: unsupported model version {obj.get('version')!r}")
        tab = obj["tableau"]
        params = unflatten(obj["widths"], np.array(obj["params"], dtype=float))
        model = FlowModel(params, RkTableau(tab["A"], tab["b"], tab.get("name", "")))
        return cls(model, LossConfig(**obj["loss"]), obj.get("noise", []),
                   obj.get("report", {}), obj.get("config_hash", ""))


def write_model(path, record: ModelRecord):
    _dump_json(path, record.to_dict())


def read_model(path) -> ModelRecord:
    try:
        return ModelRecord.from_dict(_load_json(path), str(path))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"{path}: malformed model file ({exc})") from None


def write_json(path, obj):
    _dump_json(path, obj)


def read_json(path):
    return _load_json(path)
