import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from rkdenoise.corrupt import NoisyDataset, add_gaussian_noise
from rkdenoise.integrate import Trajectory, rk4_simulate
from rkdenoise.loss import LossConfig
from rkdenoise.network import flatten, xavier_init
from rkdenoise.serialize import (
    ModelRecord,
    canonical_hash,
    read_dataset,
    read_model,
    read_noise,
    read_trajectory,
    write_dataset,
    write_model,
    write_noise,
    write_trajectory,
)
from rkdenoise.stepper import KUTTA3, FlowModel
from rkdenoise.systems import lorenz_field

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(deadline=None, max_examples=40, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.integers(1, 4), st.integers(1, 12), st.data())
def test_trajectory_csv_roundtrip_exact(tmp_path, n, m, data):
    gaps = data.draw(st.lists(st.floats(1e-9, 1e3), min_size=m, max_size=m))
    times = np.cumsum(gaps) - 7.0
    if not np.all(np.diff(times) > 0):
        return
    values = data.draw(st.lists(finite, min_size=n * m, max_size=n * m))
    traj = Trajectory(times, np.array(values).reshape(n, m))
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_trajectory(p1, traj)
    back = read_trajectory(p1)
    assert np.array_equal(back.times, traj.times) and np.array_equal(back.states, traj.states)
    write_trajectory(p2, back)
    assert p1.read_bytes() == p2.read_bytes()


def test_trajectory_csv_header(tmp_path):
    write_trajectory(tmp_path / "t.csv", Trajectory([0.0, 0.5], np.array([[1.0, 2.0], [3.0, 4.0]])))
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines == ["t,x1,x2", "0.0,1.0,3.0", "0.5,2.0,4.0"]


@pytest.mark.parametrize("text, match", [
    ("time,x1\n0,1\n", "header"),
    ("t,x1\n0,1,2\n", "expected 2 fields"),
    ("t,x1\n0,abc\n", "non-numeric"),
    ("t,x1\n", "no samples"),
    ("t,x1\n1,0\n0,0\n", "increasing"),
])
def test_trajectory_csv_rejects_malformed(tmp_path, text, match):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(ValueError, match=match):
        read_trajectory(p)


def test_dataset_roundtrip_byte_identical(tmp_path):
    X = rk4_simulate(lorenz_field, [5.0, 5.0, 25.0], np.linspace(0, 1, 101))
    d = add_gaussian_noise(X, 10, seed=3)
    write_dataset(tmp_path / "a.json", d)
    back = read_dataset(tmp_path / "a.json")
    assert np.array_equal(back.observations, d.observations)
    assert np.array_equal(back.truth.states, X.states)
    assert np.array_equal(back.true_noise, d.true_noise)
    assert back.provenance == {"distribution": "gaussian", "percent": 10, "seed": 3}
    write_dataset(tmp_path / "b.json", back)
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_dataset_without_truth(tmp_path):
    d = NoisyDataset(np.ones((2, 5)) * np.arange(5), np.arange(5.0))
    write_dataset(tmp_path / "d.json", d)
    back = read_dataset(tmp_path / "d.json")
    assert back.truth is None and back.true_noise is None


def test_dataset_validator_on_load(tmp_path):
    X = rk4_simulate(lorenz_field, [5.0, 5.0, 25.0], np.linspace(0, 1, 11))
    d = add_gaussian_noise(X, 10, seed=3)
    write_dataset(tmp_path / "d.json", d)
    text = (tmp_path / "d.json").read_text()
    y0 = repr(float(d.observations[0, 0]))
    (tmp_path / "d.json").write_text(text.replace(y0, repr(float(d.observations[0, 0]) + 1), 1))
    with pytest.raises(ValueError, match="Y != X \\+ N"):
        read_dataset(tmp_path / "d.json")


def test_noise_csv_roundtrip(tmp_path):
    N = np.random.default_rng(0).normal(size=(3, 20))
    write_noise(tmp_path / "n.csv", np.arange(20.0), N)
    assert (tmp_path / "n.csv").read_text().startswith("t,nu1,nu2,nu3\n")
    assert np.array_equal(read_noise(tmp_path / "n.csv"), N)


def test_model_roundtrip_byte_identical(tmp_path):
    params = xavier_init((3, 16, 16, 3), 4)
    record = ModelRecord(FlowModel(params, KUTTA3), LossConfig(q=2, gamma=0.5),
                         [{"file": "noise_0.csv", "dataset_sha256": "ab" * 32}],
                         {"termination": "f-tol", "iterations": 12}, "cd" * 32)
    write_model(tmp_path / "a.json", record)
    back = read_model(tmp_path / "a.json")
    assert np.array_equal(flatten(back.model.params), flatten(params))
    assert np.array_equal(back.model.tableau.A, KUTTA3.A) and back.model.tableau.name == "kutta3"
    assert back.loss == record.loss and back.noise == record.noise
    write_model(tmp_path / "b.json", back)
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_model_version_checked(tmp_path):
    record = ModelRecord(FlowModel(xavier_init((2, 4, 2), 0)), LossConfig())
    write_model(tmp_path / "m.json", record)
    text = (tmp_path / "m.json").read_text().replace('"version": 1', '"version": 99')
    (tmp_path / "m.json").write_text(text)
    with pytest.raises(ValueError, match="version"):
        read_model(tmp_path / "m.json")


def test_canonical_hash_ignores_key_order():
    assert canonical_hash({"a": 1, "b": [1, 2]}) == canonical_hash({"b": [1, 2], "a": 1})
    assert canonical_hash({"a": 1}) != canonical_hash({"a": 2})
