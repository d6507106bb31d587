import numpy as np
import pytest

from attacal.atta import MattaParams, VattaParams
from attacal.baselines import BinningParams, TemperatureParams, fit_isotonic
from attacal.core import Dataset, InvalidInputError
from attacal.formats import (
    dumps,
    read_dataset,
    read_params,
    read_predictions,
    read_report,
    write_dataset,
    write_fit_report,
    write_params,
    write_predictions,
    write_report,
)
from attacal.metrics import calibration_report

from conftest import random_dataset, random_probs


def test_dataset_round_trip_bit_exact(rng, tmp_path):
    ds = random_dataset(rng, 50, 7, 3)
    write_dataset(tmp_path / "d.jsonl", ds)
    back = read_dataset(tmp_path / "d.jsonl")
    assert back.p0.tobytes() == ds.p0.tobytes()
    assert back.z.tobytes() == ds.z.tobytes()
    assert back.labels.tolist() == ds.labels.tolist()


def test_dataset_header(rng, tmp_path):
    ds = random_dataset(rng, 3, 2, 4)
    write_dataset(tmp_path / "d.jsonl", ds)
    lines = (tmp_path / "d.jsonl").read_text().splitlines()
    assert len(lines) == 4
    assert lines[0] == '{"format":"attacal-dataset","version":1,"k":2,"m":4,"n":3}'


def test_seventeen_digits():
    assert dumps(0.1) == "0.10000000000000001"
    assert dumps([1.0, 2]) == "[1,2]"
    with pytest.raises(InvalidInputError):
        dumps(float("nan"))


def test_renormalizes_slightly_off_rows(tmp_path):
    path = tmp_path / "d.jsonl"
    path.write_text(
        '{"format":"attacal-dataset","version":1,"k":2,"m":1,"n":1}\n'
        '{"p0":[0.3,0.7000004],"z":[[0.0,1.0]],"label":1}\n'
    )
    ds = read_dataset(path)
    assert abs(ds.p0.sum() - 1) < 1e-15
    path.write_text(
        '{"format":"attacal-dataset","version":1,"k":2,"m":1,"n":1}\n'
        '{"p0":[0.3,0.71],"z":[[0.0,1.0]],"label":1}\n'
    )
    with pytest.raises(InvalidInputError):
        read_dataset(path)


@pytest.mark.parametrize("body", [
    '{"format":"attacal-dataset","version":2,"k":2,"m":1}\n',
    '{"format":"attacal-params","version":1}\n',
    '{"format":"attacal-dataset","version":1,"k":3,"m":1}\n{"p0":[0.3,0.7],"z":[[0.0,1.0]],"label":1}\n',
    '{"format":"attacal-dataset","version":1,"k":2,"m":1}\n{"p0":[0.3,0.7],"label":1}\n',
    'not json\n',
])
def test_rejects_malformed(tmp_path, body):
    path = tmp_path / "bad.jsonl"
    path.write_text(body)
    with pytest.raises(InvalidInputError):
        read_dataset(path)


@pytest.mark.parametrize("params", [
    MattaParams(np.arange(6.0).reshape(3, 2) / 7, 0.37),
    VattaParams([0.1, -2.5], 1.0),
    TemperatureParams(1.2345678901234567),
    BinningParams(np.linspace(0, 1, 16), np.linspace(0.1, 0.9, 15), "histogram"),
])
def test_params_round_trip(tmp_path, params):
    write_params(tmp_path / "p.jsonl", params, k=3, m=2)
    back, header = read_params(tmp_path / "p.jsonl")
    assert type(back) is type(params)
    for name in ("W", "w", "omega_star", "T", "edges", "values"):
        if hasattr(params, name):
            assert np.asarray(getattr(back, name)).tobytes() == np.asarray(getattr(params, name)).tobytes()
    assert header["k"] == 3


def test_isotonic_params_round_trip(rng, tmp_path):
    params = fit_isotonic(rng.random(100), rng.integers(0, 2, 100))
    write_params(tmp_path / "p.jsonl", params)
    back, header = read_params(tmp_path / "p.jsonl")
    assert header["method"] == "isotonic"
    assert back.edges.tobytes() == params.edges.tobytes()


def test_params_shape_mismatch(tmp_path):
    path = tmp_path / "p.jsonl"
    path.write_text('{"format":"attacal-params","version":1,"method":"matta","k":3,"m":2}\n'
                    '{"W":[[1,1]],"omega_star":0.5}\n')
    with pytest.raises(InvalidInputError):
        read_params(path)


def test_predictions_round_trip(rng, tmp_path):
    P = random_probs(rng, 20, 4)
    y = rng.integers(0, 4, 20)
    write_predictions(tmp_path / "p.jsonl", P, y)
    back, labels = read_predictions(tmp_path / "p.jsonl")
    assert back.tobytes() == P.tobytes() and labels.tolist() == y.tolist()
    write_predictions(tmp_path / "q.jsonl", P)
    assert read_predictions(tmp_path / "q.jsonl")[1] is None


def test_report_round_trip(rng, tmp_path):
    P = random_probs(rng, 100, 3)
    y = rng.integers(0, 3, 100)
    report = calibration_report(P, y, 10)
    write_report(tmp_path / "r.jsonl", report, method="vanilla")
    header, back = read_report(tmp_path / "r.jsonl")
    assert header["method"] == "vanilla"
    assert back.scores() == report.scores()
    for a, b in zip(("edges", "counts", "conf", "acc"), ("edges", "counts", "conf", "acc")):
        np.testing.assert_array_equal(getattr(back.reliability, a), getattr(report.reliability, b))


def test_fit_report(tmp_path):
    write_fit_report(tmp_path / "f.jsonl", "matta", [0.5, 0.25, 0.3], 1)
    header, body = read_report(tmp_path / "f.jsonl")
    assert header["kind"] == "fit" and body["loss_history"] == [0.5, 0.25, 0.3]
