import json

import numpy as np
import pytest

from attacal.cli import run
from attacal.formats import read_dataset, read_params, read_predictions, read_report
from attacal.metrics import accuracy, brier, mc_brier, nll


@pytest.fixture
def data(tmp_path):
    path = tmp_path / "val.jsonl"
    assert run(["synth", "-o", str(path), "--n", "300", "--k", "4", "--m", "2",
                "--temperature", "0.5", "--seed", "3"]) == 0
    return path


def test_synth(data, tmp_path, capsys):
    ds = read_dataset(data)
    assert (len(ds), ds.k, ds.m) == (300, 4, 2)
    header = json.loads(data.read_text().splitlines()[0])
    assert header["k"] == 4 and header["m"] == 2
    again = tmp_path / "again.jsonl"
    run(["synth", "-o", str(again), "--n", "300", "--k", "4", "--m", "2", "--temperature", "0.5",
         "--seed", "3"])
    assert again.read_bytes() == data.read_bytes()
    assert "300 records" in capsys.readouterr().out


def test_synth_validation_error(tmp_path):
    assert run(["synth", "-o", str(tmp_path / "x.jsonl"), "--n", "0"]) == 1


def test_synth_io_error(tmp_path):
    assert run(["synth", "-o", str(tmp_path / "missing" / "x.jsonl")]) == 2


@pytest.mark.parametrize("method, count", [("matta", 4 * 2 + 1), ("vatta", 2 + 1), ("temperature", 1)])
def test_fit_shapes(data, tmp_path, method, count):
    out = tmp_path / f"{method}.jsonl"
    assert run(["fit", "-i", str(data), "-o", str(out), "--method", method, "--epochs", "3"]) == 0
    body = json.loads(out.read_text().splitlines()[1])
    n_values = sum(np.size(v) for v in body.values())
    assert n_values == count
    if method == "temperature":
        assert body["T"] > 0


def test_fit_vanilla_is_usage_error(data, tmp_path):
    assert run(["fit", "-i", str(data), "-o", str(tmp_path / "p"), "--method", "vanilla"]) == 1


def test_fit_missing_input(tmp_path):
    assert run(["fit", "-i", str(tmp_path / "none.jsonl"), "-o", str(tmp_path / "p"),
                "--method", "matta"]) == 2


def test_unknown_option_is_usage_error():
    assert run(["fit", "--bogus"]) == 1


def test_fit_report_written(data, tmp_path):
    rep = tmp_path / "fit.jsonl"
    run(["fit", "-i", str(data), "-o", str(tmp_path / "p.jsonl"), "--method", "vatta",
         "--epochs", "4", "--report", str(rep)])
    header, body = read_report(rep)
    assert header["kind"] == "fit" and len(body["loss_history"]) == 4


def test_apply_vanilla(data, tmp_path):
    out = tmp_path / "pred.jsonl"
    assert run(["apply", "-i", str(data), "-o", str(out), "--method", "vanilla"]) == 0
    P, y = read_predictions(out)
    ds = read_dataset(data)
    assert P.tobytes() == ds.p0.tobytes()


def test_apply_zero_blend_equals_vanilla(data, tmp_path):
    params = tmp_path / "p.jsonl"
    params.write_text('{"format":"attacal-params","version":1,"method":"matta","k":4,"m":2}\n'
                      '{"W":[[1,2],[3,4],[5,6],[7,8]],"omega_star":0}\n')
    out = tmp_path / "pred.jsonl"
    assert run(["apply", "-i", str(data), "-o", str(out), "--params", str(params)]) == 0
    assert read_predictions(out)[0].tobytes() == read_dataset(data).p0.tobytes()


@pytest.mark.parametrize("method", ["matta", "vatta", "temperature", "isotonic", "histogram"])
def test_apply_preserves_accuracy(data, tmp_path, method):
    params, out = tmp_path / "p.jsonl", tmp_path / "pred.jsonl"
    run(["fit", "-i", str(data), "-o", str(params), "--method", method, "--epochs", "5"])
    assert run(["apply", "-i", str(data), "-o", str(out), "--params", str(params)]) == 0
    P, y = read_predictions(out)
    ds = read_dataset(data)
    assert accuracy(P, y) == accuracy(ds.p0, ds.labels)


def test_apply_mismatch(data, tmp_path):
    params = tmp_path / "p.jsonl"
    params.write_text('{"format":"attacal-params","version":1,"method":"vatta","k":4,"m":3}\n'
                      '{"w":[1,1,1],"omega_star":0.5}\n')
    assert run(["apply", "-i", str(data), "-o", str(tmp_path / "o"), "--params", str(params)]) == 1


def test_apply_requires_params(data, tmp_path):
    assert run(["apply", "-i", str(data), "-o", str(tmp_path / "o"), "--method", "matta"]) == 1


def test_eval_perfect(tmp_path):
    pred = tmp_path / "p.jsonl"
    pred.write_text('{"format":"attacal-predictions","version":1,"k":2,"n":2}\n'
                    '{"p":[1,0],"label":0}\n{"p":[0,1],"label":1}\n')
    rep = tmp_path / "r.jsonl"
    assert run(["eval", "-i", str(pred), "-o", str(rep)]) == 0
    _, report = read_report(rep)
    assert report.brier == report.mc_brier == report.ece == report.nll == 0.0
    assert report.accuracy == 1.0


def test_eval_missing_labels(tmp_path):
    pred = tmp_path / "p.jsonl"
    pred.write_text('{"format":"attacal-predictions","version":1,"k":2,"n":1}\n{"p":[1,0],"label":null}\n')
    assert run(["eval", "-i", str(pred)]) == 1


def test_eval_concatenation_is_weighted(data, tmp_path):
    other = tmp_path / "other.jsonl"
    run(["synth", "-o", str(other), "--n", "120", "--k", "4", "--m", "2", "--seed", "8"])
    reports = {}
    for name, inputs in (("a", [data]), ("b", [other]), ("ab", [data, other])):
        out = tmp_path / f"{name}.report"
        args = ["eval", "-o", str(out)]
        for path in inputs:
            args += ["-i", str(path)]
        assert run(args) == 0
        reports[name] = read_report(out)[1]
    for key in ("brier", "mc_brier", "nll"):
        combined = getattr(reports["ab"], key) * 420
        parts = getattr(reports["a"], key) * 300 + getattr(reports["b"], key) * 120
        assert combined == pytest.approx(parts, abs=1e-9)


def test_eval_bins(data, tmp_path):
    out = tmp_path / "r.jsonl"
    run(["eval", "-i", str(data), "-o", str(out), "--bins", "7"])
    assert read_report(out)[1].reliability.n_bins == 7


def test_report_command(data, tmp_path, capsys):
    out = tmp_path / "r.jsonl"
    run(["eval", "-i", str(data), "-o", str(out)])
    capsys.readouterr()
    assert run(["report", "-i", str(out), "--bins-table"]) == 0
    text = capsys.readouterr().out
    assert "brier" in text and "conf=" in text


def test_augment_command(tmp_path):
    from attacal.augment import Image, read_tensor, write_pnm, write_tensor

    src, dst = tmp_path / "in", tmp_path / "out"
    src.mkdir()
    rng = np.random.default_rng(0)
    write_tensor(src / "a.atim", Image(rng.random((10, 10, 3)), 1.0))
    write_pnm(src / "b.pgm", Image(rng.integers(0, 256, (12, 8)).astype(float), 255.0))
    assert run(["augment", "-i", str(src), "-o", str(dst), "--policy", "1"]) == 0
    files = sorted(p.name for p in dst.iterdir())
    assert len(files) == 12
    assert read_tensor(dst / "a_t1_r0.atim").shape == (8, 8, 3)


def test_augment_empty_dir(tmp_path):
    (tmp_path / "in").mkdir()
    assert run(["augment", "-i", str(tmp_path / "in"), "-o", str(tmp_path / "out")]) == 1


def test_full_pipeline_deterministic(data, tmp_path):
    outputs = []
    for run_id in range(2):
        d = tmp_path / f"run{run_id}"
        d.mkdir()
        run(["fit", "-i", str(data), "-o", str(d / "p.jsonl"), "--method", "matta", "--epochs", "5",
             "--report", str(d / "fit.jsonl")])
        run(["apply", "-i", str(data), "-o", str(d / "pred.jsonl"), "--params", str(d / "p.jsonl")])
        run(["eval", "-i", str(d / "pred.jsonl"), "-o", str(d / "rep.jsonl")])
        outputs.append([(d / f).read_bytes() for f in ("p.jsonl", "fit.jsonl", "pred.jsonl", "rep.jsonl")])
    assert outputs[0] == outputs[1]
