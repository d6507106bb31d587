"""Line-delimited JSON files for datasets, parameters, predictions and reports.

Every file starts with a header object carrying ``format`` and ``version``.
Floats are written with 17 significant digits, which round-trips every
64-bit value exactly.
"""
from __future__ import annotations

import json
import math
from typing import Iterable

import numpy as np

from .atta import MattaParams, VattaParams
from .baselines import BinningParams, TemperatureParams
from .core import Dataset, InvalidInputError, check_probs
from .metrics import CalibrationReport, ReliabilityTable

VERSION = 1
DATASET = "attacal-dataset"
PARAMS = "attacal-params"
PREDICTIONS = "attacal-predictions"
REPORT = "attacal-report"

METHODS = ("vanilla", "matta", "vatta", "temperature", "isotonic", "histogram")


def dumps(obj) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        if not math.isfinite(obj):
            raise InvalidInputError("cannot serialise non-finite value")
        return format(float(obj), ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{dumps(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ",".join(dumps(v) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _write_lines(path, lines: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in lines:
            fh.write(dumps(line))
            fh.write("\n")


def _read_lines(path, expected_format: str):
    with open(path, encoding="utf-8") as fh:
        raw = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not raw:
        raise InvalidInputError(f"{path}: empty file")
    try:
        records = [json.loads(ln) for ln in raw]
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path}: malformed line ({exc})") from exc
    header = records[0]
    if not isinstance(header, dict) or header.get("format") != expected_format:
        raise InvalidInputError(f"{path}: expected a {expected_format} file")
    if header.get("version") != VERSION:
        raise InvalidInputError(f"{path}: unsupported version {header.get('version')}")
    return header, records[1:]


def write_dataset(path, ds: Dataset) -> None:
    header = {"format": DATASET, "version": VERSION, "k": ds.k, "m": ds.m, "n": len(ds)}

    def records():
        yield header
        for i in range(len(ds)):
            yield {"p0": ds.p0[i], "z": ds.z[i], "label": int(ds.labels[i])}

    _write_lines(path, records())


def read_dataset(path) -> Dataset:
    header, records = _read_lines(path, DATASET)
    k, m = header.get("k"), header.get("m")
    if not records:
        raise InvalidInputError(f"{path}: dataset has no records")
    try:
        p0 = np.array([r["p0"] for r in records], dtype=np.float64)
        z = np.array([r["z"] for r in records], dtype=np.float64)
        labels = np.array([r["label"] for r in records])
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInputError(f"{path}: malformed record ({exc})") from exc
    if p0.ndim != 2 or z.ndim != 3 or p0.shape[1] != k or z.shape[1:] != (m, k):
        raise InvalidInputError(f"{path}: records do not match header k={k}, m={m}")
    if "n" in header and header["n"] != len(records):
        raise InvalidInputError(f"{path}: header announces {header['n']} records, found {len(records)}")
    return Dataset(p0, z, labels, renormalize=True)


def params_method(params) -> str:
    if isinstance(params, MattaParams):
        return "matta"
    if isinstance(params, VattaParams):
        return "vatta"
    if isinstance(params, TemperatureParams):
        return "temperature"
    if isinstance(params, BinningParams):
        return params.mode
    raise InvalidInputError(f"unsupported parameter type {type(params).__name__}")


def write_params(path, params, k: int | None = None, m: int | None = None) -> None:
    method = params_method(params)
    header = {"format": PARAMS, "version": VERSION, "method": method}
    if method == "matta":
        header.update(k=params.k, m=params.m)
        body = {"W": params.W, "omega_star": params.omega_star}
    elif method == "vatta":
        header.update(k=k, m=params.m)
        body = {"w": params.w, "omega_star": params.omega_star}
    elif method == "temperature":
        header.update(k=k, m=m)
        body = {"T": params.T}
    else:
        header.update(k=k, m=m)
        body = {"edges": params.edges, "values": params.values}
    _write_lines(path, [header, body])


def read_params(path):
    """Returns ``(params, header)``."""
    header, records = _read_lines(path, PARAMS)
    if len(records) != 1 or not isinstance(records[0], dict):
        raise InvalidInputError(f"{path}: expected exactly one parameter record")
    body = records[0]
    method = header.get("method")
    try:
        if method == "matta":
            W = np.array(body["W"], dtype=np.float64)
            if W.shape != (header["k"], header["m"]):
                raise InvalidInputError(f"{path}: W shape {W.shape} disagrees with header")
            params = MattaParams(W, body["omega_star"])
        elif method == "vatta":
            params = VattaParams(np.array(body["w"], dtype=np.float64), body["omega_star"])
            if params.m != header["m"]:
                raise InvalidInputError(f"{path}: w length disagrees with header")
        elif method == "temperature":
            params = TemperatureParams(float(body["T"]))
        elif method in ("isotonic", "histogram"):
            params = BinningParams(body["edges"], body["values"], method)
        else:
            raise InvalidInputError(f"{path}: unknown method {method!r}")
    except (KeyError, TypeError) as exc:
        raise InvalidInputError(f"{path}: malformed parameter record ({exc})") from exc
    return params, header


def write_predictions(path, preds, labels=None, method: str = "vanilla") -> None:
    preds = np.asarray(preds)
    header = {"format": PREDICTIONS, "version": VERSION, "k": preds.shape[1], "n": preds.shape[0],
              "method": method}

    def records():
        yield header
        for i in range(preds.shape[0]):
            yield {"p": preds[i], "label": None if labels is None else int(labels[i])}

    _write_lines(path, records())


def read_predictions(path):
    """Returns ``(preds, labels)``; ``labels`` is None if any record lacks one."""
    header, records = _read_lines(path, PREDICTIONS)
    if not records:
        raise InvalidInputError(f"{path}: no predictions")
    try:
        preds = np.array([r["p"] for r in records], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInputError(f"{path}: malformed record ({exc})") from exc
    if preds.ndim != 2 or preds.shape[1] != header.get("k"):
        raise InvalidInputError(f"{path}: records do not match header k={header.get('k')}")
    preds = check_probs(preds, renormalize=True)
    raw_labels = [r.get("label") for r in records]
    labels = None if any(lb is None for lb in raw_labels) else np.array(raw_labels, dtype=np.int64)
    return preds, labels


def write_report(path, report: CalibrationReport, **meta) -> None:
    header = {"format": REPORT, "version": VERSION, "n": report.n_samples,
              "n_bins": report.reliability.n_bins}
    header.update(meta)
    lines = [header, {"metrics": report.scores()}]
    lines.extend(report.reliability.rows())
    if report.extra:
        lines.append(dict(report.extra))
    _write_lines(path, lines)


def write_fit_report(path, method: str, loss_history, best_epoch: int, **meta) -> None:
    header = {"format": REPORT, "version": VERSION, "method": method, "kind": "fit"}
    header.update(meta)
    _write_lines(path, [header, {"best_epoch": best_epoch, "loss_history": list(loss_history)}])


def read_report(path):
    """Returns ``(header, records)``; a metric report is rebuilt as CalibrationReport."""
    header, records = _read_lines(path, REPORT)
    if header.get("kind") == "fit":
        return header, records[0] if records else {}
    try:
        scores = records[0]["metrics"]
        bins = [r for r in records[1:] if "bin" in r]
        extra = {}
        for r in records[1:]:
            if "bin" not in r:
                extra.update(r)
        edges = np.array([b["lower"] for b in bins] + [bins[-1]["upper"]], dtype=np.float64)
        table = ReliabilityTable(
            edges=edges,
            counts=np.array([b["count"] for b in bins], dtype=np.int64),
            conf=np.array([b["conf"] for b in bins], dtype=np.float64),
            acc=np.array([b["acc"] for b in bins], dtype=np.float64),
        )
        report = CalibrationReport(
            brier=float(scores["brier"]),
            mc_brier=float(scores["mc_brier"]),
            ece=float(scores["ece"]),
            nll=float(scores["nll"]),
            accuracy=float(scores["accuracy"]),
            n_samples=int(header["n"]),
            reliability=table,
            extra=extra,
        )
    except (KeyError, IndexError, TypeError) as exc:
        raise InvalidInputError(f"{path}: malformed report ({exc})") from exc
    return header, report
