"""Command-line front end.

Exit codes: 0 success, 1 validation or usage error, 2 I/O error.
"""
from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click
import numpy as np

from . import augment as aug
from . import formats, metrics, synth
from .atta import DEFAULT_EPSILON
from .calibrators import apply_method, fit_method
from .core import Dataset, InvalidInputError
from .optim import FitConfig

logger = logging.getLogger("attacal")


@click.group()
@click.option("-v", "--verbose", count=True, help="Repeat for more log output.")
def main(verbose):
    """Calibrate classifier outputs with adaptive test-time augmentation and post-hoc baselines."""
    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@main.command("synth")
@click.option("--output", "-o", required=True, type=click.Path(dir_okay=False))
@click.option("--n", "n", default=1000, show_default=True, type=int)
@click.option("--k", "k", default=10, show_default=True, type=int)
@click.option("--m", "m", default=2, show_default=True, type=int)
@click.option("--temperature", default=1.0, show_default=True, type=float,
              help="Distortion temperature of the original head (<1 overconfident).")
@click.option("--quality", multiple=True, type=float,
              help="Per-type augmentation quality in [0, 1]; repeat once per type.")
@click.option("--logit-scale", default=2.0, show_default=True, type=float)
@click.option("--noise-scale", default=0.5, show_default=True, type=float)
@click.option("--seed", default=0, show_default=True, type=int)
def synth_cmd(output, n, k, m, temperature, quality, logit_scale, noise_scale, seed):
    """Write a synthetic dataset."""
    spec = synth.SynthSpec(k=k, m=m, n=n, temperature=temperature,
                           quality=quality or None,
                           logit_scale=logit_scale, noise_scale=noise_scale, seed=seed)
    ds, _ = synth.generate(spec)
    formats.write_dataset(output, ds)
    click.echo(f"wrote {len(ds)} records (k={ds.k}, m={ds.m}) to {output}")


@main.command("fit")
@click.option("--input", "-i", "input_path", required=True, type=click.Path(dir_okay=False))
@click.option("--output", "-o", required=True, type=click.Path(dir_okay=False))
@click.option("--method", required=True, type=click.Choice(formats.METHODS))
@click.option("--report", "report_path", type=click.Path(dir_okay=False),
              help="Where to write the loss history (M/V-ATTA only).")
@click.option("--epochs", default=500, show_default=True, type=int)
@click.option("--batch-size", default=500, show_default=True, type=int)
@click.option("--lr", default=0.001, show_default=True, type=float)
@click.option("--bins", default=15, show_default=True, type=int, help="Histogram binning bins.")
@click.option("--seed", default=0, show_default=True, type=int)
def fit_cmd(input_path, output, method, report_path, epochs, batch_size, lr, bins, seed):
    """Fit calibration parameters on a validation dataset."""
    if method == "vanilla":
        raise click.UsageError("vanilla has no parameters to fit")
    ds = formats.read_dataset(input_path)
    config = FitConfig(epochs=epochs, batch_size=batch_size, learning_rate=lr, seed=seed)
    params, result = fit_method(method, ds, config, n_bins=bins)
    formats.write_params(output, params, k=ds.k, m=ds.m)
    if result is not None:
        logger.info("best epoch %d, loss %.6f", result.best_epoch, result.loss_history[result.best_epoch])
        if report_path:
            formats.write_fit_report(report_path, method, result.loss_history, result.best_epoch,
                                     seed=seed, epochs=epochs, batch_size=batch_size, lr=lr)
    click.echo(f"wrote {method} parameters to {output}")


@main.command("apply")
@click.option("--input", "-i", "input_path", required=True, type=click.Path(dir_okay=False))
@click.option("--output", "-o", required=True, type=click.Path(dir_okay=False))
@click.option("--params", "params_path", type=click.Path(dir_okay=False),
              help="Parameter file from `fit`; omit for --method vanilla.")
@click.option("--method", type=click.Choice(formats.METHODS),
              help="Defaults to the method recorded in the parameter file.")
@click.option("--omega-eps", default=DEFAULT_EPSILON, show_default=True, type=float)
def apply_cmd(input_path, output, params_path, method, omega_eps):
    """Write calibrated predictions for every record of a dataset."""
    ds = formats.read_dataset(input_path)
    params = None
    if params_path:
        params, header = formats.read_params(params_path)
        if method is not None and method != header["method"]:
            raise InvalidInputError(f"parameter file holds {header['method']}, not {method}")
        method = header["method"]
        _check_compatible(header, ds)
    elif method not in (None, "vanilla"):
        raise click.UsageError(f"--params is required for method {method}")
    method = method or "vanilla"
    preds = apply_method(method, params, ds, omega_eps)
    formats.write_predictions(output, preds, ds.labels, method=method)
    click.echo(f"wrote {len(preds)} {method} predictions to {output}")


def _check_compatible(header: dict, ds: Dataset) -> None:
    for key, actual in (("k", ds.k), ("m", ds.m)):
        expected = header.get(key)
        if expected is not None and expected != actual:
            raise InvalidInputError(f"parameters expect {key}={expected}, dataset has {key}={actual}")


def _load_predictions(path):
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    try:
        kind = json.loads(first).get("format")
    except (json.JSONDecodeError, AttributeError) as exc:
        raise InvalidInputError(f"{path}: unreadable header") from exc
    if kind == formats.DATASET:
        ds = formats.read_dataset(path)
        return np.array(ds.p0), ds.labels
    return formats.read_predictions(path)


@main.command("eval")
@click.option("--input", "-i", "input_paths", required=True, multiple=True,
              type=click.Path(dir_okay=False),
              help="Prediction or dataset file; repeat to evaluate the concatenation.")
@click.option("--output", "-o", type=click.Path(dir_okay=False))
@click.option("--bins", default=metrics.DEFAULT_BINS, show_default=True, type=int)
def eval_cmd(input_paths, output, bins):
    """Compute Brier, mc-Brier, ECE, NLL and accuracy."""
    all_preds, all_labels = [], []
    for path in input_paths:
        preds, labels = _load_predictions(path)
        if labels is None:
            raise InvalidInputError(f"{path}: labels are required for evaluation")
        all_preds.append(preds)
        all_labels.append(labels)
    preds = np.concatenate(all_preds)
    labels = np.concatenate(all_labels)
    report = metrics.calibration_report(preds, labels, bins)
    if output:
        formats.write_report(output, report)
    _print_scores({Path(input_paths[0]).name: report.scores()})


def _print_scores(rows: dict) -> None:
    names = ("brier", "mc_brier", "ece", "nll", "accuracy")
    width = max(len(r) for r in rows) + 2
    click.echo("".ljust(width) + "".join(n.rjust(11) for n in names))
    for label, scores in rows.items():
        click.echo(label.ljust(width) + "".join(f"{scores[n]:11.5f}" for n in names))


@main.command("report")
@click.option("--input", "-i", "input_paths", required=True, multiple=True,
              type=click.Path(dir_okay=False))
@click.option("--bins-table", is_flag=True, help="Also print each reliability table.")
def report_cmd(input_paths, bins_table):
    """Summarise one or more report files side by side."""
    rows = {}
    for path in input_paths:
        header, report = formats.read_report(path)
        if header.get("kind") == "fit":
            history = report.get("loss_history", [])
            click.echo(f"{path}: {header.get('method')} fit, {len(history)} epochs, "
                       f"best epoch {report.get('best_epoch')} "
                       f"loss {history[report['best_epoch']]:.6f}" if history else f"{path}: empty fit")
            continue
        rows[Path(path).name] = report.scores()
        if bins_table:
            click.echo(f"{path}:")
            for r in report.reliability.rows():
                click.echo(f"  ({r['lower']:.3f}, {r['upper']:.3f}]  n={r['count']:6d}  "
                           f"conf={r['conf']:.4f}  acc={r['acc']:.4f}")
    if rows:
        _print_scores(rows)


@main.command("augment")
@click.option("--input", "-i", "input_dir", required=True, type=click.Path(file_okay=False))
@click.option("--output", "-o", "output_dir", required=True, type=click.Path(file_okay=False))
@click.option("--policy", "policy_number", default=8, show_default=True, type=click.IntRange(1, 8))
@click.option("--seed", default=0, show_default=True, type=int)
def augment_cmd(input_dir, output_dir, policy_number, seed):
    """Write the augmented copies of every image in a directory.

    Reads ``.atim`` tensors and binary ``.pgm``/``.ppm`` files; writes
    ``<stem>_t<type>_r<replicate>.atim``.
    """
    src = Path(input_dir)
    paths = sorted(p for p in src.iterdir() if p.suffix.lower() in (".atim", ".pgm", ".ppm", ".pnm"))
    if not paths:
        raise InvalidInputError(f"no images found in {input_dir}")
    dst = Path(output_dir)
    dst.mkdir(parents=True, exist_ok=True)
    count = 0
    for n, path in enumerate(paths):
        img = aug.read_image(path)
        pol = aug.policy(policy_number, seed=seed + n)
        for i, j, out in aug.apply_policy(img, pol):
            aug.write_tensor(dst / f"{path.stem}_t{i}_r{j}.atim", out)
            count += 1
    click.echo(f"wrote {count} augmented images for {len(paths)} inputs to {output_dir}")


def run(argv=None) -> int:
    """Entry point mapping failures onto the documented exit codes."""
    try:
        main.main(args=argv, prog_name="attacal", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except InvalidInputError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except OSError as exc:
        click.echo(f"I/O error: {exc}", err=True)
        return 2
    return 0


def entry() -> None:
    sys.exit(run())


if __name__ == "__main__":
    entry()
