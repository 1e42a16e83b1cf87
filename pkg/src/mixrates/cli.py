"""Command-line surface: fitting, loss evaluation, simulation, slopes.

Exit codes: 0 on success, 1 on data or validation errors, 2 on usage
errors (click's default for bad flags).  The worker pool for `reproduce`
is capped by the MIXRATES_THREADS environment variable.
"""

from __future__ import annotations

import json
import os
import sys

import click
import numpy as np

from . import experiments
from .em import EmConfig, InitStrategy, fit as em_fit, xi_log_n
from .errors import MixratesError
from .losses import loss_d, loss_dbar, loss_wtilde
from .measure import MixingMeasure, sample
from .transport import wasserstein


def _fail(message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


def _load_measure(path: str) -> MixingMeasure:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return MixingMeasure.from_json(f.read())
    except (OSError, ValueError, KeyError) as exc:
        _fail(f"cannot read measure file {path}: {exc}")


def _load_data(path: str) -> np.ndarray:
    try:
        with open(path, "r", encoding="utf-8") as f:
            first = f.readline()
        has_header = any(
            not _is_number(tok) for tok in first.strip().split(",") if tok
        )
        data = np.loadtxt(path, delimiter=",", skiprows=1 if has_header else 0, ndmin=2)
    except (OSError, ValueError) as exc:
        _fail(f"malformed data CSV {path}: {exc}")
    if data.size == 0:
        _fail(f"data CSV {path} is empty")
    return data


def _is_number(tok: str) -> bool:
    try:
        float(tok)
        return True
    except ValueError:
        return False


def _workers_default() -> int:
    env = os.environ.get("MIXRATES_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@click.group()
def main():
    """Penalized mixture fitting and refined-loss evaluation."""


@main.command("fit")
@click.option("--data", "data_path", required=True, type=click.Path())
@click.option("--k", required=True, type=int)
@click.option("--xi", default="logn", show_default=True,
              help='Penalty weight; the literal "logn" resolves to log(n).')
@click.option("--scale-mode", type=click.Choice(["fixed", "free"]), default="free",
              show_default=True)
@click.option("--fixed-cov", type=float, default=None,
              help="Isotropic variance for fixed scale mode.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None)
def cmd_fit(data_path, k, xi, scale_mode, fixed_cov, seed, out_path):
    """Fit a penalized Gaussian mixture of order at most K to a data CSV."""
    data = _load_data(data_path)
    n, d = data.shape
    if n < k:
        _fail(f"n < k: {n} observations for {k} components")
    xi_value = xi_log_n(n) if xi == "logn" else float(xi)
    fixed = None
    if scale_mode == "fixed":
        fixed = (fixed_cov if fixed_cov is not None else 1.0) * np.eye(d)
    cfg = EmConfig(k=k, xi=xi_value, scale_mode=scale_mode,
                   init=InitStrategy(variant="random_box"))
    try:
        if fixed is not None:
            from .em import initial_measure

            g_init = initial_measure(cfg, data, seed, fixed_covariance=fixed)
            cfg = EmConfig(k=k, xi=xi_value, scale_mode=scale_mode,
                           init=InitStrategy(variant="from_measure", g_init=g_init))
        result = em_fit(data, cfg, seed=seed)
    except MixratesError as exc:
        _fail(str(exc))
    doc = result.measure.to_json()
    if out_path:
        with open(out_path, "w", encoding="utf-8") as f:
            f.write(doc + "\n")
    click.echo(
        f"fitted order {result.measure.order} in {result.iterations} iterations "
        f"(converged={str(result.converged).lower()})"
    )
    click.echo(doc)


@main.command("loss")
@click.option("--loss", "loss_name", required=True,
              type=click.Choice(["d", "dbar", "wtilde", "wasserstein"]))
@click.option("--g", "g_path", required=True, type=click.Path())
@click.option("--g0", "g0_path", required=True, type=click.Path())
@click.option("--gstar", "gstar_path", type=click.Path(), default=None)
@click.option("--r", "order", type=float, default=None)
def cmd_loss(loss_name, g_path, g0_path, gstar_path, order):
    """Evaluate a loss between two measure files."""
    if loss_name == "wtilde" and gstar_path is None:
        raise click.UsageError("--loss wtilde requires --gstar")
    if loss_name == "wasserstein" and order is None:
        raise click.UsageError("--loss wasserstein requires --r")
    g = _load_measure(g_path)
    g0 = _load_measure(g0_path)
    try:
        if loss_name == "d":
            value = loss_d(g, g0)
        elif loss_name == "dbar":
            value = loss_dbar(g, g0)
        elif loss_name == "wtilde":
            value = loss_wtilde(g, g0, _load_measure(gstar_path))
        else:
            value = wasserstein(g, g0, order)
    except MixratesError as exc:
        _fail(f"{type(exc).__name__}: {exc}")
    click.echo(repr(float(value)))


@main.command("simulate")
@click.option("--g", "g_path", required=True, type=click.Path())
@click.option("--n", required=True, type=int)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def cmd_simulate(g_path, n, seed, out_path):
    """Draw a reproducible sample from a measure file into a CSV."""
    g = _load_measure(g_path)
    if g.fixed_covariance is None and not g.has_atom_covariances:
        _fail("measure file carries no covariances; cannot sample")
    try:
        data = sample(g, n, seed)
    except MixratesError as exc:
        _fail(str(exc))
    with open(out_path, "w", encoding="utf-8", newline="\n") as f:
        for row in data:
            f.write(",".join(repr(float(v)) for v in row) + "\n")
    click.echo(f"wrote {n} rows to {out_path}")


@main.command("slope")
@click.option("--in", "in_path", required=True, type=click.Path())
def cmd_slope(in_path):
    """Least-squares log-log slope of mean loss vs n for a records CSV."""
    try:
        records = experiments.read_records(in_path)
        slope = experiments.fit_slope(records)
    except (OSError, ValueError, MixratesError) as exc:
        _fail(str(exc))
    click.echo(json.dumps(_slope_doc(slope), indent=2))


def _slope_doc(slope: experiments.SlopeFit) -> dict:
    return {
        "slope": slope.slope,
        "intercept": slope.intercept,
        "slope_stderr": slope.slope_stderr,
        "per_n": {
            str(n): {"mean": slope.per_n_mean[n], "std": slope.per_n_std[n]}
            for n in sorted(slope.per_n_mean)
        },
    }


@main.command("reproduce")
@click.option("--model", required=True, type=click.Choice(["A", "B", "C"]))
@click.option("--k", required=True, type=int)
@click.option("--k0", type=int, default=None,
              help="True order (defaults: A=2, B=3, C=k).")
@click.option("--scale", type=click.Choice(["desk", "paper"]), default="desk",
              show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out-dir", required=True, type=click.Path())
def cmd_reproduce(model, k, k0, scale, seed, out_dir):
    """Run a convergence-rate experiment and write its CSV plus summary."""
    if k0 is None:
        k0 = {"A": 2, "B": 3, "C": k}[model]
    if scale == "desk":
        n_grid, reps = experiments.DESK_N_GRID, experiments.DESK_REPLICATES
    else:
        n_grid, reps = experiments.PAPER_N_GRID, experiments.PAPER_REPLICATES
    try:
        cfg = experiments.ExperimentConfig(
            model_name=model, k0=k0, k=k, n_grid=n_grid, replicates=reps,
            base_seed=seed, workers=_workers_default(),
        )
        # Validate the (model, k0, k) combination up front.
        experiments.build_model(model, k0, k, n_grid[0])
        records = experiments.run_experiment(cfg)
        slope = experiments.fit_slope(records)
    except MixratesError as exc:
        _fail(str(exc))
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"model{model}_k{k}.csv")
    summary_path = os.path.join(out_dir, f"model{model}_k{k}_summary.json")
    experiments.write_records(records, csv_path)
    doc = _slope_doc(slope)
    with open(summary_path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")
    click.echo(json.dumps(doc, indent=2))
    click.echo(f"records: {csv_path}")
    click.echo(f"summary: {summary_path}")


if __name__ == "__main__":
    main()
