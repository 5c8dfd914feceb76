"""Command-line interface: simulate / fit / gof / bootstrap / quantile /
mc-study with JSON reports and CSV tables."""

from __future__ import annotations

import csv
import io
import json
import os
import sys
import tempfile
from pathlib import Path

import click
import numpy as np

from . import datasets, model
from .em import EmConfig, FitFailureError, fit_em
from .inference import (
    BootstrapConfig,
    GofMethod,
    bootstrap_ci,
    cdf_export,
    ks_gof,
    quantile_from_fit,
)
from .sampling import SimRequest, generate_sample
from .study import (
    StudyConfig,
    run_fixed_alpha_comparison,
    run_point_study,
    run_quantile_study,
)
from .types import CdfFamily, CensoredSample, DegenerateDataError, MixtureParams

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_FIT_FAILURE = 3


def _fmt(x):
    """Stable 10-significant-digit text form for floats."""
    if isinstance(x, float):
        return format(x, ".10g")
    return x


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"unserializable object {obj!r}")


def _round_floats(obj):
    if isinstance(obj, float):
        return float(format(obj, ".10g"))
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def _write_atomic(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(path: Path, payload: dict):
    payload = {"schema": SCHEMA_VERSION, **_round_floats(payload)}
    _write_atomic(path, json.dumps(payload, indent=2, default=_json_default) + "\n")


def _write_csv(path: Path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["NA" if v is None else _fmt(v) for v in row])
    _write_atomic(path, buf.getvalue())


class CliError(click.ClickException):
    exit_code = EXIT_FIT_FAILURE


def _fail(ctx, message, code=EXIT_FIT_FAILURE):
    if ctx.obj and ctx.obj.get("json_errors"):
        click.echo(json.dumps({"schema": SCHEMA_VERSION, "error": message}),
                   err=True)
    else:
        click.echo(f"error: {message}", err=True)
    ctx.exit(code)


def _load_sample(ctx, data, n, r, tau):
    """Resolve --data: bundled:<name>, a sampler CSV, or a bare time list."""
    if data.startswith("bundled:"):
        name = data.split(":", 1)[1]
        try:
            return datasets.load_bundled(name)
        except KeyError as exc:
            raise click.UsageError(str(exc))
    path = Path(data)
    if not path.exists():
        raise click.UsageError(f"data file not found: {data}")
    with open(path, newline="") as fh:
        first = fh.readline().strip()
        fh.seek(0)
        if first.startswith("index,"):
            reader = csv.DictReader(fh)
            times = [float(row["time"]) for row in reader]
            sidecar = path.with_suffix(".json")
            if sidecar.exists() and (n is None or tau is None):
                meta = json.loads(sidecar.read_text())
                n = n if n is not None else meta.get("n")
                tau = tau if tau is not None else meta.get("tau")
        else:
            times = [float(line) for line in fh if line.strip()]
    if tau is None:
        raise click.UsageError("--tau is required for this data source")
    if r is not None and r != len(times):
        raise click.UsageError(
            f"--r {r} does not match the {len(times)} recorded times"
        )
    n = n if n is not None else len(times)
    try:
        return CensoredSample(times=np.sort(np.array(times)), n=n, tau=tau)
    except ValueError as exc:
        raise click.UsageError(str(exc))


def _params_from_options(alpha, lambda1, lambda2, pi, tau):
    lam2 = tuple(float(v) for v in lambda2.split(","))
    piv = tuple(float(v) for v in pi.split(","))
    try:
        return MixtureParams(alpha=alpha, lambda1=lambda1, lambda2=lam2,
                             pi=piv, tau=tau)
    except ValueError as exc:
        raise click.UsageError(str(exc))


_FAMILIES = {
    "hazard": CdfFamily.HAZARD_MIXTURE,
    "population": CdfFamily.POPULATION_MIXTURE,
}


@click.group()
@click.option("--json-errors", is_flag=True,
              help="Emit machine-readable error objects on stderr.")
@click.option("--workers", type=int, default=None, envvar="HSSALT_WORKERS",
              help="Worker count hint for replication loops.")
@click.pass_context
def main(ctx, json_errors, workers):
    """Heterogeneous step-stress Weibull lifetime modeling."""
    ctx.obj = {"json_errors": json_errors, "workers": workers}


@main.command()
@click.option("--alpha", type=float, required=True)
@click.option("--lambda1", type=float, required=True)
@click.option("--lambda2", required=True, help="Comma-separated stage-2 rates.")
@click.option("--pi", required=True, help="Comma-separated mixing proportions.")
@click.option("--tau", type=float, required=True)
@click.option("--n", type=int, required=True)
@click.option("--r", type=int, required=True)
@click.option("--seed", type=int, default=0)
@click.option("--replication-index", type=int, default=0)
@click.option("--emit-labels", is_flag=True)
@click.option("--out", type=click.Path(), default="sample.csv",
              help="Output CSV path; a JSON sidecar is written next to it.")
@click.pass_context
def simulate(ctx, alpha, lambda1, lambda2, pi, tau, n, r, seed,
             replication_index, emit_labels, out):
    """Generate one Type-II censored dataset."""
    if r > n:
        raise click.UsageError("r exceeds n")
    params = _params_from_options(alpha, lambda1, lambda2, pi, tau)
    req = SimRequest(params=params, n=n, r=r, seed=seed,
                     replication_index=replication_index,
                     emit_labels=emit_labels)
    drawn = generate_sample(req)
    out = Path(out)
    rows = []
    if not drawn.discarded:
        sample = drawn.sample
        for i, t in enumerate(sample.times, start=1):
            stage = 1 if t <= tau else 2
            label = None
            if emit_labels and stage == 2:
                label = int(drawn.labels[i - 1 - sample.n1]) + 1
            rows.append((i, t, stage, label))
    _write_csv(out, ["index", "time", "stage", "label"], rows)
    _write_json(out.with_suffix(".json"), {
        "params": params.to_dict(),
        "n": n, "r": r, "tau": tau, "seed": seed,
        "replication_index": replication_index,
        "n1": drawn.n1,
        "discarded": drawn.discarded,
    })
    if drawn.discarded:
        click.echo("warning: degenerate draw, sample discarded", err=True)


def _em_config(m, alpha_fixed, starts, seed, max_iter, tol):
    return EmConfig(m=m, alpha_fixed=alpha_fixed, n_starts=starts, seed=seed,
                    max_iterations=max_iter, param_tol=tol)


@main.command()
@click.option("--data", required=True,
              help="Sampler CSV, bare time file, or bundled:<name>.")
@click.option("--n", type=int, default=None)
@click.option("--r", type=int, default=None)
@click.option("--tau", type=float, default=None)
@click.option("--m", type=int, default=2)
@click.option("--alpha-fixed", type=float, default=None)
@click.option("--starts", type=int, default=10)
@click.option("--seed", type=int, default=0)
@click.option("--max-iter", type=int, default=2000)
@click.option("--tol", type=float, default=1e-6)
@click.option("--out", type=click.Path(), default="fit.json")
@click.pass_context
def fit(ctx, data, n, r, tau, m, alpha_fixed, starts, seed, max_iter, tol, out):
    """EM fit; writes a JSON fit report."""
    sample = _load_sample(ctx, data, n, r, tau)
    cfg = _em_config(m, alpha_fixed, starts, seed, max_iter, tol)
    try:
        result = fit_em(sample, cfg)
    except (DegenerateDataError, FitFailureError) as exc:
        _fail(ctx, str(exc))
        return
    report = result.to_dict()
    report["sample"] = {"n": sample.n, "r": sample.r, "tau": sample.tau,
                        "n1": sample.n1}
    report["config"] = cfg.to_dict()
    _write_json(Path(out), report)
    if not result.converged:
        click.echo("warning: EM did not converge within the iteration budget",
                   err=True)


@main.command()
@click.option("--data", required=True)
@click.option("--n", type=int, default=None)
@click.option("--r", type=int, default=None)
@click.option("--tau", type=float, default=None)
@click.option("--fit-report", type=click.Path(exists=True), required=True,
              help="JSON fit report holding the parameters to test.")
@click.option("--family", type=click.Choice(sorted(_FAMILIES)),
              default="population")
@click.option("--method", type=click.Choice(["asymptotic", "bootstrap"]),
              default="asymptotic")
@click.option("--scale-by-r", is_flag=True,
              help="Empirical steps i/r instead of i/n.")
@click.option("--out", type=click.Path(), default="gof.json")
@click.option("--cdf-out", type=click.Path(), default=None,
              help="Also export the empirical/fitted CDF table as CSV.")
@click.pass_context
def gof(ctx, data, n, r, tau, fit_report, family, method, scale_by_r, out,
        cdf_out):
    """Kolmogorov-Smirnov goodness of fit for a fitted model."""
    sample = _load_sample(ctx, data, n, r, tau)
    params = MixtureParams.from_dict(
        json.loads(Path(fit_report).read_text())["params"]
    )
    fam = _FAMILIES[family]
    meth = (GofMethod.ASYMPTOTIC_KOLMOGOROV if method == "asymptotic"
            else GofMethod.PARAMETRIC_BOOTSTRAP)
    report = ks_gof(sample, params, fam, meth, scale_by_r=scale_by_r)
    _write_json(Path(out), report.to_dict())
    if cdf_out:
        _write_csv(Path(cdf_out), ["t", "empirical", "fitted"],
                   cdf_export(sample, params, fam))


@main.command()
@click.option("--data", required=True)
@click.option("--n", type=int, default=None)
@click.option("--r", type=int, default=None)
@click.option("--tau", type=float, default=None)
@click.option("--m", type=int, default=2)
@click.option("--alpha-fixed", type=float, default=None)
@click.option("--starts", type=int, default=10)
@click.option("--seed", type=int, default=0)
@click.option("--b", "b_reps", type=int, default=1000)
@click.option("--level", type=float, default=0.95)
@click.option("--refit-starts", type=int, default=4)
@click.option("--out", type=click.Path(), default="bootstrap.json")
@click.pass_context
def bootstrap(ctx, data, n, r, tau, m, alpha_fixed, starts, seed, b_reps,
              level, refit_starts, out):
    """Fit, then parametric-bootstrap confidence intervals."""
    sample = _load_sample(ctx, data, n, r, tau)
    cfg = _em_config(m, alpha_fixed, starts, seed, 2000, 1e-6)
    try:
        fit_result = fit_em(sample, cfg)
        result = bootstrap_ci(
            sample, fit_result,
            BootstrapConfig(B=b_reps, level=level, seed=seed,
                            refit=EmConfig(m=m, alpha_fixed=alpha_fixed,
                                           n_starts=refit_starts)),
        )
    except (DegenerateDataError, FitFailureError) as exc:
        _fail(ctx, str(exc))
        return
    payload = result.to_dict()
    payload["fit"] = fit_result.to_dict()
    _write_json(Path(out), payload)
    if result.unreliable:
        click.echo("warning: more than 20% of bootstrap replicates were "
                   "dropped; intervals may be unreliable", err=True)


@main.command()
@click.option("--data", required=True)
@click.option("--n", type=int, default=None)
@click.option("--r", type=int, default=None)
@click.option("--tau", type=float, default=None)
@click.option("--m", type=int, default=2)
@click.option("--alpha-fixed", type=float, default=None)
@click.option("--starts", type=int, default=10)
@click.option("--seed", type=int, default=0)
@click.option("--q", "q_levels", required=True,
              help="Comma-separated quantile levels in (0, 1).")
@click.option("--family", type=click.Choice(sorted(_FAMILIES)),
              default="hazard")
@click.option("--out", type=click.Path(), default="quantiles.json")
@click.pass_context
def quantile(ctx, data, n, r, tau, m, alpha_fixed, starts, seed, q_levels,
             family, out):
    """Fit, then report plug-in quantile estimates."""
    sample = _load_sample(ctx, data, n, r, tau)
    levels = [float(v) for v in q_levels.split(",")]
    if any(not 0 < q < 1 for q in levels):
        raise click.UsageError("quantile levels must lie in (0, 1)")
    cfg = _em_config(m, alpha_fixed, starts, seed, 2000, 1e-6)
    try:
        fit_result = fit_em(sample, cfg)
    except (DegenerateDataError, FitFailureError) as exc:
        _fail(ctx, str(exc))
        return
    estimates = quantile_from_fit(fit_result, levels, _FAMILIES[family],
                                  force=True)
    _write_json(Path(out), {
        "family": family,
        "quantiles": [{"q": e.q, "value": e.value} for e in estimates],
        "fit": fit_result.to_dict(),
    })


def _study_config(payload: dict) -> StudyConfig:
    em_payload = payload.get("em", {})
    em_cfg = EmConfig(
        m=em_payload.get("m", 2),
        max_iterations=em_payload.get("max_iterations", 2000),
        param_tol=em_payload.get("param_tol", 1e-6),
        loglik_tol=em_payload.get("loglik_tol", 1e-8),
        n_starts=em_payload.get("n_starts", 10),
        alpha_fixed=em_payload.get("alpha_fixed"),
        seed=em_payload.get("seed", 0),
    )
    return StudyConfig(
        true_params=MixtureParams.from_dict(payload["true_params"]),
        grid=[tuple(cell) for cell in payload["grid"]],
        replications=payload.get("replications", 1000),
        q_levels=tuple(payload.get("q_levels", ())),
        seed=payload.get("seed", 0),
        em=em_cfg,
        quantile_family=_FAMILIES[payload.get("quantile_family", "population")],
    )


@main.command("mc-study")
@click.option("--config", "config_path", type=click.Path(exists=True),
              required=True, help="JSON study configuration.")
@click.option("--kind", type=click.Choice(["point", "quantile", "fixed-alpha"]),
              default="point")
@click.option("--out-dir", type=click.Path(), default=".")
@click.pass_context
def mc_study(ctx, config_path, kind, out_dir):
    """Run a Monte Carlo study and emit CSV tables."""
    payload = json.loads(Path(config_path).read_text())
    try:
        cfg = _study_config(payload)
    except (KeyError, ValueError) as exc:
        raise click.UsageError(f"bad study config: {exc}")
    out_dir = Path(out_dir)
    if kind == "point":
        rows = run_point_study(cfg)
        cols = rows[0].param_columns()
        _write_csv(out_dir / "point_study.csv", list(cols),
                   [list(row.param_columns().values()) for row in rows])
    elif kind == "fixed-alpha":
        rows = run_fixed_alpha_comparison(cfg)
        cols = rows[0].param_columns()
        _write_csv(out_dir / "point_study.csv", list(cols),
                   [list(row.param_columns().values()) for row in rows])
    else:
        rows, per_rep = run_quantile_study(cfg)
        header = ["n", "r", "tau", "model", "q", "truth", "mean", "rmse",
                  "fits_used", "fits_failed", "discards"]
        table = []
        for row in rows:
            for (label, q), cell in sorted(row.quantiles.items()):
                table.append([row.n, row.r, row.tau, label, q, cell["truth"],
                              cell["mean"], cell["rmse"], row.fits_used,
                              row.fits_failed, row.discards])
        _write_csv(out_dir / "quantile_study.csv", header, table)
        rep_rows = []
        for (n_, r_, tau_), block in per_rep.items():
            for label in ("hssalt", "ssalt"):
                arr = block[label]
                for rep in range(arr.shape[0]):
                    for k, q in enumerate(block["q_levels"]):
                        rep_rows.append([n_, r_, tau_, label, rep, q,
                                         arr[rep, k]])
        _write_csv(out_dir / "per_replication.csv",
                   ["n", "r", "tau", "model", "replication", "q", "estimate"],
                   rep_rows)


if __name__ == "__main__":
    main()
