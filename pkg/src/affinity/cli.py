"""Command-line interface.

Subcommands operate standalone: ``simulate`` writes a couples CSV,
``estimate``/``saliency``/``ranktest`` run increasing portions of the
analysis on a CSV, ``ipfp`` solves a single equilibrium, and ``report``
runs the full pipeline and writes the report artifacts.
"""

import json
import os
import sys

import click
import numpy as np

from .core import MatchedSample, standardize, variance_matrices
from .errors import AffinityError
from .estimator import fit_affinity
from .inference import asymptotic_covariance, rank_test, sorting_dimension
from .io import RunConfig, emit, ingest_csv, run_pipeline, worker_count, write_csv
from .saliency import saliency as run_saliency
from .schrodinger import IpfpConfig, solve_ipfp
from .simulate import simulate_gaussian_1d, simulate_gaussian_diagonal


def _cols(value):
    return tuple(c.strip() for c in value.split(",") if c.strip())


def _config(input, x_cols, y_cols, **kw):
    return RunConfig(input=input, x_cols=_cols(x_cols), y_cols=_cols(y_cols), **kw)


def _load(cfg):
    sample, dropped = ingest_csv(cfg.input, cfg.x_cols, cfg.y_cols)
    std_sample, _ = standardize(sample)
    return std_sample, dropped


_shared = [
    click.option("--input", required=True, type=click.Path(exists=True),
                 help="couples CSV with a header row"),
    click.option("--x-cols", required=True, help="comma-separated x-side columns"),
    click.option("--y-cols", required=True, help="comma-separated y-side columns"),
    click.option("--tol", default=1e-10, show_default=True,
                 help="marginal sup-norm tolerance"),
    click.option("--max-iter", default=10000, show_default=True),
]


def shared_options(fn):
    for opt in reversed(_shared):
        fn = opt(fn)
    return fn


@click.group()
@click.version_option()
def main():
    """Affinity-matrix estimation for bipartite matching markets."""
    worker_count()  # validates AFFINITY_THREADS early


@main.command()
@shared_options
@click.option("--sigma-normalize/--no-sigma-normalize", default=True,
              help="report A with unit Frobenius norm and separate sigma")
def estimate(input, x_cols, y_cols, tol, max_iter, sigma_normalize):
    """Fit the affinity matrix on a couples CSV."""
    cfg = _config(input, x_cols, y_cols, tol=tol, max_iter=max_iter,
                  sigma_normalize=sigma_normalize)
    sample, dropped = _load(cfg)
    model, report = fit_affinity(sample, cfg.fit_config())
    out = {
        "b_matrix": report.b_hat.tolist(),
        "a_matrix": model.a_matrix.tolist(),
        "sigma": model.sigma,
        "moment_gap": report.moment_gap,
        "newton_iterations": report.iterations,
        "n_couples": sample.n,
        "rows_dropped": dropped,
    }
    click.echo(json.dumps(out, sort_keys=True, indent=2))


@main.command(name="saliency")
@shared_options
def saliency_cmd(input, x_cols, y_cols, tol, max_iter):
    """Fit and decompose into saliency indices."""
    cfg = _config(input, x_cols, y_cols, tol=tol, max_iter=max_iter)
    sample, _ = _load(cfg)
    model, _report = fit_affinity(sample, cfg.fit_config())
    s_x, s_y = variance_matrices(sample)
    res = run_saliency(model, s_x, s_y)
    out = {
        "singular_values": res.lam.tolist(),
        "shares": res.shares.tolist(),
        "loadings_x": res.loadings_x.tolist(),
        "loadings_y": res.loadings_y.tolist(),
    }
    click.echo(json.dumps(out, sort_keys=True, indent=2))


@main.command()
@shared_options
@click.option("--alpha", default=0.05, show_default=True, help="test level")
def ranktest(input, x_cols, y_cols, tol, max_iter, alpha):
    """Test the number of sorting dimensions."""
    cfg = _config(input, x_cols, y_cols, tol=tol, max_iter=max_iter, alpha=alpha)
    sample, _ = _load(cfg)
    model, report = fit_affinity(sample, cfg.fit_config())
    cov = asymptotic_covariance(sample, model, report.coupling)
    d = min(sample.d_x, sample.d_y)
    rows = []
    for p in range(1, d):
        r = rank_test(cov.theta, cov.v_theta, sample.n, p)
        rows.append({"p": p, "statistic": r.statistic, "df": r.df,
                     "p_value": r.p_value})
    dim = sorting_dimension(sample, model, report.coupling, alpha=alpha)
    click.echo(json.dumps({"tests": rows, "sorting_dimension": dim},
                          sort_keys=True, indent=2))


@main.command(name="simulate")
@click.option("--sigma", default=1.0, show_default=True,
              help="heterogeneity scale of the scalar design")
@click.option("--b-diag", default=None,
              help="comma-separated diagonal of B (overrides --sigma)")
@click.option("--n", default=1000, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
def simulate_cmd(sigma, b_diag, n, seed, out):
    """Write a synthetic couples CSV from a Gaussian design."""
    if b_diag:
        diag = [float(v) for v in b_diag.split(",")]
        sample = simulate_gaussian_diagonal(diag, n, seed)
    else:
        sample = simulate_gaussian_1d(sigma, n, seed)
    write_csv(out, sample)
    click.echo(f"wrote {n} couples to {out}")


@main.command()
@shared_options
@click.option("--sigma", default=1.0, show_default=True)
@click.option("--affinity", "affinity_json", default=None,
              help="JSON-encoded affinity matrix (default: cross-covariance)")
def ipfp(input, x_cols, y_cols, tol, max_iter, sigma, affinity_json):
    """Solve one matching equilibrium on the empirical supports."""
    from .core import cross_covariance
    from .estimator import FitConfig, fit_marginals

    cfg = _config(input, x_cols, y_cols, tol=tol, max_iter=max_iter)
    sample, _ = _load(cfg)
    if affinity_json:
        a = np.array(json.loads(affinity_json), dtype=float)
    else:
        a = cross_covariance(sample)
    p, q, compressed = fit_marginals(sample, cfg.fit_config())
    phi = p.support @ a @ q.support.T
    coupling, potentials, report = solve_ipfp(
        phi, sigma, p, q, IpfpConfig(tol=tol, max_iter=max_iter)
    )
    out = {
        "iterations": report.iterations,
        "final_error": report.final_error,
        "backend": report.backend,
        "marginal_error": coupling.marginal_error(),
        "support_compressed": compressed,
        "potential_a_range": [float(potentials.a.min()), float(potentials.a.max())],
        "potential_b_range": [float(potentials.b.min()), float(potentials.b.max())],
    }
    click.echo(json.dumps(out, sort_keys=True, indent=2))


@main.command()
@shared_options
@click.option("--bootstrap", default=0, show_default=True,
              help="bootstrap replicates for share spreads")
@click.option("--seed", default=0, show_default=True)
@click.option("--alpha", default=0.05, show_default=True)
@click.option("--sigma-normalize/--no-sigma-normalize", default=True)
@click.option("--out", default=".", type=click.Path(), show_default=True)
@click.option("--format", "formats", multiple=True,
              type=click.Choice(["json", "text"]), default=("json", "text"))
@click.option("--force", is_flag=True, help="overwrite other configs' outputs")
def report(input, x_cols, y_cols, tol, max_iter, bootstrap, seed, alpha,
           sigma_normalize, out, formats, force):
    """Run the full pipeline and write report artifacts."""
    cfg = _config(input, x_cols, y_cols, tol=tol, max_iter=max_iter,
                  bootstrap=bootstrap, seed=seed, alpha=alpha,
                  sigma_normalize=sigma_normalize, out=out,
                  formats=tuple(sorted(set(formats))))
    result = run_pipeline(cfg)
    written = emit(result, out, cfg.formats, force=force)
    for path in written:
        click.echo(f"wrote {path}")


def entrypoint():
    # click handles its own usage errors; domain errors exit with status 2
    try:
        main()
    except AffinityError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)


if __name__ == "__main__":
    entrypoint()
