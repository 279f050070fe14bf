"""Data ingestion, pipeline orchestration, and report emission.

Reports are written as canonical JSON (sorted keys, fixed separators) so
that a run with a fixed seed is byte-identical across invocations, plus a
human-readable text rendering.  Every output embeds the config hash; a
target directory holding results from a different config is not
overwritten unless forced.
"""

import csv
import hashlib
import json
import os
import tempfile
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .core import MatchedSample, standardize, variance_matrices
from .errors import (
    AffinityError,
    EmptyAfterFiltering,
    MissingColumn,
    NonNumericCell,
)
from .estimator import FitConfig, bootstrap_fit, fit_affinity
from .inference import asymptotic_covariance, rank_test
from .saliency import saliency
from .schrodinger import IpfpConfig

SIGNIFICANCE_Z = 1.96  # 5% two-sided normal critical value


@dataclass(frozen=True)
class RunConfig:
    input: str
    x_cols: tuple
    y_cols: tuple
    tol: float = 1e-10
    max_iter: int = 10000
    moment_tol: float = 1e-6
    support_cap: int = 2000
    bootstrap: int = 0
    seed: int = 0
    alpha: float = 0.05
    sigma_normalize: bool = True
    out: str = "."
    formats: tuple = ("json", "text")

    def fit_config(self):
        return FitConfig(
            moment_tol=self.moment_tol,
            support_cap=self.support_cap,
            ipfp=IpfpConfig(tol=self.tol, max_iter=self.max_iter),
        )

    def canonical(self):
        d = asdict(self)
        d["x_cols"] = list(d["x_cols"])
        d["y_cols"] = list(d["y_cols"])
        d["formats"] = sorted(d["formats"])
        return d

    def hash(self):
        blob = json.dumps(self.canonical(), sort_keys=True,
                          separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def worker_count(requested=None):
    """Worker parallelism cap honoring the AFFINITY_THREADS variable."""
    cap = os.environ.get("AFFINITY_THREADS")
    cap = int(cap) if cap else os.cpu_count() or 1
    return max(1, min(requested or cap, cap))


def ingest_csv(path, x_cols, y_cols):
    """Read couples from a headed CSV; one row per couple.

    Rows with an empty value in any mapped column are dropped (and
    counted); non-numeric non-empty cells are an error.  Unmapped columns
    are ignored.
    """
    x_cols = list(x_cols)
    y_cols = list(y_cols)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in x_cols + y_cols:
            if col not in header:
                raise MissingColumn(col)
        xs, ys = [], []
        dropped = 0
        for rownum, row in enumerate(reader):
            vals = {}
            missing = False
            for col in x_cols + y_cols:
                cell = (row[col] or "").strip()
                if cell == "":
                    missing = True
                    break
                try:
                    vals[col] = float(cell)
                except ValueError:
                    raise NonNumericCell(rownum, col, row[col]) from None
            if missing:
                dropped += 1
                continue
            xs.append([vals[c] for c in x_cols])
            ys.append([vals[c] for c in y_cols])
    if len(xs) < 2:
        raise EmptyAfterFiltering(
            f"{len(xs)} complete rows after dropping {dropped}"
        )
    sample = MatchedSample(np.array(xs), np.array(ys),
                           tuple(x_cols), tuple(y_cols))
    return sample, dropped


def write_csv(path, sample):
    """Write a MatchedSample as a headed CSV (round-trips via ingest_csv)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(sample.attribute_names_x) +
                        list(sample.attribute_names_y))
        for xr, yr in zip(sample.x, sample.y):
            writer.writerow([repr(float(v)) for v in xr] +
                            [repr(float(v)) for v in yr])


@dataclass(frozen=True)
class Report:
    affinity: dict
    saliency: dict
    rank_tests: tuple
    shares: dict
    provenance: dict
    notes: tuple = ()

    def to_dict(self):
        return {
            "version": 1,
            "affinity": self.affinity,
            "saliency": self.saliency,
            "rank_tests": list(self.rank_tests),
            "shares": self.shares,
            "provenance": self.provenance,
            "notes": list(self.notes),
        }


def _listify(a):
    return np.asarray(a).tolist()


def _star(estimate, std):
    return "*" if std > 0 and abs(estimate) / std > SIGNIFICANCE_Z else ""


def run_pipeline(cfg: RunConfig):
    """standardize -> fit -> saliency -> covariance -> rank tests ->
    optional bootstrap, assembled into a Report."""
    sample, dropped = ingest_csv(cfg.input, cfg.x_cols, cfg.y_cols)
    std_sample, scaling = standardize(sample)
    fit_cfg = cfg.fit_config()
    model, fit_report = fit_affinity(std_sample, fit_cfg)
    s_x, s_y = variance_matrices(std_sample)
    sal = saliency(model, s_x, s_y)

    notes = []
    b = fit_report.b_hat
    d = min(b.shape)
    rank_rows = []
    b_std = np.full(b.shape, np.nan)
    if fit_report.degenerate:
        notes.append("independence data: affinity is identically zero")
    else:
        cov = asymptotic_covariance(std_sample, model, fit_report.coupling)
        b_std = cov.b_std
        if d < 2:
            notes.append("rank test skipped: affinity matrix has a single "
                         "singular value")
        else:
            for p in range(1, d):
                try:
                    r = rank_test(cov.theta, cov.v_theta, std_sample.n, p)
                except AffinityError as exc:
                    rank_rows.append({"p": p, "error": repr(exc)})
                    continue
                rank_rows.append({
                    "p": p, "statistic": r.statistic, "df": r.df,
                    "p_value": r.p_value, "degenerate": r.degenerate,
                })

    shares = {
        "values": _listify(sal.shares),
        "cumulative": _listify(np.cumsum(sal.shares)),
    }
    if cfg.bootstrap > 0:
        boot = bootstrap_fit(std_sample, cfg.bootstrap, cfg.seed, fit_cfg)
        shares["std"] = _listify(boot.share_std)
        shares["bootstrap_reps"] = cfg.bootstrap
        shares["bootstrap_failures"] = len(boot.failures)
    else:
        notes.append("no bootstrap requested: share spread not reported")

    stars = [[_star(b[i, j], b_std[i, j]) for j in range(b.shape[1])]
             for i in range(b.shape[0])]
    affinity_block = {
        "b_matrix": _listify(b),
        "std_errors": _listify(b_std),
        "significant_5pct": stars,
        "a_matrix": _listify(model.a_matrix),
        "sigma": model.sigma if cfg.sigma_normalize else 1.0,
        "moment_gap": fit_report.moment_gap,
        "newton_iterations": fit_report.iterations,
        "x_attributes": list(std_sample.attribute_names_x),
        "y_attributes": list(std_sample.attribute_names_y),
    }
    saliency_block = {
        "singular_values": _listify(sal.lam),
        "loadings_x": _listify(sal.loadings_x),
        "loadings_y": _listify(sal.loadings_y),
        "degenerate_values": sal.degenerate_values,
    }
    provenance = {
        "seed": cfg.seed,
        "config": cfg.canonical(),
        "config_hash": cfg.hash(),
        "package_version": __version__,
        "n_couples": std_sample.n,
        "rows_dropped": dropped,
    }
    return Report(affinity_block, saliency_block, tuple(rank_rows),
                  shares, provenance, tuple(notes))


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def render_json(report):
    return json.dumps(report.to_dict(), sort_keys=True,
                      separators=(",", ":")) + "\n"


def _format_table(headers, rows):
    cols = [headers] + [[str(c) for c in row] for row in rows]
    widths = [max(len(r[i]) for r in cols) for i in range(len(headers))]
    lines = []
    for r, row in enumerate(cols):
        lines.append("  ".join(c.rjust(w) for c, w in zip(row, widths)))
        if r == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def render_text(report):
    out = []
    aff = report.affinity
    out.append("Affinity matrix (B = A/sigma; * significant at 5%)")
    headers = [""] + list(aff["y_attributes"])
    rows = []
    for i, name in enumerate(aff["x_attributes"]):
        cells = []
        for j in range(len(aff["y_attributes"])):
            star = aff["significant_5pct"][i][j]
            std = aff["std_errors"][i][j]
            cell = f"{aff['b_matrix'][i][j]:.4f}{star}"
            if np.isfinite(std):
                cell += f" ({std:.4f})"
            cells.append(cell)
        rows.append([name] + cells)
    out.append(_format_table(headers, rows))
    out.append(f"\nsigma = {aff['sigma']:.6f}   moment gap = "
               f"{aff['moment_gap']:.2e}")

    sal = report.saliency
    out.append("\nSaliency indices")
    k = len(sal["singular_values"])
    headers = [""] + [f"index {i + 1}" for i in range(k)]
    rows = [["singular value"] + [f"{v:.4f}" for v in sal["singular_values"]]]
    for i, name in enumerate(aff["x_attributes"]):
        rows.append([f"x:{name}"] +
                    [f"{sal['loadings_x'][r][i]:.4f}" for r in range(k)])
    for j, name in enumerate(aff["y_attributes"]):
        rows.append([f"y:{name}"] +
                    [f"{sal['loadings_y'][r][j]:.4f}" for r in range(k)])
    rows.append(["share"] + [f"{v:.4f}" for v in report.shares["values"]])
    rows.append(["cumulative share"] +
                [f"{v:.4f}" for v in report.shares["cumulative"]])
    if "std" in report.shares:
        rows.append(["share std (bootstrap)"] +
                    [f"{v:.4f}" for v in report.shares["std"]])
    out.append(_format_table(headers, rows))

    if report.rank_tests:
        out.append("\nRank tests (H0: rank <= p)")
        headers = ["p", "statistic", "df", "p-value"]
        rows = []
        for row in report.rank_tests:
            if "error" in row:
                rows.append([row["p"], row["error"], "", ""])
            else:
                rows.append([row["p"], f"{row['statistic']:.4f}", row["df"],
                             f"{row['p_value']:.4g}"])
        out.append(_format_table(headers, rows))

    for note in report.notes:
        out.append(f"\nnote: {note}")
    out.append(f"\nseed = {report.provenance['seed']}   config hash = "
               f"{report.provenance['config_hash']}   version "
               f"{report.provenance['package_version']}")
    return "\n".join(out) + "\n"


def emit(report, out_dir, formats=("json", "text"), force=False):
    """Write the report artifacts; refuses to mix config hashes."""
    os.makedirs(out_dir, exist_ok=True)
    json_path = os.path.join(out_dir, "report.json")
    if os.path.exists(json_path) and not force:
        try:
            with open(json_path, encoding="utf-8") as fh:
                previous = json.load(fh)
            prev_hash = previous.get("provenance", {}).get("config_hash")
        except (OSError, json.JSONDecodeError):
            prev_hash = None
        if prev_hash is not None and \
                prev_hash != report.provenance["config_hash"]:
            raise AffinityError(
                f"{out_dir} holds results for config {prev_hash}; "
                "pass force to overwrite"
            )
    written = []
    if "json" in formats:
        _atomic_write(json_path, render_json(report))
        written.append(json_path)
    if "text" in formats:
        text_path = os.path.join(out_dir, "report.txt")
        _atomic_write(text_path, render_text(report))
        written.append(text_path)
    return written
