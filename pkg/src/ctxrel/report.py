"""Report emission: correlation CSV, delta-AIC table, partial-effect
curves (CSV + SVG), and a run manifest.

All outputs are byte-deterministic for fixed inputs: floats are written
with shortest round-trip repr, SVG rendering pins matplotlib's hash
salt, and no timestamps are embedded anywhere.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib
import numpy as np

matplotlib.use("SVG")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .pipeline import RESPONSES, ComparisonResult, StudyResult  # noqa: E402

_RESPONSE_TITLES = {
    "log_first": "log(first duration)",
    "log_gaze": "log(gaze duration)",
    "log_total": "log(total duration)",
}


class IoError(OSError):
    """Report directory not writable or a file could not be written."""


def _write_text(path: Path, content: str) -> None:
    try:
        path.write_text(content, encoding="utf-8", newline="")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def correlation_csv(labels: Sequence[str], corr: np.ndarray) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow([""] + list(labels))
    for label, row in zip(labels, corr):
        writer.writerow([label] + [repr(float(v)) for v in row])
    return out.getvalue()


def delta_aic_csv(comparisons: Sequence[ComparisonResult]) -> str:
    """Rows = metrics (first-appearance order), columns = responses."""
    by_cell = {(c.metric_name, c.response_name): c.delta_aic for c in comparisons}
    metrics: list[str] = []
    for c in comparisons:
        if c.metric_name not in metrics:
            metrics.append(c.metric_name)
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["metric"] + list(RESPONSES))
    for metric in metrics:
        row = [metric]
        for response in RESPONSES:
            v = by_cell.get((metric, response))
            row.append("" if v is None else repr(float(v)))
        writer.writerow(row)
    return out.getvalue()


def curve_csv(grid: np.ndarray, values: np.ndarray) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["grid", "value"])
    for g, v in zip(grid, values):
        writer.writerow([repr(float(g)), repr(float(v))])
    return out.getvalue()


def curve_svg(metric: str, response: str, grid: np.ndarray, values: np.ndarray) -> bytes:
    """A standalone SVG line plot of one partial-effect curve."""
    matplotlib.rcParams["svg.hashsalt"] = "ctxrel"
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.plot(grid, values, color="#1f77b4", linewidth=1.6)
    ax.axhline(0.0, color="#999999", linewidth=0.8, linestyle="--")
    ax.set_xlabel(metric)
    ax.set_ylabel(f"partial effect on {_RESPONSE_TITLES.get(response, response)}")
    ax.set_title(f"{metric} → {_RESPONSE_TITLES.get(response, response)}")
    fig.tight_layout()
    buf = io.BytesIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()


def manifest_text(
    config: Mapping[str, object],
    n_by_response: Mapping[str, int],
    extra: Mapping[str, object] | None = None,
) -> str:
    """key=value manifest; keys sorted, no timestamps."""
    items: dict[str, object] = {f"config.{k}": v for k, v in config.items()}
    for response, n in n_by_response.items():
        items[f"rows.{response}"] = n
    if extra:
        items.update(extra)
    return "".join(f"{k}={items[k]}\n" for k in sorted(items))


def emit_report(
    study: StudyResult,
    out_dir: str | Path,
    config: Mapping[str, object] | None = None,
    extra_manifest: Mapping[str, object] | None = None,
) -> list[Path]:
    """Write corr.csv, delta_aic.csv, per-curve CSV+SVG, manifest.txt.

    Returns the written paths. Refuses to write anything when there are
    no comparisons.
    """
    if not study.comparisons:
        raise ValueError("no comparisons to report")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {out}: {exc}") from exc

    written: list[Path] = []

    path = out / "corr.csv"
    _write_text(path, correlation_csv(study.corr_labels, study.corr))
    written.append(path)

    path = out / "delta_aic.csv"
    _write_text(path, delta_aic_csv(study.comparisons))
    written.append(path)

    for (metric, response), (grid, values) in sorted(study.curves.items()):
        path = out / f"partial_{metric}_{response}.csv"
        _write_text(path, curve_csv(grid, values))
        written.append(path)
        path = out / f"partial_{metric}_{response}.svg"
        try:
            path.write_bytes(curve_svg(metric, response, grid, values))
        except OSError as exc:
            raise IoError(f"cannot write {path}: {exc}") from exc
        written.append(path)

    path = out / "fits.json"
    _write_text(path, json.dumps(study.fit_reports, indent=2, sort_keys=True) + "\n")
    written.append(path)

    path = out / "manifest.txt"
    _write_text(path, manifest_text(config or {}, study.n_by_response, extra_manifest))
    written.append(path)
    return written
