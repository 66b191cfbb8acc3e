"""Agreement report rendering: text table, delimited files, Bland-Altman plots.

Everything here is deterministic so study outputs can be diffed across
runs: rows arrive pre-sorted from the comparison step, floats serialize
with their shortest round-tripping representation, and SVG output pins
matplotlib's hash salt and drops its creation date.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
from dataclasses import asdict

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402 - backend must be set first

from .pipeline import atomic_write_text  # noqa: E402

log = logging.getLogger(__name__)

plt.rcParams["svg.hashsalt"] = "kinecap"

REPORT_COLUMNS = ("metric", "task", "ptm_method", "unit", "n_pairs", "mae",
                  "bias", "loa_low", "loa_high", "trr", "icc", "icc_label",
                  "n_unmatched")
FORMATS = ("csv", "json", "svg")


def _fmt(value, float_format: str = "{:.4f}") -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return float_format.format(value)
    return str(value)


def render_text_table(reports) -> str:
    """Fixed-width human-readable agreement table."""
    if not reports:
        return "no agreement rows (need >= 2 matched measurement pairs)\n"
    header = ["metric", "task", "ptm", "n", "mae", "bias", "loa-", "loa+",
              "trr", "icc", "rating"]
    rows = []
    for r in reports:
        rows.append([
            r.metric, r.task, r.ptm_method, str(r.n_pairs),
            _fmt(r.mae), _fmt(r.bias), _fmt(r.loa_low), _fmt(r.loa_high),
            _fmt(r.trr, "{:.3f}"), _fmt(r.icc, "{:.3f}"), r.icc_label,
        ])
    widths = [max(len(header[c]), *(len(row[c]) for row in rows))
              for c in range(len(header))]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(v.ljust(w)
                               for v, w in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n"


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def agreement_csv_text(reports) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for r in reports:
        writer.writerow([_csv_cell(getattr(r, c)) for c in REPORT_COLUMNS])
    return buf.getvalue()


def agreement_json_text(reports) -> str:
    return json.dumps([asdict(r) for r in reports], indent=2,
                      sort_keys=True) + "\n"


def ba_rows_csv_text(rows) -> str:
    """Matched pairs of one agreement row, with their mean and difference."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("participant_id", "rep_index", "measured", "truth",
                     "pair_mean", "pair_diff"))
    for pid, rep, measured, truth in rows:
        writer.writerow((pid, rep, repr(float(measured)), repr(float(truth)),
                         repr((float(measured) + float(truth)) / 2.0),
                         repr(float(measured) - float(truth))))
    return buf.getvalue()


def row_slug(report) -> str:
    return f"{report.task}_{report.metric}_{report.ptm_method}".lower()


def render_ba_svg(report, rows, path: str) -> None:
    """Bland-Altman scatter: pair means vs differences with bias and limits."""
    means = [(float(m) + float(t)) / 2.0 for (_, _, m, t) in rows]
    diffs = [float(m) - float(t) for (_, _, m, t) in rows]
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    ax.scatter(means, diffs, s=18, alpha=0.8)
    ax.axhline(report.bias, color="tab:blue", linewidth=1.2,
               label=f"bias {report.bias:.4f}")
    for y, name in ((report.loa_low, "lower"), (report.loa_high, "upper")):
        ax.axhline(y, color="tab:red", linewidth=1.0, linestyle="--",
                   label=f"{name} limit {y:.4f}")
    ax.set_xlabel(f"pair mean ({report.unit})")
    ax.set_ylabel(f"measured - truth ({report.unit})")
    ax.set_title(f"{report.task} {report.metric} [{report.ptm_method}]")
    ax.legend(fontsize=8)
    fig.tight_layout()
    tmp = path + ".tmp"
    try:
        fig.savefig(tmp, format="svg", metadata={"Date": None})
        os.replace(tmp, path)
    finally:
        plt.close(fig)
        if os.path.exists(tmp):
            os.unlink(tmp)


def write_report(reports, pairs, out_dir: str, formats=("csv",)) -> list:
    """Write the agreement report in the requested formats.

    Always writes ``report.txt``. 'csv' adds ``agreement.csv`` plus one
    ``ba_<row>.csv`` of matched pairs per agreement row; 'json' adds
    ``agreement.json``; 'svg' adds one Bland-Altman scatter per row.
    Returns the written paths.
    """
    for f in formats:
        if f not in FORMATS:
            raise ValueError(f"unknown report format {f!r}; "
                             f"expected subset of {FORMATS}")
    os.makedirs(out_dir, exist_ok=True)
    written = []

    path = os.path.join(out_dir, "report.txt")
    atomic_write_text(path, render_text_table(reports))
    written.append(path)

    if "csv" in formats:
        path = os.path.join(out_dir, "agreement.csv")
        atomic_write_text(path, agreement_csv_text(reports))
        written.append(path)
        for r in reports:
            rows = pairs.get((r.task, r.metric, r.ptm_method), [])
            path = os.path.join(out_dir, f"ba_{row_slug(r)}.csv")
            atomic_write_text(path, ba_rows_csv_text(rows))
            written.append(path)
    if "json" in formats:
        path = os.path.join(out_dir, "agreement.json")
        atomic_write_text(path, agreement_json_text(reports))
        written.append(path)
    if "svg" in formats:
        for r in reports:
            rows = pairs.get((r.task, r.metric, r.ptm_method), [])
            if not rows:
                continue
            path = os.path.join(out_dir, f"ba_{row_slug(r)}.svg")
            render_ba_svg(r, rows, path)
            written.append(path)
    log.info("report written to %s (%d file(s))", out_dir, len(written))
    return written
