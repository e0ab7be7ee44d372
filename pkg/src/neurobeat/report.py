"""Metrics CSV I/O, summaries and SVG box plots."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from .errors import EmptyGroup, ParseError
from .evaluate import Metrics, aggregate_subjects

METRICS_HEADER = (
    "method", "subject", "song", "tolerance_s",
    "precision", "recall", "f_measure", "n_ref", "n_est", "n_tp",
)


@dataclass(frozen=True)
class MetricsRow:
    method: str
    subject: str
    song: str
    tolerance_s: float
    metrics: Metrics

    @property
    def key(self):
        return (self.method, self.subject, self.song, self.tolerance_s)


def format_metrics_csv(rows) -> str:
    out = io.StringIO()
    out.write(",".join(METRICS_HEADER) + "\n")
    for r in sorted(rows, key=lambda r: r.key):
        m = r.metrics
        out.write(
            f"{r.method},{r.subject},{r.song},{r.tolerance_s:.6f},"
            f"{m.precision:.6f},{m.recall:.6f},{m.f_measure:.6f},{m.n_ref},{m.n_est},{m.n_tp}\n"
        )
    return out.getvalue()


def write_metrics_csv(rows, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_metrics_csv(rows))


def read_metrics_csv(path) -> list[MetricsRow]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != METRICS_HEADER:
            raise ParseError(f"{path}: unexpected metrics header {header}")
        rows = []
        for line in reader:
            try:
                method, subject, song, tol, p, r, f, n_ref, n_est, n_tp = line
                rows.append(MetricsRow(
                    method, subject, song, float(tol),
                    Metrics(float(p), float(r), float(f), int(n_ref), int(n_est), int(n_tp)),
                ))
            except ValueError as exc:
                raise ParseError(f"{path}: bad metrics row {line}: {exc}") from exc
    return rows


def select(rows, tolerance_s: float):
    return [r for r in rows if abs(r.tolerance_s - tolerance_s) < 1e-9]


def methods_in(rows) -> list[str]:
    return sorted({r.method for r in rows})


def summarize(rows) -> list[dict]:
    """Per (method, tolerance) statistics of P/R/F over all recordings."""
    groups: dict[tuple[str, float], list[MetricsRow]] = {}
    for r in rows:
        groups.setdefault((r.method, r.tolerance_s), []).append(r)
    out = []
    for (method, tol), members in sorted(groups.items()):
        entry = {"method": method, "tolerance_s": tol, "n": len(members)}
        for metric in ("precision", "recall", "f_measure"):
            stats = aggregate_subjects([getattr(m.metrics, metric) for m in members])
            entry[f"{metric}_mean"] = stats["mean"]
            entry[f"{metric}_std"] = stats["std"]
            entry[f"{metric}_median"] = stats["median"]
        out.append(entry)
    return out


def per_subject_f(rows, method: str) -> dict[str, float]:
    """Mean F-measure per subject (across songs) for one method."""
    by_subject: dict[str, list[float]] = {}
    for r in rows:
        if r.method == method:
            by_subject.setdefault(r.subject, []).append(r.metrics.f_measure)
    return {s: float(np.mean(v)) for s, v in sorted(by_subject.items())}


def write_dict_csv(records: list[dict], path) -> None:
    if not records:
        open(path, "w").close()
        return
    fields = list(records[0])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(fields) + "\n")
        for rec in records:
            fh.write(",".join(f"{v:.6f}" if isinstance(v, float) else str(v) for v in rec.values()) + "\n")


# ---------------------------------------------------------------- SVG

def _box_stats(values):
    x = np.sort(np.asarray(values, dtype=np.float64))
    q1, med, q3 = np.quantile(x, [0.25, 0.5, 0.75])
    iqr = q3 - q1
    inside = x[(x >= q1 - 1.5 * iqr) & (x <= q3 + 1.5 * iqr)]
    lo, hi = inside.min(), inside.max()
    outliers = x[(x < lo) | (x > hi)]
    return q1, med, q3, lo, hi, outliers


def render_boxplot_svg(groups: dict[str, list[float]], metric_name: str, y_range=(0.0, 1.0)) -> str:
    """Tukey box plot, one box per group, as a standalone SVG document."""
    if not groups:
        raise EmptyGroup("no groups to plot")
    for name, values in groups.items():
        if len(values) == 0:
            raise EmptyGroup(f"group {name!r} is empty")

    width, height = 120 + 110 * len(groups), 360
    left, right, top, bottom = 70, 20, 40, 50
    plot_h = height - top - bottom
    y0, y1 = y_range
    lo_v = min(y0, min(min(v) for v in groups.values()))
    hi_v = max(y1, max(max(v) for v in groups.values()))
    span = (hi_v - lo_v) or 1.0

    def y(v):
        return top + plot_h * (1.0 - (v - lo_v) / span)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<title>{escape(metric_name)}</title>',
        f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="16">{escape(metric_name)}</text>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{height - bottom}" stroke="black"/>',
        f'<line x1="{left}" y1="{height - bottom}" x2="{width - right}" y2="{height - bottom}" stroke="black"/>',
        f'<text x="18" y="{top + plot_h / 2:.1f}" transform="rotate(-90 18 {top + plot_h / 2:.1f})" '
        f'text-anchor="middle" font-size="13">{escape(metric_name)}</text>',
    ]
    for k in range(6):
        v = lo_v + span * k / 5
        parts.append(
            f'<text x="{left - 6}" y="{y(v) + 4:.1f}" text-anchor="end" font-size="11">{v:.2f}</text>'
        )
    slot = (width - left - right) / len(groups)
    for i, (name, values) in enumerate(groups.items()):
        cx = left + slot * (i + 0.5)
        q1, med, q3, lo, hi, outliers = _box_stats(values)
        half = min(30.0, slot / 3)
        parts.append(f'<g class="box" data-method="{escape(name)}">')
        parts.append(f'<line x1="{cx:.1f}" y1="{y(hi):.1f}" x2="{cx:.1f}" y2="{y(q3):.1f}" stroke="black"/>')
        parts.append(f'<line x1="{cx:.1f}" y1="{y(q1):.1f}" x2="{cx:.1f}" y2="{y(lo):.1f}" stroke="black"/>')
        for w in (hi, lo):
            parts.append(
                f'<line x1="{cx - half / 2:.1f}" y1="{y(w):.1f}" x2="{cx + half / 2:.1f}" y2="{y(w):.1f}" stroke="black"/>'
            )
        parts.append(
            f'<rect x="{cx - half:.1f}" y="{y(q3):.1f}" width="{2 * half:.1f}" '
            f'height="{max(y(q1) - y(q3), 0.0):.1f}" fill="#9ecae1" stroke="black"/>'
        )
        parts.append(
            f'<line x1="{cx - half:.1f}" y1="{y(med):.1f}" x2="{cx + half:.1f}" y2="{y(med):.1f}" '
            f'stroke="#d62728" stroke-width="2"/>'
        )
        for v in outliers:
            parts.append(f'<circle cx="{cx:.1f}" cy="{y(v):.1f}" r="3" fill="none" stroke="black"/>')
        parts.append("</g>")
        parts.append(
            f'<text x="{cx:.1f}" y="{height - bottom + 18}" text-anchor="middle" font-size="12">{escape(name)}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
