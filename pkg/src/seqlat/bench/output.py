"""CSV and SVG writers for experiment rows."""

import csv
import math
from dataclasses import fields
from xml.sax.saxutils import escape

import numpy as np

from ..errors import InvalidInputError
from .scenario import COLUMNS, ResultRow

__all__ = ["write_rows_csv", "read_rows_csv", "write_svg_scatter", "write_svg_configuration"]

_TYPES = {f.name: f.type for f in fields(ResultRow)}


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _parse(name, text):
    kind = _TYPES[name]
    if kind in (bool, "bool"):
        return text == "true"
    if kind in (int, "int"):
        return int(text)
    if kind in (float, "float"):
        return float(text)
    return text


def write_rows_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for row in rows:
            w.writerow([_fmt(getattr(row, c)) for c in COLUMNS])


def read_rows_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != COLUMNS:
            raise InvalidInputError(f"{path}: unexpected header {header}")
        return [ResultRow(**{c: _parse(c, v) for c, v in zip(COLUMNS, rec)}) for rec in reader]


W, H, PAD = 480, 400, 56


def _axis(lo, hi):
    lo, hi = math.floor(math.log10(lo)), math.ceil(math.log10(hi))
    if hi <= lo:
        hi = lo + 1
    return lo, hi


def write_svg_scatter(rows, path, method=None, title=None):
    """Log-log scatter of embedding error against ``s(eps)^2`` with the 45 degree line.

    One circle per plotted row; rows with non-positive values are skipped.
    """
    pts = [
        (r.mean_perturbation, r.embedding_error, r.method)
        for r in rows
        if r.laterable and (method is None or r.method == method)
        and r.mean_perturbation > 0 and r.embedding_error > 0
    ]
    if not pts:
        raise InvalidInputError("no rows with positive perturbation and error to plot")
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    lo, hi = _axis(min(xs + ys), max(xs + ys))

    def sx(v):
        return PAD + (math.log10(v) - lo) / (hi - lo) * (W - 2 * PAD)

    def sy(v):
        return H - PAD - (math.log10(v) - lo) / (hi - lo) * (H - 2 * PAD)

    methods = sorted({p[2] for p in pts})
    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"]
    color = {m: palette[k % len(palette)] for k, m in enumerate(methods)}
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}">',
        f'<rect x="{PAD}" y="{PAD}" width="{W - 2 * PAD}" height="{H - 2 * PAD}" fill="none" stroke="#000"/>',
    ]
    for k in range(lo, hi + 1):
        out.append(f'<text x="{sx(10.0 ** k):.2f}" y="{H - PAD + 16}" font-size="10" text-anchor="middle">1e{k}</text>')
        out.append(f'<text x="{PAD - 6}" y="{sy(10.0 ** k) + 3:.2f}" font-size="10" text-anchor="end">1e{k}</text>')
    out.append(
        f'<line class="reference" x1="{sx(10.0 ** lo):.2f}" y1="{sy(10.0 ** lo):.2f}" '
        f'x2="{sx(10.0 ** hi):.2f}" y2="{sy(10.0 ** hi):.2f}" stroke="#000" stroke-dasharray="6,4"/>'
    )
    for x, y, m in pts:
        out.append(f'<circle class="mark" cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" fill="{color[m]}"/>')
    for k, m in enumerate(methods):
        out.append(f'<text x="{PAD + 8}" y="{PAD + 14 + 12 * k}" font-size="10" fill="{color[m]}">{escape(m)}</text>')
    out.append(f'<text x="{W / 2}" y="{H - 12}" font-size="11" text-anchor="middle">mean perturbation s(eps)^2</text>')
    out.append(f'<text x="14" y="{H / 2}" font-size="11" text-anchor="middle" transform="rotate(-90 14 {H / 2})">embedding error</text>')
    if title:
        out.append(f'<text x="{W / 2}" y="{PAD - 16}" font-size="12" text-anchor="middle">{escape(title)}</text>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


def write_svg_configuration(latent, embedded, path):
    """Side-by-side scatter of a latent configuration and its aligned embedding (p = 2)."""
    from ..geometry import as_points, procrustes_align

    x = as_points(latent)
    y = as_points(embedded)
    if x.shape[1] != 2:
        raise InvalidInputError("configuration plots need p = 2")
    g, _ = procrustes_align(y, x)
    y = g.apply(y).points
    allp = np.vstack([x, y])
    lo, hi = allp.min(axis=0), allp.max(axis=0)
    span = max(hi - lo)
    panel = W - PAD

    def tr(pt, off):
        return (off + PAD / 2 + (pt[0] - lo[0]) / span * (panel - PAD),
                H - PAD / 2 - (pt[1] - lo[1]) / span * (H - PAD))

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{2 * panel}" height="{H}">',
    ]
    for pts, off, col in ((x, 0, "#1f77b4"), (y, panel, "#d62728")):
        for pt in pts:
            cx, cy = tr(pt, off)
            out.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="1.5" fill="{col}"/>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
