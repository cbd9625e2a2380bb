"""Result tables, published reference numbers, and line-chart SVGs for sweeps."""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .analysis import PALETTE, _fmt

# Published mean test accuracies (percent), kept for side-by-side display only.
# They are never used as test expectations.
PUBLISHED = {
    "t1_hmlp": {
        "columns": ["mlp", "gcn", "hmlp"],
        "rows": {
            "cora": {"mlp": 73.57, "gcn": 88.04, "hmlp": 86.42},
            "citeseer": {"mlp": 71.90, "gcn": 75.69, "hmlp": 75.94},
            "pubmed": {"mlp": 86.90, "gcn": 87.94, "hmlp": 88.34},
        },
        "average": {"mlp": 77.45, "gcn": 83.89, "hmlp": 83.57},
    },
    "t2_tmlp": {
        "columns": ["mlp", "gcn", "tmlp"],
        "rows": {
            "cora": {"mlp": 73.57, "gcn": 88.04, "tmlp": 88.26},
            "citeseer": {"mlp": 71.90, "gcn": 75.69, "tmlp": 76.35},
            "pubmed": {"mlp": 86.90, "gcn": 87.94, "tmlp": 87.58},
        },
        "average": {"mlp": 77.45, "gcn": 83.89, "tmlp": 84.06},
    },
    "t3_ppnp": {
        "columns": ["mlp", "ppnp", "tmlp", "hmlp"],
        "rows": {
            "cora": {"mlp": 73.57, "ppnp": 83.80, "tmlp": 88.26, "hmlp": 86.42},
        },
        "average": None,
    },
    "t5_depth": {
        "columns": ["1", "2", "3", "4"],
        "rows": {
            "mlp": {"1": 69.11, "2": 68.95, "3": 68.39, "4": 69.22},
            "sgc": {"1": 82.38, "2": 84.50, "3": 84.23, "4": 83.95},
            "hmlp": {"1": 78.56, "2": 80.41, "3": 80.96, "4": 81.15},
            "tmlp": {"1": 82.10, "2": 83.76, "3": 83.49, "4": 83.67},
            "unified": {"1": 83.12, "2": 83.95, "3": 84.87, "4": 84.41},
        },
        "average": None,
    },
}

TABLES = tuple(PUBLISHED)


def table_csv(table, cells):
    """CSV of ``cells[(row, col)] = (mean, std)`` in percent next to the published value."""
    ref = PUBLISHED[table]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["row", "column", "mean", "std", "published", "delta"])
    for row, col in sorted(cells):
        mean, std = cells[(row, col)]
        pub = ref["rows"].get(row, {}).get(col)
        delta = "" if pub is None else repr(round(mean - pub, 6))
        w.writerow([row, col, repr(round(mean, 6)), repr(round(std, 6)),
                    "" if pub is None else repr(pub), delta])
    return buf.getvalue()


def table_text(table, cells):
    """Fixed-width table: ours as mean±std, published value in brackets."""
    ref = PUBLISHED[table]
    rows = sorted({r for r, _ in cells})
    cols = [c for c in ref["columns"] if any((r, c) == k for k in cells for r in rows)]
    width = 22
    lines = [f"{table}  (ours mean±std, [published])", "row".ljust(10) + "".join(c.rjust(width) for c in cols)]
    for r in rows:
        parts = []
        for c in cols:
            if (r, c) not in cells:
                parts.append("-".rjust(width))
                continue
            m, s = cells[(r, c)]
            p = ref["rows"].get(r, {}).get(c)
            txt = f"{m:.2f}±{s:.2f}" + (f" [{p:.2f}]" if p is not None else "")
            parts.append(txt.rjust(width))
        lines.append(r.ljust(10) + "".join(parts))
    if ref["average"] and len(rows) > 1:
        parts = []
        for c in cols:
            vals = [cells[(r, c)][0] for r in rows if (r, c) in cells]
            p = ref["average"].get(c)
            txt = f"{np.mean(vals):.2f}" + (f" [{p:.2f}]" if p is not None else "")
            parts.append(txt.rjust(width))
        lines.append("average".ljust(10) + "".join(parts))
    lines.append("bracketed values: published numbers, shown for reference only")
    return "\n".join(lines) + "\n"


def sweep_csv(ratios, series):
    """``series[model]`` is a list of (mean, std) aligned with ``ratios``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["ratio", "model", "mean", "std"])
    for i, r in enumerate(ratios):
        for m in sorted(series):
            mean, std = series[m][i]
            w.writerow([repr(float(r)), m, repr(round(mean, 6)), repr(round(std, 6))])
    return buf.getvalue()


def emit_svg_lines(xs, series, path, title="", xlabel="", ylabel=""):
    """Deterministic SVG line chart, one polyline per series in sorted name order."""
    W, H, pad = 520, 360, 45
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.array([v for s in series.values() for v in s], dtype=np.float64)
    xmin, xmax = (xs.min(), xs.max()) if xs.size else (0.0, 1.0)
    ymin, ymax = (ys.min(), ys.max()) if ys.size else (0.0, 1.0)
    if xmax == xmin:
        xmin, xmax = xmin - 0.5, xmax + 0.5
    if ymax == ymin:
        ymin, ymax = ymin - 0.5, ymax + 0.5
    sx = (W - 2 * pad) / (xmax - xmin)
    sy = (H - 2 * pad) / (ymax - ymin)

    def px(x, y):
        return pad + (x - xmin) * sx, H - pad - (y - ymin) * sy

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="#ffffff"/>',
        f'<text x="{W / 2:.1f}" y="18" text-anchor="middle" font-family="sans-serif" '
        f'font-size="13">{title}</text>',
        '<g stroke="#000000" stroke-width="1">',
        f'<line x1="{pad}" y1="{H - pad}" x2="{W - pad}" y2="{H - pad}"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{H - pad}"/>',
        "</g>",
        '<g font-family="sans-serif" font-size="10">',
        f'<text x="{pad}" y="{H - pad + 14}">{_fmt(xmin)}</text>',
        f'<text x="{W - pad}" y="{H - pad + 14}" text-anchor="end">{_fmt(xmax)}</text>',
        f'<text x="{pad - 4}" y="{H - pad}" text-anchor="end">{_fmt(ymin)}</text>',
        f'<text x="{pad - 4}" y="{pad + 4}" text-anchor="end">{_fmt(ymax)}</text>',
        f'<text x="{W / 2:.1f}" y="{H - 8}" text-anchor="middle">{xlabel}</text>',
        f'<text x="12" y="{H / 2:.1f}" transform="rotate(-90 12 {H / 2:.1f})" '
        f'text-anchor="middle">{ylabel}</text>',
        "</g>",
    ]
    for k, name in enumerate(sorted(series)):
        color = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in (px(x, y) for x, y in zip(xs, series[name])))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        lx, ly = W - pad - 70, pad + 14 * k
        out.append(f'<text x="{lx}" y="{ly}" font-family="sans-serif" font-size="10" '
                   f'fill="{color}">{name}</text>')
    out.append("</svg>")
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")
    return path
