"""Decision-boundary margins, embedding export, boundary grids and SVG scatter output."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .exceptions import InvalidLayer, MissingAdjacency, NotTwoDimensional
from .models import forward_mlp, hidden_representations, predict_mlp, predict_tmlp
from .numerics import pca_fit


def logit_margin(logits):
    """Top-1 minus top-2 logit per row (0 for ties)."""
    logits = np.asarray(logits)
    if logits.shape[1] < 2:
        return np.zeros(logits.shape[0])
    top2 = np.partition(logits, -2, axis=1)[:, -2:]
    return top2[:, 1] - top2[:, 0]


def split_names(graph):
    names = np.full(graph.num_nodes, "none", dtype=object)
    names[graph.train_mask] = "train"
    names[graph.val_mask] = "val"
    names[graph.test_mask] = "test"
    return names


@dataclass
class MarginReport:
    node_id: np.ndarray
    split: np.ndarray
    margin_before: np.ndarray
    margin_after: np.ndarray
    test_mask: np.ndarray

    @property
    def delta(self):
        return self.margin_after - self.margin_before

    @property
    def mean_delta(self):
        return float(self.delta[self.test_mask].mean())

    @property
    def fraction_increased(self):
        return float((self.delta[self.test_mask] > 0).mean())

    def summary(self):
        t = self.test_mask
        qs = (0.1, 0.25, 0.5, 0.75, 0.9)
        return {
            "test_nodes": int(t.sum()),
            "mean_margin_before": float(self.margin_before[t].mean()),
            "mean_margin_after": float(self.margin_after[t].mean()),
            "mean_delta": self.mean_delta,
            "fraction_increased": self.fraction_increased,
            "delta_quantiles": {str(q): float(np.quantile(self.delta[t], q)) for q in qs},
        }

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["node_id", "split", "margin_before", "margin_after", "delta"])
        for i, s, b, a, d in zip(self.node_id, self.split, self.margin_before,
                                  self.margin_after, self.delta):
            w.writerow([int(i), s, repr(float(b)), repr(float(a)), repr(float(d))])
        return buf.getvalue()


def margin_report(model, graph):
    """Logit-gap margins from the plain MLP forward and from Test-Time Mixup inference."""
    if model.adj is None:
        raise MissingAdjacency("margin report needs the model's adjacency")
    before = logit_margin(predict_mlp(model, graph))
    after = logit_margin(predict_tmlp(model, graph))
    mask = graph.test_mask if graph.test_mask.any() else np.ones(graph.num_nodes, dtype=bool)
    return MarginReport(np.arange(graph.num_nodes), split_names(graph), before, after, mask)


def cluster_score(points, labels):
    """Mean intra-class pairwise distance over mean inter-class pairwise distance (lower is tighter)."""
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels)
    d = cdist(points, points)
    same = labels[:, None] == labels[None, :]
    off = ~np.eye(len(labels), dtype=bool)
    intra = d[same & off]
    inter = d[~same]
    if intra.size == 0 or inter.size == 0:
        return float("nan")
    return float(intra.mean() / inter.mean())


@dataclass
class EmbeddingExport:
    layer: int
    before: np.ndarray
    after: np.ndarray
    before_2d: np.ndarray
    after_2d: np.ndarray
    score_before: float
    score_after: float


def export_embeddings(model, graph, layer, mask=None):
    """Layer-``layer`` representations (1-based) without and with aggregation.

    The 2-D projections share one PCA basis fitted on both sets, so the two
    pictures are directly comparable. Cluster scores are computed on ``mask``
    nodes (default: the test mask).
    """
    depth = len(model.params)
    if not 1 <= layer <= depth:
        raise InvalidLayer(f"layer must be in [1, {depth}], got {layer}")
    before = np.asarray(hidden_representations(model, graph, aggregated=False)[layer - 1])
    after = np.asarray(hidden_representations(model, graph, aggregated=True)[layer - 1])
    if mask is None:
        mask = graph.test_mask if graph.test_mask.any() else graph.labels >= 0
    fit = pca_fit(np.vstack([before, after]))
    labels = graph.labels[mask]
    return EmbeddingExport(
        layer, before, after, fit.transform(before), fit.transform(after),
        cluster_score(before[mask], labels), cluster_score(after[mask], labels))


@dataclass
class BoundaryGrid:
    box: tuple  # (xmin, xmax, ymin, ymax)
    resolution: int
    classes: np.ndarray  # (resolution, resolution); row r is y index r
    positions_before: np.ndarray
    positions_after: np.ndarray
    node_classes: np.ndarray
    correct_before: np.ndarray
    correct_after: np.ndarray
    node_ids: np.ndarray

    def cell_centers(self):
        xmin, xmax, ymin, ymax = self.box
        r = self.resolution
        xs = xmin + (np.arange(r) + 0.5) * (xmax - xmin) / r
        ys = ymin + (np.arange(r) + 0.5) * (ymax - ymin) / r
        return xs, ys

    def boundary_cells(self):
        """Centers of cells adjacent (4-neighborhood) to a cell of another class."""
        c = self.classes
        edge = np.zeros_like(c, dtype=bool)
        dx = c[:, 1:] != c[:, :-1]
        dy = c[1:, :] != c[:-1, :]
        edge[:, 1:] |= dx
        edge[:, :-1] |= dx
        edge[1:, :] |= dy
        edge[:-1, :] |= dy
        xs, ys = self.cell_centers()
        rows, cols = np.nonzero(edge)
        return np.column_stack([xs[cols], ys[rows]])

    def distance_to_boundary(self, points):
        cells = self.boundary_cells()
        if len(cells) == 0:
            return np.full(len(points), np.inf)
        return cKDTree(cells).query(points)[0]

    def to_json(self):
        return json.dumps({
            "box": [float(v) for v in self.box],
            "resolution": self.resolution,
            "classes": self.classes.ravel().astype(int).tolist(),
        }, sort_keys=True)


def boundary_grid(model, graph, resolution=100, projection=None, mask=None):
    """Evaluate the MLP-form classifier over a grid covering the nodes.

    Features must be 2-D, or ``projection="pca"`` maps a PCA plane back into
    feature space for evaluation. Marks each node (default: the test mask)
    at its raw position and at its aggregated position ``A x``.
    """
    X = graph.features
    if projection is None:
        if X.shape[1] != 2:
            raise NotTwoDimensional(f"features are {X.shape[1]}-D; pass projection='pca'")
        to_plane = lambda p: p  # noqa: E731
        to_space = lambda p: p  # noqa: E731
    elif projection == "pca":
        fit = pca_fit(X)
        to_plane, to_space = fit.transform, fit.inverse_transform
    else:
        raise ValueError(f"unknown projection {projection!r}")
    if model.adj is None:
        raise MissingAdjacency("boundary grid needs the model's adjacency")
    if mask is None:
        mask = graph.test_mask if graph.test_mask.any() else np.ones(graph.num_nodes, dtype=bool)
    ids = np.flatnonzero(mask)

    raw = to_plane(X)
    agg = to_plane(model.adj.apply(X))
    pts = np.vstack([raw, agg])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    lo, hi = lo - 0.05 * span, hi + 0.05 * span
    box = (float(lo[0]), float(hi[0]), float(lo[1]), float(hi[1]))

    xs = lo[0] + (np.arange(resolution) + 0.5) * (hi[0] - lo[0]) / resolution
    ys = lo[1] + (np.arange(resolution) + 0.5) * (hi[1] - lo[1]) / resolution
    gx, gy = np.meshgrid(xs, ys)
    grid_pts = to_space(np.column_stack([gx.ravel(), gy.ravel()]))
    classes = np.argmax(forward_mlp(model.params, grid_pts), axis=1).reshape(resolution, resolution)

    labels = graph.labels[ids]
    pred_before = np.argmax(predict_mlp(model, graph)[ids], axis=1)
    pred_after = np.argmax(predict_tmlp(model, graph)[ids], axis=1)
    return BoundaryGrid(box, resolution, classes, raw[ids], agg[ids], labels,
                        pred_before == labels, pred_after == labels, ids)


# -- SVG ---------------------------------------------------------------------

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")
LIGHT = ("#c6dbef", "#fcbba1", "#c7e9c0", "#fdd0a2", "#dadaeb",
         "#e0cfc9", "#f7d4ea", "#e5e5e5", "#ededb5", "#c0eef3")


@dataclass
class ScatterPoints:
    xy: np.ndarray
    classes: np.ndarray
    hollow: np.ndarray = None


def _fmt(v):
    return f"{v:.3f}"


def emit_svg_scatter(grid_or_points, style, path):
    """Write a standalone, byte-deterministic SVG.

    ``grid_or_points`` is a :class:`BoundaryGrid` (cells shaded by class,
    raw positions hollow, aggregated positions filled) or
    :class:`ScatterPoints`. ``style`` keys: width, height, radius, title.
    """
    style = dict(style or {})
    W = int(style.get("width", 480))
    H = int(style.get("height", 480))
    r = float(style.get("radius", 3.0))
    pad = 30

    rects = []
    circles = []
    if isinstance(grid_or_points, BoundaryGrid):
        g = grid_or_points
        xmin, xmax, ymin, ymax = g.box
        res = g.resolution
        cw = (W - 2 * pad) / res
        ch = (H - 2 * pad) / res
        for row in range(res):
            line = g.classes[row]
            start = 0
            # run-length merge of equal cells keeps the file small
            for col in range(1, res + 1):
                if col == res or line[col] != line[start]:
                    y = H - pad - (row + 1) * ch
                    rects.append((pad + start * cw, y, (col - start) * cw, ch,
                                  LIGHT[int(line[start]) % len(LIGHT)]))
                    start = col
        xy = np.vstack([g.positions_before, g.positions_after])
        cls = np.concatenate([g.node_classes, g.node_classes])
        hollow = np.r_[np.ones(len(g.node_classes), bool), np.zeros(len(g.node_classes), bool)]
    else:
        pts = grid_or_points
        xy = np.asarray(pts.xy, dtype=np.float64).reshape(-1, 2)
        cls = np.asarray(pts.classes).reshape(-1)
        hollow = np.zeros(len(cls), bool) if pts.hollow is None else np.asarray(pts.hollow)
        if len(xy):
            lo, hi = xy.min(axis=0), xy.max(axis=0)
            span = np.where(hi > lo, hi - lo, 1.0)
            xmin, ymin = lo - 0.05 * span
            xmax, ymax = hi + 0.05 * span
        else:
            xmin, xmax, ymin, ymax = 0.0, 1.0, 0.0, 1.0

    sx = (W - 2 * pad) / (xmax - xmin)
    sy = (H - 2 * pad) / (ymax - ymin)
    for (x, y), c, h in zip(xy, cls, hollow):
        cx = pad + (x - xmin) * sx
        cy = H - pad - (y - ymin) * sy
        color = PALETTE[int(c) % len(PALETTE)]
        circles.append((cx, cy, color, bool(h)))

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="#ffffff"/>',
    ]
    if "title" in style:
        title = str(style["title"]).replace("&", "&amp;").replace("<", "&lt;")
        out.append(f'<text x="{W / 2:.1f}" y="18" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="13">{title}</text>')
    out.append('<g id="cells" shape-rendering="crispEdges">')
    for x, y, w, h, fill in rects:
        out.append(f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(w)}" height="{_fmt(h)}" '
                   f'fill="{fill}"/>')
    out.append("</g>")
    out.append('<g id="axes" stroke="#000000" stroke-width="1">')
    out.append(f'<line x1="{pad}" y1="{H - pad}" x2="{W - pad}" y2="{H - pad}"/>')
    out.append(f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{H - pad}"/>')
    out.append("</g>")
    out.append('<g id="labels" font-family="sans-serif" font-size="10">')
    out.append(f'<text x="{pad}" y="{H - pad + 14}">{_fmt(xmin)}</text>')
    out.append(f'<text x="{W - pad}" y="{H - pad + 14}" text-anchor="end">{_fmt(xmax)}</text>')
    out.append(f'<text x="{pad - 4}" y="{H - pad}" text-anchor="end">{_fmt(ymin)}</text>')
    out.append(f'<text x="{pad - 4}" y="{pad + 4}" text-anchor="end">{_fmt(ymax)}</text>')
    out.append("</g>")
    out.append('<g id="points">')
    for cx, cy, color, h in circles:
        if h:
            out.append(f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="{r:.1f}" fill="none" '
                       f'stroke="{color}"/>')
        else:
            out.append(f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="{r:.1f}" fill="{color}"/>')
    out.append("</g>")
    out.append("</svg>")
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")
    return path
