"""Command-line entry point: ``graphmix <command> [flags]``.

Exit codes: 0 success, 1 a check failed, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import sys
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    ScatterPoints,
    boundary_grid,
    emit_svg_scatter,
    export_embeddings,
    margin_report,
)
from .checks import FAULTS, run_suite
from .data import SYNTHETIC_KINDS, SplitSpec, load_bundle, make_split, synthetic_graph
from .exceptions import GraphMixError, MissingFile
from .models import KINDS, ModelSpec, load_model, save_model
from .reporting import TABLES, emit_svg_lines, sweep_csv, table_csv, table_text
from .trainer import TrainConfig, fit, repeat_runs

EXIT_OK, EXIT_CHECK, EXIT_USAGE = 0, 1, 2
DEFAULT_RATIOS = tuple(round(0.1 * i, 1) for i in range(1, 10))
TABLE_DATASETS = {
    "t1_hmlp": ("cora", "citeseer", "pubmed"),
    "t2_tmlp": ("cora", "citeseer", "pubmed"),
    "t3_ppnp": ("cora",),
    "t5_depth": ("cora",),
}


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str = "synthetic:two_clusters"
    model: str = "gcn"
    depth: int = 2
    hidden: int = 64
    self_loops: bool = True
    ppnp_power: int = 2
    relabel_power: int = 1
    lr: float = 0.1
    epochs: int = 400
    optimizer: str = "sgd"
    seed: int = 0
    ratio: float | None = None  # None: use the bundle's stored split
    seeds: int = 10
    normalize_features: bool = False
    data_dir: str = ""
    out: str = "out"

    def model_spec(self, **over):
        kw = dict(kind=self.model, depth=self.depth, hidden_dim=self.hidden,
                  self_loops=self.self_loops, ppnp_power=self.ppnp_power,
                  relabel_power=self.relabel_power)
        kw.update(over)
        return ModelSpec(**kw)

    def train_config(self, **over):
        kw = dict(lr=self.lr, epochs=self.epochs, optimizer=self.optimizer, seed=self.seed,
                  hidden_dim=self.hidden)
        kw.update(over)
        return TrainConfig(**kw)

    def digest(self):
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


CONFIG_FIELDS = {f.name for f in fields(ExperimentConfig)}


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _ratios(text):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad ratio list {text!r}") from exc
    if not vals or any(not 0 < v < 1 for v in vals):
        raise argparse.ArgumentTypeError("ratios must lie in (0, 1)")
    return vals


def build_config(args):
    """Defaults, then the ``--config`` JSON file, then explicitly given flags."""
    values = {}
    if getattr(args, "config", None):
        try:
            loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        unknown = set(loaded) - CONFIG_FIELDS
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        values.update(loaded)
    for name in CONFIG_FIELDS:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    if not values.get("data_dir"):
        values["data_dir"] = os.environ.get("GRAPHMIX_DATA", "data")
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise UsageError(str(exc)) from exc


class UsageError(Exception):
    pass


def resolve_dataset(name, cfg, seed=None):
    """``synthetic:<kind>``, a bundle directory, or a bundle name under ``data_dir``."""
    if name.startswith("synthetic:"):
        kind = name.split(":", 1)[1]
        if kind not in SYNTHETIC_KINDS:
            raise UsageError(f"unknown synthetic graph {kind!r}; choose from {SYNTHETIC_KINDS}")
        return synthetic_graph(kind, cfg.seed if seed is None else seed)
    path = Path(name)
    if not path.is_dir():
        path = Path(cfg.data_dir) / name
    if not path.is_dir():
        raise MissingFile(f"dataset {name!r}: no bundle directory (looked in {cfg.data_dir})", path)
    return load_bundle(path, normalize_features=cfg.normalize_features)


def apply_split(graph, cfg, ratio=None, val_ratio=None):
    ratio = cfg.ratio if ratio is None else ratio
    if ratio is None:
        if not graph.train_mask.any():
            raise UsageError(f"{graph.name}: no stored split; pass --ratio")
        return graph
    spec = (SplitSpec(ratio, val_ratio, seed=cfg.seed) if val_ratio is not None
            else SplitSpec.from_train_ratio(ratio, seed=cfg.seed))
    return make_split(graph, spec)


def write_manifest(out, cfg, command, started, outputs):
    import scipy
    manifest = {
        "command": command,
        "config": asdict(cfg),
        "config_sha256": cfg.digest(),
        "versions": {
            "graphmix": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "wall_time_seconds": round(time.perf_counter() - started, 3),
        "outputs": sorted(outputs),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                       encoding="utf-8")


def _write(out, name, text, outputs):
    with open(out / name, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    outputs.append(name)


def _plots():
    # matplotlib is only needed for PNG figures
    from . import plotting
    return plotting


# -- commands ----------------------------------------------------------------

def cmd_train(cfg, args, out):
    outputs = []
    graph = apply_split(resolve_dataset(cfg.dataset, cfg), cfg)
    model, rec = fit(graph, cfg.model_spec(), cfg.train_config())
    save_model(model, out / "model.bin")
    outputs.append("model.bin")
    _write(out, "run.jsonl", rec.to_jsonl(), outputs)
    _write(out, "summary.json", json.dumps(rec.summary(), indent=2, sort_keys=True) + "\n", outputs)
    if not args.no_png:
        _plots().plot_curves(rec, out / "curves.png", title=f"{cfg.model}-{cfg.depth}")
        outputs.append("curves.png")
    print(f"{graph.name} {cfg.model}-{cfg.depth}: selected epoch {rec.selected_epoch}, "
          f"test accuracy {rec.selected_test_accuracy:.4f}")
    return EXIT_OK, outputs


def table_grid(table):
    """(row, column, ModelSpec overrides, split) cells for one published table."""
    if table == "t5_depth":
        cells = []
        for kind in ("mlp", "sgc", "hmlp", "tmlp", "unified"):
            for depth in (1, 2, 3, 4):
                cells.append((kind, str(depth), {"kind": kind, "depth": depth}))
        return cells, (0.2, 0.4)
    cols = {"t1_hmlp": ("mlp", "gcn", "hmlp"), "t2_tmlp": ("mlp", "gcn", "tmlp"),
            "t3_ppnp": ("mlp", "ppnp", "tmlp", "hmlp")}[table]
    return [(None, c, {"kind": c, "depth": 2}) for c in cols], (0.6, 0.2)


def run_table(table, datasets, cfg):
    cells = {}
    grid, (tr, va) = table_grid(table)
    for name in datasets:
        try:
            graph = make_split(resolve_dataset(name, cfg), SplitSpec(tr, va, seed=cfg.seed))
        except GraphMixError as exc:
            raise UsageError(f"dataset {name}: {exc}") from exc
        for row, col, over in grid:
            spec = cfg.model_spec(**over)
            res = repeat_runs(graph, spec, cfg.train_config(), cfg.seeds)
            key = (row or Path(name).name.replace("synthetic:", ""), col)
            cells[key] = (100 * res.mean, 100 * res.std)
            print(f"  {key[0]:>10} {col:>8}: {100 * res.mean:.2f} ± {100 * res.std:.2f}", flush=True)
    return cells


def cmd_reproduce_table(cfg, args, out):
    outputs = []
    datasets = args.datasets.split(",") if args.datasets else TABLE_DATASETS[args.table]
    cells = run_table(args.table, datasets, cfg)
    _write(out, f"{args.table}.csv", table_csv(args.table, cells), outputs)
    text = table_text(args.table, cells)
    _write(out, f"{args.table}.txt", text, outputs)
    print(text, end="")
    return EXIT_OK, outputs


def run_sweep(graph, models, ratios, cfg):
    series = {m: [] for m in models}
    for r in ratios:
        g = make_split(graph, SplitSpec.from_train_ratio(r, seed=cfg.seed))
        for m in models:
            res = repeat_runs(g, cfg.model_spec(kind=m), cfg.train_config(), cfg.seeds)
            series[m].append((100 * res.mean, 100 * res.std))
    return series


def cmd_sweep_ratio(cfg, args, out):
    outputs = []
    graph = resolve_dataset(cfg.dataset, cfg)
    models = args.models.split(",")
    bad = [m for m in models if m not in KINDS]
    if bad:
        raise UsageError(f"unknown models: {', '.join(bad)}")
    ratios = args.ratios or list(DEFAULT_RATIOS)
    series = run_sweep(graph, models, ratios, cfg)
    _write(out, "sweep.csv", sweep_csv(ratios, series), outputs)
    emit_svg_lines(ratios, {m: [v[0] for v in s] for m, s in series.items()}, out / "sweep.svg",
                   title=graph.name, xlabel="train ratio", ylabel="test accuracy (%)")
    outputs.append("sweep.svg")
    if not args.no_png:
        _plots().plot_sweep(ratios, series, out / "sweep.png", title=graph.name)
        outputs.append("sweep.png")
    print(sweep_csv(ratios, series), end="")
    return EXIT_OK, outputs


def cmd_check_equivalence(cfg, args, out):
    outputs = []
    names = [args.dataset] if args.dataset else [f"synthetic:{k}" for k in SYNTHETIC_KINDS]
    lines, failed = [], 0
    for name in names:
        graph = resolve_dataset(name, cfg)
        lines.append(f"# {name}")
        for res in run_suite(graph, inject=args.inject_fault, seed=cfg.seed):
            lines.append(res.line())
            failed += not res.passed
    lines.append(f"{failed} check(s) failed" if failed else "all checks passed")
    text = "\n".join(lines) + "\n"
    _write(out, "checks.txt", text, outputs)
    print(text, end="")
    return (EXIT_CHECK if failed else EXIT_OK), outputs


def cmd_analyze(cfg, args, out):
    outputs = []
    ckpt = Path(args.checkpoint)
    if not ckpt.is_file():
        raise MissingFile(f"checkpoint not found: {ckpt}", ckpt)
    graph = resolve_dataset(cfg.dataset, cfg)
    if cfg.ratio is not None or not graph.train_mask.any():
        graph = apply_split(graph, cfg)
    try:
        model = load_model(ckpt, graph)
    except ValueError as exc:
        raise UsageError(f"checkpoint {ckpt}: {exc}") from exc

    rep = margin_report(model, graph)
    _write(out, "margins.csv", rep.to_csv(), outputs)
    summary = {"margins": rep.summary()}

    layer = args.layer or len(model.params)
    emb = export_embeddings(model, graph, layer)
    np.savez(out / "embeddings.npz", before=emb.before, after=emb.after,
             before_2d=emb.before_2d, after_2d=emb.after_2d, labels=graph.labels)
    outputs.append("embeddings.npz")
    summary["embeddings"] = {"layer": layer, "cluster_score_before": emb.score_before,
                             "cluster_score_after": emb.score_after}
    mask = graph.test_mask if graph.test_mask.any() else graph.labels >= 0
    for tag, pts in (("before", emb.before_2d), ("after", emb.after_2d)):
        emit_svg_scatter(ScatterPoints(pts[mask], graph.labels[mask]),
                         {"title": f"layer {layer} {tag} aggregation"}, out / f"embeddings_{tag}.svg")
        outputs.append(f"embeddings_{tag}.svg")

    projection = None if graph.feature_dim == 2 else "pca"
    grid = boundary_grid(model, graph, resolution=args.resolution, projection=projection)
    _write(out, "boundary.json", grid.to_json() + "\n", outputs)
    emit_svg_scatter(grid, {"title": "decision boundary (hollow: raw, filled: aggregated)"},
                     out / "boundary.svg")
    outputs.append("boundary.svg")
    d_before = grid.distance_to_boundary(grid.positions_before)
    d_after = grid.distance_to_boundary(grid.positions_after)
    summary["boundary"] = {"projection": projection or "native",
                           "mean_distance_before": float(np.mean(d_before)),
                           "mean_distance_after": float(np.mean(d_after))}
    if not args.no_png:
        _plots().plot_boundary(grid, out / "boundary.png")
        outputs.append("boundary.png")
    _write(out, "analysis.json", json.dumps(summary, indent=2, sort_keys=True) + "\n", outputs)
    m = summary["margins"]
    print(f"mean margin delta {m['mean_delta']:.4f}, fraction increased "
          f"{m['fraction_increased']:.3f}; cluster score {emb.score_before:.3f} -> "
          f"{emb.score_after:.3f}")
    return EXIT_OK, outputs


COMMANDS = {
    "train": cmd_train,
    "reproduce-table": cmd_reproduce_table,
    "sweep-ratio": cmd_sweep_ratio,
    "check-equivalence": cmd_check_equivalence,
    "analyze": cmd_analyze,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--dataset", help="bundle directory, bundle name under --data-dir, "
                        "or synthetic:<kind>")
    common.add_argument("--data-dir", dest="data_dir",
                        help="where named bundles live (default $GRAPHMIX_DATA or ./data)")
    common.add_argument("--model", choices=KINDS)
    common.add_argument("--depth", type=int)
    common.add_argument("--hidden", type=int)
    common.add_argument("--self-loops", dest="self_loops", type=_bool)
    common.add_argument("--ppnp-power", dest="ppnp_power", type=int)
    common.add_argument("--relabel-power", dest="relabel_power", type=int)
    common.add_argument("--ratio", type=float, help="train ratio; val and test split the rest")
    common.add_argument("--seeds", type=int, help="repetitions for tables and sweeps")
    common.add_argument("--seed", type=int)
    common.add_argument("--epochs", type=int)
    common.add_argument("--lr", type=float)
    common.add_argument("--optimizer", choices=("sgd", "adam"))
    common.add_argument("--normalize-features", dest="normalize_features", type=_bool)
    common.add_argument("--out")
    common.add_argument("--config", help="JSON file of ExperimentConfig fields; flags win")
    common.add_argument("--no-png", action="store_true", help="skip matplotlib figures")

    p = argparse.ArgumentParser(prog="graphmix", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"graphmix {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("train", parents=[common], help="train one model and save a checkpoint")
    t = sub.add_parser("reproduce-table", parents=[common], help="rerun a published table grid")
    t.add_argument("table", choices=TABLES)
    t.add_argument("--datasets", help="comma-separated dataset names or paths")
    s = sub.add_parser("sweep-ratio", parents=[common], help="accuracy against train ratio")
    s.add_argument("--models", default="gcn,hmlp")
    s.add_argument("--ratios", type=_ratios)
    c = sub.add_parser("check-equivalence", parents=[common], help="run the oracle suite")
    c.add_argument("--inject-fault", dest="inject_fault", choices=FAULTS)
    a = sub.add_parser("analyze", parents=[common], help="margins, embeddings, boundary grid")
    a.add_argument("--checkpoint", required=True)
    a.add_argument("--layer", type=int)
    a.add_argument("--resolution", type=int, default=100)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.perf_counter()
    try:
        cfg = build_config(args)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        code, outputs = COMMANDS[args.command](cfg, args, out)
        write_manifest(out, cfg, args.command, started, outputs)
        return code
    except (UsageError, GraphMixError, OSError, ValueError) as exc:
        print(f"graphmix: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

