"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Criteria 6-10 need the Cora/CiteSeer/PubMed bundles (see README). Without
them those criteria fail with a "bundle not found" line; the same protocol is
then run on the offline ``citation_like`` graph and its numbers are appended
for information only.

Run directly for the criterion lines alone::

    python3 tests/test_acceptance.py
"""

import sys
import time
from pathlib import Path

import numpy as np
import pytest

from graphmix import (
    Graph,
    ModelSpec,
    SplitSpec,
    TrainConfig,
    fit,
    homophily_relabel,
    load_bundle,
    make_split,
    normalize_adjacency,
    repeat_runs,
    synthetic_graph,
)
from graphmix.analysis import export_embeddings, margin_report
from graphmix.checks import (
    check_edgeless_collapse,
    check_ideal_mixup_loss,
    check_layerwise_gcn2,
    check_mixup_equivalence,
    gradient_error,
    toy_graph,
)
from graphmix.cli import main as cli_main

sys.path.insert(0, str(Path(__file__).resolve().parent))
from conftest import ACCEPTANCE, data_dir  # noqa: E402

SEEDS = 10
SURROGATE_SEEDS = 3
CITATION = ("cora", "citeseer", "pubmed")


def record(key, ok, detail):
    ACCEPTANCE[key] = (bool(ok), detail)
    print(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
    return bool(ok)


def bundle(name):
    path = data_dir() / name
    if not (path / "meta.json").is_file():
        return None
    return load_bundle(path)


def missing(names):
    return f"bundle(s) {', '.join(names)} not found under {data_dir()}"


def surrogate():
    return synthetic_graph("citation_like", 0)


def mean_acc(graph, spec, seeds):
    return 100 * repeat_runs(graph, spec, TrainConfig(seed=0), seeds).mean


# -- 1-5: exact properties ---------------------------------------------------

def random_graph(rng):
    n = int(rng.integers(2, 33))
    p = rng.uniform(0.05, 0.5)
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    return Graph(rng.normal(size=(n, int(rng.integers(1, 6)))), edges,
                 rng.integers(3, size=n), 3)


def criterion_1():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    bad = []
    for t in range(50):
        g = random_graph(rng)
        adj = normalize_adjacency(g)
        for res in (check_mixup_equivalence(g, adj, seed=t), check_layerwise_gcn2(g, adj, seed=t)):
            if not res.passed:
                bad.append(f"graph {t}: {res.line()}")
    secs = time.perf_counter() - start
    ok = not bad and secs < 10
    return ok, (f"50 graphs, SGC-1..3/GCN-1 per node and GCN-2 layer-wise, {secs:.2f}s"
                + ("" if not bad else "; " + "; ".join(bad[:3])))


def criterion_2():
    g = synthetic_graph("three_node_example")
    soft = homophily_relabel(g, normalize_adjacency(g)).matrix
    rows_ok = soft.tolist() == [[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]]
    loss = check_ideal_mixup_loss(trials=20, seed=7)
    return rows_ok and loss.passed, f"relabel rows {soft.tolist()}; loss identity {loss.detail}"


def criterion_3():
    start = time.perf_counter()
    worst, where = 0.0, ""
    for seed in range(3):
        g = toy_graph(seed)
        for kind in ("mlp", "gcn", "sgc", "ppnp", "hmlp", "tmlp", "unified"):
            for depth in (1, 2):
                err = gradient_error(ModelSpec(kind, depth, hidden_dim=5, relabel_power=depth),
                                     g, seed=seed)
                if err > worst:
                    worst, where = err, f"{kind}-{depth} seed {seed}"
    secs = time.perf_counter() - start
    return worst <= 1e-5 and secs < 30, f"max rel err {worst:.2e} ({where}), {secs:.2f}s"


def criterion_4():
    rng = np.random.default_rng(5)
    details = []
    ok = True
    for t in range(5):
        res = check_edgeless_collapse(random_graph(rng), seed=t)
        ok &= res.passed
        if not res.passed:
            details.append(res.detail)
    return ok, "GCN-k, TMLP, unified, PPNP vs MLP on 5 edgeless graphs, depths 1-3: " + (
        "bitwise equal" if ok else "; ".join(details))


def _invoke(tmp, tag):
    out = Path(tmp) / tag
    common = ["--dataset", "synthetic:two_clusters", "--no-png", "--epochs", "60"]
    codes = [
        cli_main(["train", *common, "--model", "tmlp", "--depth", "1", "--out", str(out / "train")]),
        cli_main(["analyze", *common, "--checkpoint", str(out / "train" / "model.bin"),
                  "--resolution", "40", "--out", str(out / "analyze")]),
        cli_main(["sweep-ratio", *common, "--models", "mlp,gcn", "--ratios", "0.3,0.6",
                  "--seeds", "2", "--out", str(out / "sweep")]),
    ]
    files = ["train/run.jsonl", "train/summary.json", "train/model.bin", "analyze/margins.csv",
             "analyze/boundary.svg", "analyze/embeddings_after.svg", "sweep/sweep.csv",
             "sweep/sweep.svg"]
    return codes, {f: (out / f).read_bytes() for f in files}


def criterion_5(tmp):
    codes_a, a = _invoke(tmp, "a")
    codes_b, b = _invoke(tmp, "b")
    diff = [f for f in a if a[f] != b[f]]
    ok = codes_a == codes_b == [0, 0, 0] and not diff
    return ok, f"{len(a)} artifacts compared across two invocations" + (
        f"; differ: {diff}" if diff else "; byte-identical")


# -- 6-10: desk-scale reproduction ------------------------------------------

def table_means(graph, kinds, seeds):
    g = make_split(graph, SplitSpec(0.6, 0.2, seed=0))
    return {k: mean_acc(g, ModelSpec(k, 2), seeds) for k in kinds}


def judge_6(per_ds):
    """per_ds[name] = {mlp, gcn, hmlp, tmlp}; returns (a, b, c) booleans."""
    # the GCN-over-MLP margin is claimed for Cora and CiteSeer; a lone surrogate stands in for both
    gap_sets = [d for d in per_ds if d in ("cora", "citeseer")] or list(per_ds)
    a = all(per_ds[d]["gcn"] - per_ds[d]["mlp"] >= 5 for d in gap_sets)
    avg = {k: np.mean([v[k] for v in per_ds.values()]) for k in ("gcn", "hmlp", "tmlp")}
    b = all(abs(v["hmlp"] - v["gcn"]) <= 3 for v in per_ds.values()) and abs(avg["hmlp"] - avg["gcn"]) <= 2
    c = all(abs(v["tmlp"] - v["gcn"]) <= 3 for v in per_ds.values()) and abs(avg["tmlp"] - avg["gcn"]) <= 2
    return a, b, c


def fmt_means(per_ds):
    return "; ".join(f"{d} " + " ".join(f"{k}={v:.2f}" for k, v in m.items())
                     for d, m in per_ds.items())


def criterion_6():
    graphs = {n: bundle(n) for n in CITATION}
    absent = [n for n, g in graphs.items() if g is None]
    kinds = ("mlp", "gcn", "hmlp", "tmlp")
    if absent:
        sur = {"citation_like": table_means(surrogate(), kinds, SURROGATE_SEEDS)}
        a, b, c = judge_6(sur)
        return {k: (False, f"{missing(absent)}; surrogate ({SURROGATE_SEEDS} seeds, informational): "
                    f"{fmt_means(sur)} -> {k[-1]} would be {'PASS' if v else 'FAIL'}")
                for k, v in (("6a", a), ("6b", b), ("6c", c))}
    per_ds = {n: table_means(g, kinds, SEEDS) for n, g in graphs.items()}
    a, b, c = judge_6(per_ds)
    detail = fmt_means(per_ds)
    return {"6a": (a, detail), "6b": (b, detail), "6c": (c, detail)}


def sweep_gap(graph, seeds):
    gaps = {}
    for r in (0.1, 0.9):
        g = make_split(graph, SplitSpec.from_train_ratio(r, seed=0))
        gaps[r] = mean_acc(g, ModelSpec("hmlp", 2), seeds) - mean_acc(g, ModelSpec("gcn", 2), seeds)
    return gaps[0.9] > gaps[0.1], f"HMLP-GCN gap at 0.1: {gaps[0.1]:+.2f}, at 0.9: {gaps[0.9]:+.2f}"


def criterion_7():
    cora = bundle("cora")
    if cora is None:
        ok, d = sweep_gap(surrogate(), SURROGATE_SEEDS)
        return False, f"{missing(['cora'])}; surrogate (informational): {d}"
    return sweep_gap(cora, SEEDS)


def depth_sweep(graph, seeds):
    g = make_split(graph, SplitSpec(0.2, 0.4, seed=0))
    ok, parts = True, []
    for depth in (1, 2, 3, 4):
        sgc = mean_acc(g, ModelSpec("sgc", depth), seeds)
        uni = mean_acc(g, ModelSpec("unified", depth), seeds)
        ok &= abs(uni - sgc) <= 3
        parts.append(f"d{depth} sgc={sgc:.2f} unified={uni:.2f}")
    return ok, ", ".join(parts)


def criterion_8():
    cora = bundle("cora")
    if cora is None:
        ok, d = depth_sweep(surrogate(), SURROGATE_SEEDS)
        return False, f"{missing(['cora'])}; surrogate (informational): {d} -> {'PASS' if ok else 'FAIL'}"
    return depth_sweep(cora, SEEDS)


def margin_claim(graph):
    model, _ = fit(graph, ModelSpec("tmlp", 1), TrainConfig(seed=0))
    rep = margin_report(model, graph)
    ok = rep.mean_delta > 0 and rep.fraction_increased >= 0.6
    return ok, f"mean delta {rep.mean_delta:+.4f}, fraction increased {rep.fraction_increased:.3f}"


def criterion_9():
    ok_tc, d_tc = margin_claim(synthetic_graph("two_clusters", 0))
    cora = bundle("cora")
    if cora is None:
        _, d_s = margin_claim(surrogate())
        return False, (f"two_clusters: {d_tc}; {missing(['cora'])}; "
                       f"surrogate citation_like (informational): {d_s}")
    ok_c, d_c = margin_claim(make_split(cora, SplitSpec(0.6, 0.2, seed=0)))
    return ok_tc and ok_c, f"two_clusters: {d_tc}; cora: {d_c}"


def embedding_claim(graph):
    model, _ = fit(graph, ModelSpec("tmlp", 2), TrainConfig(seed=0))
    emb = export_embeddings(model, graph, 1)
    return emb.score_after < emb.score_before, (
        f"hidden-layer intra/inter ratio {emb.score_before:.4f} -> {emb.score_after:.4f}")


def criterion_10():
    cora = bundle("cora")
    if cora is None:
        _, d = embedding_claim(surrogate())
        return False, f"{missing(['cora'])}; surrogate (informational): {d}"
    return embedding_claim(make_split(cora, SplitSpec(0.6, 0.2, seed=0)))


# -- pytest wrappers ---------------------------------------------------------

def test_criterion_1_mixup_equivalence():
    assert record("1", *criterion_1())


def test_criterion_2_relabel_example():
    assert record("2", *criterion_2())


def test_criterion_3_gradients():
    assert record("3", *criterion_3())


def test_criterion_4_collapse():
    assert record("4", *criterion_4())


def test_criterion_5_determinism(tmp_path):
    assert record("5", *criterion_5(tmp_path))


@pytest.fixture(scope="module")
def results_6():
    return criterion_6()


@pytest.mark.parametrize("part", ["6a", "6b", "6c"])
def test_criterion_6_tables(results_6, part):
    assert record(part, *results_6[part])


def test_criterion_7_ratio_sweep():
    assert record("7", *criterion_7())


def test_criterion_8_depth_sweep():
    assert record("8", *criterion_8())


def test_criterion_9_margin():
    assert record("9", *criterion_9())


def test_criterion_10_embedding():
    assert record("10", *criterion_10())


if __name__ == "__main__":
    import tempfile

    failed = 0
    for key, fn in (("1", criterion_1), ("2", criterion_2), ("3", criterion_3), ("4", criterion_4)):
        failed += not record(key, *fn())
    with tempfile.TemporaryDirectory() as tmp:
        failed += not record("5", *criterion_5(tmp))
    for key, res in criterion_6().items():
        failed += not record(key, *res)
    for key, fn in (("7", criterion_7), ("8", criterion_8), ("9", criterion_9), ("10", criterion_10)):
        failed += not record(key, *fn())
    sys.exit(1 if failed else 0)
