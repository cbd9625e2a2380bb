"""GCN, SGC and PPNP with per-node mixing rewrites, plus the HMLP and TMLP variants."""

from .data import SplitSpec, load_bundle, make_split, save_bundle, synthetic_graph
from .graph import (
    Graph,
    NormalizedAdjacency,
    SoftLabelMatrix,
    adjacency_power,
    homophily_relabel,
    normalize_adjacency,
)
from .models import (
    ModelSpec,
    TrainedModel,
    forward_gcn,
    forward_mlp,
    forward_ppnp,
    forward_sgc,
    load_model,
    mixup_form_predict,
    predict,
    predict_tmlp,
    save_model,
    train_hmlp,
    train_tmlp,
    train_unified,
)
from .trainer import RunRecord, TrainConfig, evaluate, fit, repeat_runs

__version__ = "0.1.0"
