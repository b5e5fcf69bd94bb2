"""Glue between datasets, embeddings, and the five model kinds."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import baselines, bilstm
from .corpus import LabeledSample, VulnClass
from .embedding import EmbeddingModel, pool_mean
from .lexer import TokenStream, tokenize

MODEL_KINDS = ("gnb", "tree", "logreg", "mlp", "bilstm")


def default_tree_depth(vuln_class: VulnClass | str) -> int:
    return 2 if VulnClass(vuln_class) in (VulnClass.XSS, VulnClass.OPEN_REDIRECT) else 5


@dataclass
class ModelParams:
    """Hyper-parameters for every model kind; ``tree_max_depth=None`` means
    the per-class default."""
    tree_max_depth: int | None = None
    logreg_C: float = 1.0
    mlp_max_iter: int = 300
    mlp_hidden: int = 100
    bilstm_hidden: int = 50
    bilstm_layers: int = 3
    bilstm_max_len: int = 200
    bilstm: bilstm.TrainConfig = field(default_factory=bilstm.TrainConfig)


def tokenize_samples(samples: Sequence[LabeledSample]) -> list[TokenStream]:
    return [tokenize(s.code, s.id) for s in samples]


def pooled_features(streams: Sequence[TokenStream], emb: EmbeddingModel) -> np.ndarray:
    if not streams:
        return np.zeros((0, emb.dim))
    return np.stack([pool_mean(s, emb) for s in streams])


def labels_of(samples: Sequence[LabeledSample]) -> np.ndarray:
    return np.array([s.label for s in samples], dtype=np.int64)


def train_model(kind: str, train: Sequence[LabeledSample], emb: EmbeddingModel,
                vuln_class: VulnClass | str, params: ModelParams = ModelParams(), seed: int = 0,
                validation: Sequence[LabeledSample] | None = None):
    """Fit one model; returns ``(model, history)`` (history empty for
    closed-form or non-iterative kinds)."""
    streams = tokenize_samples(train)
    y = labels_of(train)
    if kind == "bilstm":
        X, lengths = bilstm.embed_batch(streams, emb, params.bilstm_max_len)
        val = None
        if validation:
            Xv, Lv = bilstm.embed_batch(tokenize_samples(validation), emb, params.bilstm_max_len)
            val = (Xv, Lv, labels_of(validation))
        cfg = params.bilstm
        net = bilstm.init_network(emb.dim, params.bilstm_hidden, params.bilstm_layers,
                                  cfg.dropout_rate, seed=cfg.seed)
        return bilstm.fit(net, (X, lengths, y), val, cfg)
    X = pooled_features(streams, emb)
    if kind == "gnb":
        return baselines.gnb_fit(X, y), []
    if kind == "tree":
        depth = params.tree_max_depth if params.tree_max_depth is not None else default_tree_depth(vuln_class)
        return baselines.tree_fit(X, y, depth), []
    if kind == "logreg":
        return baselines.logreg_fit(X, y, C=params.logreg_C), []
    if kind == "mlp":
        model = baselines.mlp_fit(X, y, max_iter=params.mlp_max_iter, hidden_units=params.mlp_hidden, seed=seed)
        return model, [{"epoch": i + 1, "train_loss": v} for i, v in enumerate(model.history)]
    raise ValueError(f"unknown model kind {kind!r}")


def score_streams(model, streams: Sequence[TokenStream], emb: EmbeddingModel,
                  max_len: int = 200) -> np.ndarray:
    if len(streams) == 0:
        return np.zeros(0)
    if model.kind == "bilstm":
        if emb.dim != model.input_dim:
            raise ValueError(f"embedding dim {emb.dim} != network input dim {model.input_dim}")
        X, lengths = bilstm.embed_batch(streams, emb, max_len)
        return bilstm.predict_scores(model, X, lengths)
    return np.atleast_1d(model.score(pooled_features(streams, emb)))


def score_samples(model, samples: Sequence[LabeledSample], emb: EmbeddingModel,
                  max_len: int = 200) -> np.ndarray:
    return score_streams(model, tokenize_samples(samples), emb, max_len)


def input_dim(model) -> int | None:
    """Feature dimension a fitted model expects (None if not recorded)."""
    if model.kind == "bilstm":
        return model.input_dim
    if model.kind == "gnb":
        return model.means.shape[1]
    if model.kind == "logreg":
        return model.weights.shape[0]
    if model.kind == "mlp":
        return model.w1.shape[0]
    return None


def check_compatible(model, emb: EmbeddingModel) -> None:
    d = input_dim(model)
    if d is not None and d != emb.dim:
        raise ValueError(f"incompatible embedding: dim {emb.dim}, model expects {d}")
