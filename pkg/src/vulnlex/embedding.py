"""Skip-gram word2vec with negative sampling over token streams.

Training is mini-batched SGD: pairs are processed in fixed-size chunks, and
each chunk is scored and differentiated against only the output rows it
touches, so the heavy lifting is dense matrix products. Chunks are taken
in corpus order, so a fixed seed yields bit-identical vectors.
"""
from __future__ import annotations

import hashlib
import json
import logging
import string
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence
from urllib.parse import quote, unquote

import numpy as np

from . import LEXER_VERSION, __version__
from .lexer import TokenStream
from .numerics import NonFiniteError, Rng, log_sigmoid, sigmoid

log = logging.getLogger(__name__)

_SAFE = "".join(c for c in string.printable if not c.isspace() and c != "%")


class EmbeddingError(ValueError):
    pass


@dataclass(frozen=True)
class Word2vecConfig:
    vector_dim: int = 300
    min_count: int = 10
    iterations: int = 200
    window: int = 5
    negatives_per_positive: int = 5
    initial_learning_rate: float = 0.025
    seed: int = 0
    batch_pairs: int = 128

    def __post_init__(self):
        for name in ("vector_dim", "min_count", "window", "negatives_per_positive", "batch_pairs"):
            if getattr(self, name) < 1:
                raise EmbeddingError(f"{name} must be positive")
        if self.iterations < 0:
            raise EmbeddingError("iterations must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class Vocabulary:
    lexemes: list[str]
    counts: list[int]
    index: dict[str, int] = field(init=False)

    def __post_init__(self):
        self.index = {lex: i for i, lex in enumerate(self.lexemes)}

    def __len__(self) -> int:
        return len(self.lexemes)

    def __contains__(self, lexeme: str) -> bool:
        return lexeme in self.index

    def lookup(self, stream: TokenStream) -> np.ndarray:
        """Vocabulary indices for each token, ``-1`` where out of vocabulary."""
        get = self.index.get
        return np.array([get(t.lexeme, -1) for t in stream.tokens], dtype=np.int64)


@dataclass
class EmbeddingModel:
    vocabulary: Vocabulary
    input_vectors: np.ndarray
    output_vectors: np.ndarray | None
    config: Word2vecConfig
    loss_history: list[float] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.input_vectors.shape[1]

    def vector(self, lexeme: str) -> np.ndarray:
        return self.input_vectors[self.vocabulary.index[lexeme]]


def build_vocab(corpus: Sequence[TokenStream], config: Word2vecConfig | int) -> Vocabulary:
    """Lexemes with frequency >= min_count, by descending count then lexeme."""
    min_count = config if isinstance(config, int) else config.min_count
    if not corpus or all(len(s) == 0 for s in corpus):
        raise EmbeddingError("empty corpus")
    counts = Counter(t.lexeme for s in corpus for t in s.tokens)
    kept = sorted((lex for lex, c in counts.items() if c >= min_count), key=lambda lex: (-counts[lex], lex))
    if not kept:
        raise EmbeddingError(f"vocabulary empty after min_count={min_count} filtering")
    return Vocabulary(kept, [counts[lex] for lex in kept])


def generate_pairs(stream: TokenStream | np.ndarray, window: int,
                   vocabulary: Vocabulary | None = None) -> list[tuple[int, int]]:
    """Skip-gram (center, context) index pairs.

    Positions are those of the original stream; out-of-vocabulary tokens
    neither emit nor receive pairs but still occupy their position.
    """
    idx = vocabulary.lookup(stream) if isinstance(stream, TokenStream) else np.asarray(stream)
    return [(int(c), int(o)) for c, o in _pairs_array(idx, window)]


def _pairs_array(idx: np.ndarray, window: int) -> np.ndarray:
    n = len(idx)
    chunks = []
    for i in range(n):
        if idx[i] < 0:
            continue
        lo, hi = max(0, i - window), min(n, i + window + 1)
        ctx = np.concatenate([idx[lo:i], idx[i + 1:hi]])
        ctx = ctx[ctx >= 0]
        if ctx.size:
            chunks.append(np.column_stack([np.full(ctx.size, idx[i]), ctx]))
    if not chunks:
        return np.empty((0, 2), dtype=np.int64)
    return np.concatenate(chunks).astype(np.int64)


def pair_loss_and_grad(center: np.ndarray, context: np.ndarray,
                       negatives: np.ndarray) -> tuple[float, dict[str, np.ndarray]]:
    """Negative-sampling loss for one pair and its gradients.

    ``loss = -log s(u_o . v_c) - sum_k log s(-u_k . v_c)``.
    """
    pos = float(context @ center)
    neg = negatives @ center
    loss = float(-log_sigmoid(pos) - np.sum(log_sigmoid(-neg)))
    g_pos = float(sigmoid(pos)) - 1.0
    g_neg = sigmoid(neg)
    return loss, {
        "center": g_pos * context + g_neg @ negatives,
        "context": g_pos * center,
        "negatives": np.outer(g_neg, center),
    }


class _NegativeSampler:
    def __init__(self, counts: Sequence[int], rng: Rng):
        p = np.asarray(counts, dtype=np.float64) ** 0.75
        self.cdf = np.cumsum(p / p.sum())
        self.cdf[-1] = 1.0
        self.size = len(counts)
        self.rng = rng

    def draw(self, positives: np.ndarray, k: int) -> np.ndarray:
        shape = (positives.size, k)
        out = np.searchsorted(self.cdf, self.rng.random(positives.size * k), side="right").reshape(shape)
        if self.size == 1:
            return out
        for _ in range(16):
            clash = out == positives[:, None]
            if not clash.any():
                return out
            out[clash] = np.searchsorted(self.cdf, self.rng.random(int(clash.sum())), side="right")
        clash = out == positives[:, None]
        out[clash] = (out[clash] + 1) % self.size
        return out


def _scatter_add(table: np.ndarray, idx: np.ndarray, rows: np.ndarray, scale: float) -> None:
    """``table[idx] += scale * rows`` with repeated indices accumulated in a
    fixed order."""
    order = np.argsort(idx, kind="stable")
    sorted_idx = idx[order]
    starts = np.r_[0, np.nonzero(sorted_idx[1:] != sorted_idx[:-1])[0] + 1]
    table[sorted_idx[starts]] += scale * np.add.reduceat(rows[order], starts, axis=0)


def train(corpus: Sequence[TokenStream], config: Word2vecConfig = Word2vecConfig()) -> EmbeddingModel:
    vocab = build_vocab(corpus, config)
    V, d = len(vocab), config.vector_dim
    root = Rng(config.seed)
    w_in = root.spawn(1).uniform(-0.5 / d, 0.5 / d, (V, d))
    w_out = np.zeros((V, d))
    model = EmbeddingModel(vocab, w_in, w_out, config)
    if config.iterations == 0:
        return model

    pairs = [p for s in corpus if len(p := _pairs_array(vocab.lookup(s), config.window))]
    pairs = np.concatenate(pairs) if pairs else np.empty((0, 2), dtype=np.int64)
    if len(pairs) == 0:
        log.warning("corpus yields no skip-gram pairs; vectors stay at initialization")
        return model

    k = config.negatives_per_positive if V > 1 else 0
    sampler = _NegativeSampler(vocab.counts, root.spawn(2))
    lr0 = config.initial_learning_rate
    lr_min = lr0 * 1e-4
    total = config.iterations * len(pairs)
    done = 0
    B = config.batch_pairs
    for epoch in range(config.iterations):
        epoch_loss = 0.0
        for start in range(0, len(pairs), B):
            chunk = pairs[start:start + B]
            lr = max(lr_min, lr0 - (lr0 - lr_min) * done / total)
            done += len(chunk)
            c, o = chunk[:, 0], chunk[:, 1]
            b = len(chunk)
            rows = np.arange(b)
            neg = sampler.draw(o, k) if k else np.empty((b, 0), dtype=np.int64)
            # work on the distinct output rows touched by this chunk
            out_rows, inv = np.unique(np.concatenate([o, neg.ravel()]), return_inverse=True)
            w_sub = w_out[out_rows]
            v = w_in[c]
            scores = v @ w_sub.T
            col_pos = inv[:b]
            col_neg = inv[b:].reshape(b, k)
            s_pos = scores[rows, col_pos]
            s_neg = scores[rows[:, None], col_neg]
            g_pos = sigmoid(s_pos) - 1.0
            g_neg = sigmoid(s_neg)
            loss = -log_sigmoid(s_pos).sum() - log_sigmoid(-s_neg).sum()
            # coef[r, j]: d loss / d score(pair r, output row j)
            flat = np.concatenate([rows * len(out_rows) + col_pos,
                                   (rows[:, None] * len(out_rows) + col_neg).ravel()])
            coef = np.bincount(flat, weights=np.concatenate([g_pos, g_neg.ravel()]),
                               minlength=b * len(out_rows)).reshape(b, len(out_rows))
            dv = coef @ w_sub
            w_out[out_rows] -= lr * (coef.T @ v)
            _scatter_add(w_in, c, dv, -lr)
            epoch_loss += float(loss)
        avg = epoch_loss / len(pairs)
        if not np.isfinite(avg):
            raise NonFiniteError(f"non-finite word2vec loss in epoch {epoch + 1}")
        model.loss_history.append(avg)
    return model


def embed_sequence(stream: TokenStream, model: EmbeddingModel, max_len: int = 200) -> tuple[np.ndarray, int]:
    """Row-per-token matrix (``max_len x dim``) and the number of valid rows.

    Long streams keep their last ``max_len`` tokens; short ones are zero
    padded at the end. Unknown tokens map to the zero vector but still count
    toward the valid length.
    """
    idx = model.vocabulary.lookup(stream)[-max_len:] if max_len > 0 else np.empty(0, dtype=np.int64)
    out = np.zeros((max_len, model.dim))
    known = idx >= 0
    out[:len(idx)][known] = model.input_vectors[idx[known]]
    return out, len(idx)


def pool_mean(stream: TokenStream, model: EmbeddingModel) -> np.ndarray:
    idx = model.vocabulary.lookup(stream)
    idx = idx[idx >= 0]
    if idx.size == 0:
        return np.zeros(model.dim)
    return model.input_vectors[idx].mean(axis=0)


# --------------------------------------------------------------------------
# persistence

def encode_lexeme(lexeme: str) -> str:
    return quote(lexeme, safe=_SAFE)


def decode_lexeme(text: str) -> str:
    return unquote(text)


def sidecar_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def file_checksum(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def save_embedding(model: EmbeddingModel, path: str | Path, extra: dict | None = None) -> None:
    """Write the word2vec text file plus a JSON sidecar with config and counts."""
    path = Path(path)
    lines = [f"{len(model.vocabulary)} {model.dim}\n"]
    for lex, vec in zip(model.vocabulary.lexemes, model.input_vectors):
        lines.append(encode_lexeme(lex) + " " + " ".join(f"{x:.9g}" for x in vec) + "\n")
    path.write_text("".join(lines), encoding="utf-8", newline="\n")
    meta = {
        "toolkit_version": __version__,
        "lexer_version": LEXER_VERSION,
        "seed": model.config.seed,
        "config": model.config.to_dict(),
        "config_digest": model.config.digest(),
        "counts": model.vocabulary.counts,
        "final_loss": model.loss_history[-1] if model.loss_history else None,
    }
    meta.update(extra or {})
    sidecar_path(path).write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def load_embedding(path: str | Path) -> EmbeddingModel:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise EmbeddingError(f"{path}: bad header")
        V, d = int(header[0]), int(header[1])
        lexemes, rows = [], []
        for lineno, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split(" ")
            if len(parts) != d + 1:
                raise EmbeddingError(f"{path}:{lineno}: expected {d} values")
            lexemes.append(decode_lexeme(parts[0]))
            rows.append([float(x) for x in parts[1:]])
    if len(lexemes) != V:
        raise EmbeddingError(f"{path}: header says {V} rows, found {len(lexemes)}")
    side = sidecar_path(path)
    if side.exists():
        meta = json.loads(side.read_text(encoding="utf-8"))
        config = Word2vecConfig(**meta["config"])
        counts = meta.get("counts") or [0] * V
    else:
        config = Word2vecConfig(vector_dim=d)
        counts = [0] * V
    vectors = np.array(rows, dtype=np.float64).reshape(V, d)
    return EmbeddingModel(Vocabulary(lexemes, list(counts)), vectors, None, config)
