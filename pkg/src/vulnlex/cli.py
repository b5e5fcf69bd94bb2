"""``vulnlex`` command line: embed | train | evaluate | scan | tokenize.

Settings come from built-in defaults, then an optional INI-style config file
(``--config``), then flags. Any config key can also be given as a flag,
e.g. ``--epochs 5`` or ``--bilstm.epochs 5``; flags win. The seed falls back
to the ``VULNLEX_SEED`` environment variable, then 0.

Exit codes: 0 success / no findings, 1 error, 2 ``scan`` found something.
"""
from __future__ import annotations

import argparse
import configparser
import logging
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

from . import __version__, bilstm
from .artifacts import ArtifactError, atomic_write, digest, dumps, load_model, save_model, sha256_file
from .corpus import DatasetError, SplitSpec, VulnClass, load_dataset, split
from .embedding import EmbeddingError, Word2vecConfig, load_embedding, save_embedding, sidecar_path
from .embedding import train as train_embedding
from .evaluation import EvaluationError, evaluate, render_text
from .lexer import tokenize
from .pipeline import MODEL_KINDS, ModelParams, check_compatible, default_tree_depth, labels_of, score_samples
from .pipeline import score_streams, tokenize_samples, train_model

log = logging.getLogger("vulnlex")


class CliError(Exception):
    pass


# keys accepted in the config file / as flags, with their section and type
SCHEMA: dict[str, tuple[str, type]] = {
    "dataset": ("run", str), "class": ("run", str), "model": ("run", str),
    "embedding": ("run", str), "out": ("run", str), "seed": ("run", int),
    "partition": ("run", str), "threshold": ("run", float),
    "vector_dim": ("embedding", int), "min_count": ("embedding", int),
    "iterations": ("embedding", int), "window": ("embedding", int),
    "negatives_per_positive": ("embedding", int), "initial_learning_rate": ("embedding", float),
    "batch_pairs": ("embedding", int),
    "train_fraction": ("split", float), "test_fraction": ("split", float),
    "validation_fraction": ("split", float),
    "max_depth": ("tree", int), "C": ("logreg", float),
    "max_iter": ("mlp", int), "hidden_units": ("mlp", int),
    "epochs": ("bilstm", int), "batch_size": ("bilstm", int), "dropout_rate": ("bilstm", float),
    "learning_rate": ("bilstm", float), "hidden": ("bilstm", int), "layers": ("bilstm", int),
    "max_len": ("bilstm", int), "clip_norm": ("bilstm", float),
}


@dataclass
class RunConfig:
    dataset: str | None = None
    vuln_class: str | None = None
    model: str = "bilstm"
    embedding: str | None = None
    out: str = "artifacts"
    seed: int = 0
    partition: str = "both"
    threshold: float = 0.5
    word2vec: Word2vecConfig = field(default_factory=Word2vecConfig)
    split: SplitSpec = field(default_factory=SplitSpec)
    params: ModelParams = field(default_factory=ModelParams)

    def digest(self) -> str:
        return digest({"model": self.model, "class": self.vuln_class,
                       "word2vec": self.word2vec.to_dict(), "split": self.split.to_dict(),
                       "params": _params_dict(self.params, self.model, self.vuln_class)})


def _params_dict(p: ModelParams, kind: str, vuln_class: str | None) -> dict:
    if kind == "tree":
        depth = p.tree_max_depth
        if depth is None and vuln_class:
            depth = default_tree_depth(vuln_class)
        return {"max_depth": depth}
    if kind == "logreg":
        return {"C": p.logreg_C}
    if kind == "mlp":
        return {"max_iter": p.mlp_max_iter, "hidden_units": p.mlp_hidden}
    if kind == "bilstm":
        return {"hidden": p.bilstm_hidden, "layers": p.bilstm_layers, "max_len": p.bilstm_max_len,
                "train": p.bilstm.to_dict()}
    return {}


def _coerce(key: str, value: str):
    typ = SCHEMA[key][1]
    try:
        return typ(value)
    except ValueError:
        raise CliError(f"bad value for {key}: {value!r}") from None


def build_config(args: argparse.Namespace, overrides: dict[str, str]) -> RunConfig:
    values: dict[str, object] = {}
    if getattr(args, "config", None):
        cp = configparser.ConfigParser()
        cp.optionxform = str
        if not cp.read(args.config, encoding="utf-8"):
            raise CliError(f"cannot read config file {args.config}")
        for section in cp.sections():
            for key, raw in cp.items(section):
                if key not in SCHEMA:
                    raise CliError(f"unknown config key {section}.{key}")
                values[key] = _coerce(key, raw)
    for key, raw in overrides.items():
        values[key] = _coerce(key, raw)
    for key in ("dataset", "model", "embedding", "out", "seed", "partition", "threshold"):
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    if getattr(args, "vuln_class", None):
        values["class"] = args.vuln_class

    if "seed" not in values:
        env = os.environ.get("VULNLEX_SEED")
        values["seed"] = int(env) if env else 0
    seed = int(values["seed"])
    if not 0 <= seed < 2 ** 64:
        raise CliError("seed must be a 64-bit unsigned integer")

    w2v = Word2vecConfig(**{k: values[k] for k in (
        "vector_dim", "min_count", "iterations", "window", "negatives_per_positive",
        "initial_learning_rate", "batch_pairs") if k in values}, seed=seed)
    split_spec = SplitSpec(**{k: values[k] for k in (
        "train_fraction", "test_fraction", "validation_fraction") if k in values}, seed=seed)
    train_cfg = bilstm.TrainConfig(**{k: values[k] for k in (
        "epochs", "batch_size", "dropout_rate", "learning_rate", "clip_norm") if k in values}, seed=seed)
    params = ModelParams(
        tree_max_depth=values.get("max_depth"), logreg_C=values.get("C", 1.0),
        mlp_max_iter=values.get("max_iter", 300), mlp_hidden=values.get("hidden_units", 100),
        bilstm_hidden=values.get("hidden", 50), bilstm_layers=values.get("layers", 3),
        bilstm_max_len=values.get("max_len", 200), bilstm=train_cfg)
    cfg = RunConfig(dataset=values.get("dataset"), vuln_class=values.get("class"),
                    model=values.get("model", "bilstm"), embedding=values.get("embedding"),
                    out=values.get("out", "artifacts"), seed=seed,
                    partition=values.get("partition", "both"), threshold=values.get("threshold", 0.5),
                    word2vec=w2v, split=split_spec, params=params)
    if cfg.model not in MODEL_KINDS:
        raise CliError(f"unknown model kind {cfg.model!r}; choose from {', '.join(MODEL_KINDS)}")
    if cfg.vuln_class is not None:
        cfg.vuln_class = VulnClass.parse(cfg.vuln_class).value
    if cfg.partition not in ("test", "validation", "both"):
        raise CliError("--partition must be test, validation or both")
    return cfg


def _require(value, flag: str):
    if value is None:
        raise CliError(f"{flag} is required")
    return value


def _load_class_dataset(path: str, vuln_class: str | None):
    samples = load_dataset(path)
    if not samples:
        raise CliError("empty corpus")
    classes = sorted({s.vuln_class.value for s in samples})
    if vuln_class is None:
        if len(classes) > 1:
            raise CliError(f"dataset mixes classes {classes}; pass --class")
        vuln_class = classes[0]
    if classes != [vuln_class]:
        raise CliError(f"dataset holds {classes}, expected only {vuln_class!r} (one dataset per class)")
    return samples, vuln_class


# --------------------------------------------------------------------------
# commands

def cmd_embed(cfg: RunConfig) -> int:
    dataset = _require(cfg.dataset, "--dataset")
    out = Path(cfg.embedding) if cfg.embedding else Path(cfg.out) / "embedding.txt"
    samples = load_dataset(dataset)
    if not samples:
        raise CliError("empty corpus")
    out.parent.mkdir(parents=True, exist_ok=True)
    side = sidecar_path(out)
    try:
        model = train_embedding(tokenize_samples(samples), cfg.word2vec)
        save_embedding(model, out, extra={"dataset_sha256": sha256_file(dataset)})
    except BaseException:
        for p in (out, side):
            p.unlink(missing_ok=True)
        raise
    final = model.loss_history[-1] if model.loss_history else float("nan")
    print(f"vocabulary size: {len(model.vocabulary)}")
    print(f"final average loss: {final:.6f}")
    print(f"wrote {out}")
    return 0


def cmd_train(cfg: RunConfig) -> int:
    dataset = _require(cfg.dataset, "--dataset")
    emb_path = _require(cfg.embedding, "--embedding")
    samples, vuln_class = _load_class_dataset(dataset, cfg.vuln_class)
    cfg = replace(cfg, vuln_class=vuln_class)
    emb = load_embedding(emb_path)
    if cfg.model == "bilstm" and cfg.params.bilstm_max_len < 1:
        raise CliError("max_len must be positive")
    parts = split(samples, cfg.split)
    if not parts.train:
        raise CliError("training partition is empty")
    model, history = train_model(cfg.model, parts.train, emb, vuln_class, cfg.params,
                                 seed=cfg.seed, validation=parts.validation)

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    model_path = out / "model.json"
    meta = {
        "toolkit_version": __version__,
        "seed": cfg.seed,
        "config_digest": cfg.digest(),
        "vuln_class": vuln_class,
        "split": cfg.split.to_dict(),
        "dataset_sha256": sha256_file(dataset),
        # relative to the model file so the artifact does not depend on where it was written
        "embedding_path": Path(os.path.relpath(emb_path, out)).as_posix(),
        "embedding_sha256": sha256_file(emb_path),
        "features": "sequence" if cfg.model == "bilstm" else "mean_pool",
        "max_len": cfg.params.bilstm_max_len,
        "hyperparameters": _params_dict(cfg.params, cfg.model, vuln_class),
    }
    written = []
    try:
        save_model(model, model_path, meta)
        written.append(model_path)
        if history:
            hist_path = out / "history.json"
            atomic_write(hist_path, dumps({"seed": cfg.seed, "config_digest": meta["config_digest"],
                                           "toolkit_version": __version__, "epochs": history}))
            written.append(hist_path)
    except BaseException:
        for p in written:
            p.unlink(missing_ok=True)
        raise

    scores = score_samples(model, parts.train, emb, cfg.params.bilstm_max_len)
    report, _ = evaluate(scores, labels_of(parts.train), vuln_class, cfg.model, "train", cfg.threshold)
    print(f"trained {cfg.model} for {vuln_class} on {len(parts.train)} samples")
    print(f"train accuracy {report.accuracy:.4f}  f_score {report.f_score:.4f}"
          + ("" if report.auc is None else f"  auc {report.auc:.4f}"))
    print(f"wrote {model_path}")
    return 0


def _recorded_embedding(model_path, meta: dict) -> Path | None:
    rel = meta.get("embedding_path")
    return None if rel is None else Path(model_path).parent / rel


def cmd_evaluate(cfg: RunConfig, model_path: str, seed_given: bool) -> int:
    model, meta = load_model(model_path)
    dataset = _require(cfg.dataset, "--dataset")
    emb_path = cfg.embedding or _recorded_embedding(model_path, meta)
    if emb_path is None:
        raise CliError("--embedding is required")
    if meta.get("embedding_sha256") and sha256_file(emb_path) != meta["embedding_sha256"]:
        raise CliError(f"embedding {emb_path} does not match the one the model was trained against")
    if meta.get("dataset_sha256") and sha256_file(dataset) != meta["dataset_sha256"]:
        raise CliError(f"dataset {dataset} differs from the one the model was trained on")
    if "split" not in meta:
        raise CliError("model file carries no split record; cannot reproduce partitions")
    split_spec = SplitSpec(**meta["split"])
    if seed_given and cfg.seed != split_spec.seed:
        raise CliError(f"seed {cfg.seed} does not match the model's recorded seed {split_spec.seed}")
    samples, vuln_class = _load_class_dataset(dataset, cfg.vuln_class or meta.get("vuln_class"))
    emb = load_embedding(emb_path)
    check_compatible(model, emb)
    parts = split(samples, split_spec)

    partitions = ["test", "validation"] if cfg.partition == "both" else [cfg.partition]
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    report_meta = {"toolkit_version": __version__, "seed": split_spec.seed,
                   "config_digest": meta.get("config_digest"), "model_sha256": sha256_file(model_path)}
    reports = []
    for part in partitions:
        rows = parts.partition(part)
        if not rows:
            raise CliError(f"{part} partition is empty")
        scores = score_samples(model, rows, emb, int(meta.get("max_len", 200)))
        report, curve = evaluate(scores, labels_of(rows), vuln_class, model.kind, part,
                                 cfg.threshold, report_meta)
        atomic_write(out / f"report_{part}.json", report.to_json())
        atomic_write(out / f"report_{part}.txt", render_text([report]))
        if curve is not None:
            atomic_write(out / f"roc_{part}.csv", curve.to_csv())
        reports.append(report)
    sys.stdout.write(render_text(reports))
    return 0


def _scan_targets(paths: Sequence[str]) -> list[Path]:
    files = []
    for p in map(Path, paths):
        if p.is_dir():
            files.extend(sorted(q for q in p.rglob("*.py") if q.is_file()))
        else:
            files.append(p)
    return files


def cmd_scan(cfg: RunConfig, model_path: str, targets: Sequence[str]) -> int:
    try:
        model, meta = load_model(model_path)
        emb_path = cfg.embedding or _recorded_embedding(model_path, meta)
        if emb_path is None:
            raise CliError("--embedding is required")
        emb = load_embedding(emb_path)
        check_compatible(model, emb)
    except (OSError, ArtifactError, EmbeddingError, ValueError) as e:
        raise CliError(f"cannot load artifacts: {e}") from None
    max_len = int(meta.get("max_len", 200))
    found, skipped = [], []
    for path in _scan_targets(targets):
        try:
            stream = tokenize(path.read_bytes(), str(path))
        except (OSError, UnicodeDecodeError) as e:
            log.warning("skipping %s: %s", path, e)
            skipped.append(path)
            continue
        score = float(score_streams(model, [stream], emb, max_len)[0])
        found.append((str(path), score))
    found.sort(key=lambda r: (-r[1], r[0]))
    flagged = 0
    for path, score in found:
        label = int(score >= cfg.threshold)
        flagged += label
        print(f"{path} {score:.6f} {label}")
    print(f"# scanned {len(found)} file(s), {flagged} flagged, {len(skipped)} skipped", file=sys.stderr)
    return 2 if flagged else 0


def cmd_tokenize(path: str | None) -> int:
    data = sys.stdin.buffer.read() if path in (None, "-") else Path(path).read_bytes()
    for tok in tokenize(data):
        print(f"{tok.kind.value}\t{tok.lexeme}")
    return 0


# --------------------------------------------------------------------------
# argument handling

def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI-style config file")
    common.add_argument("--dataset", help="JSONL dataset path")
    common.add_argument("--class", dest="vuln_class", help="vulnerability class")
    common.add_argument("--model", help="model kind (embed/train) or model file (evaluate/scan)")
    common.add_argument("--embedding", help="embedding file path")
    common.add_argument("--out", help="artifact output directory")
    common.add_argument("--seed", type=int)
    common.add_argument("--partition", choices=("test", "validation", "both"))
    common.add_argument("--threshold", type=float)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="vulnlex", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("embed", parents=[common], help="train token embeddings")
    sub.add_parser("train", parents=[common], help="train one classifier")
    sub.add_parser("evaluate", parents=[common], help="evaluate a trained model")
    p = sub.add_parser("scan", parents=[common], help="score source files")
    p.add_argument("targets", nargs="+")
    p = sub.add_parser("tokenize", parents=[common], help="print tokens of a file")
    p.add_argument("file", nargs="?")
    return parser


def _split_overrides(extra: list[str]) -> dict[str, str]:
    out: dict[str, str] = {}
    i = 0
    while i < len(extra):
        arg = extra[i]
        if not arg.startswith("--"):
            raise CliError(f"unexpected argument {arg!r}")
        key, eq, val = arg[2:].partition("=")
        if not eq:
            if i + 1 >= len(extra):
                raise CliError(f"flag {arg} needs a value")
            val = extra[i + 1]
            i += 1
        key = key.split(".")[-1].replace("-", "_")
        if key not in SCHEMA:
            raise CliError(f"unknown option --{key}")
        out[key] = val
        i += 1
    return out


def main(argv: Sequence[str] | None = None) -> int:
    parser = _parser()
    args, extra = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        overrides = _split_overrides(extra)
        if args.command == "tokenize":
            return cmd_tokenize(args.file)
        model_file = None
        if args.command in ("evaluate", "scan"):
            model_file, args.model = args.model, None
            if model_file is None:
                raise CliError("--model (model file) is required")
        cfg = build_config(args, overrides)
        if args.command == "embed":
            return cmd_embed(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "evaluate":
            seed_given = args.seed is not None or "seed" in overrides
            return cmd_evaluate(cfg, model_file, seed_given)
        return cmd_scan(cfg, model_file, args.targets)
    except (CliError, DatasetError, EmbeddingError, ArtifactError, EvaluationError,
            ValueError, OSError, FloatingPointError, RuntimeError) as e:
        print(f"vulnlex: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
