"""Versioned JSON model files and artifact bookkeeping.

Every model file has the shape
``{"kind", "version", "config", "parameters", "meta"}``. Floats are written
with ``repr`` precision, so a save/load cycle reproduces parameters exactly.
"""
from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

from . import __version__
from .baselines import MODEL_CLASSES
from .bilstm import BiLstmNetwork

FORMAT_VERSION = 1
KINDS = {**MODEL_CLASSES, "bilstm": BiLstmNetwork}


class ArtifactError(ValueError):
    pass


def digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()[:16]


def sha256_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def atomic_write(path: str | Path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8", newline="\n")
    os.replace(tmp, path)


def model_document(model, meta: dict | None = None) -> dict:
    meta = dict(meta or {})
    meta.setdefault("toolkit_version", __version__)
    return {"kind": model.kind, "version": FORMAT_VERSION, "config": model.config(),
            "parameters": model.parameters(), "meta": meta}


def save_model(model, path: str | Path, meta: dict | None = None) -> None:
    atomic_write(path, dumps(model_document(model, meta)))


def model_from_document(doc: dict):
    if doc.get("version") != FORMAT_VERSION:
        raise ArtifactError(f"unsupported model format version {doc.get('version')!r}")
    cls = KINDS.get(doc.get("kind"))
    if cls is None:
        raise ArtifactError(f"unknown model kind {doc.get('kind')!r}")
    return cls.from_parts(doc["config"], doc["parameters"])


def load_model(path: str | Path):
    """Returns ``(model, meta)``."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ArtifactError(f"cannot read model file {path}: {e}") from None
    return model_from_document(doc), doc.get("meta", {})
