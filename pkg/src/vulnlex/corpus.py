"""Labeled snippets, the JSONL interchange format, and stratified splits."""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .numerics import Rng


class DatasetError(ValueError):
    pass


class VulnClass(str, Enum):
    SQL_INJECTION = "sql_injection"
    XSS = "xss"
    COMMAND_INJECTION = "command_injection"
    XSRF = "xsrf"
    REMOTE_CODE_EXECUTION = "remote_code_execution"
    PATH_DISCLOSURE = "path_disclosure"
    OPEN_REDIRECT = "open_redirect"

    @classmethod
    def parse(cls, name: str) -> "VulnClass":
        try:
            return cls(name)
        except ValueError:
            raise DatasetError(f"unknown vulnerability class {name!r}") from None

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class LabeledSample:
    id: str
    code: str
    label: int
    vuln_class: VulnClass
    origin: str | None = None

    def __post_init__(self):
        if self.label not in (0, 1) or isinstance(self.label, bool):
            raise DatasetError(f"label must be 0 or 1, got {self.label!r}")
        if not self.code:
            raise DatasetError(f"sample {self.id!r} has empty code")

    def to_record(self) -> dict:
        rec = {"id": self.id, "code": self.code, "label": self.label,
               "vuln_class": self.vuln_class.value}
        if self.origin is not None:
            rec["origin"] = self.origin
        return rec


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.70
    test_fraction: float = 0.15
    validation_fraction: float = 0.15
    seed: int = 0

    def __post_init__(self):
        fr = (self.train_fraction, self.test_fraction, self.validation_fraction)
        if any(not 0.0 < f < 1.0 for f in fr):
            raise DatasetError(f"split fractions must lie in (0, 1): {fr}")
        if abs(sum(fr) - 1.0) > 1e-9:
            raise DatasetError(f"split fractions must sum to 1, got {sum(fr)!r}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise DatasetError("split seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        return {"train_fraction": self.train_fraction, "test_fraction": self.test_fraction,
                "validation_fraction": self.validation_fraction, "seed": self.seed}


@dataclass(frozen=True)
class DatasetSplit:
    train: list[LabeledSample]
    test: list[LabeledSample]
    validation: list[LabeledSample]

    def partition(self, name: str) -> list[LabeledSample]:
        if name not in ("train", "test", "validation"):
            raise KeyError(name)
        return getattr(self, name)


def _parse_record(line: str, lineno: int) -> LabeledSample:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as e:
        raise DatasetError(f"line {lineno}: malformed JSON ({e.msg})") from None
    if not isinstance(rec, dict):
        raise DatasetError(f"line {lineno}: record must be a JSON object")
    for key in ("id", "code", "label", "vuln_class"):
        if key not in rec:
            raise DatasetError(f"line {lineno}: missing key {key!r}")
    if not isinstance(rec["id"], str) or not isinstance(rec["code"], str):
        raise DatasetError(f"line {lineno}: 'id' and 'code' must be strings")
    label = rec["label"]
    if isinstance(label, bool) or not isinstance(label, int) or label not in (0, 1):
        raise DatasetError(f"line {lineno}: label must be 0 or 1, got {label!r}")
    origin = rec.get("origin")
    if origin is not None and not isinstance(origin, str):
        raise DatasetError(f"line {lineno}: 'origin' must be a string")
    try:
        vc = VulnClass.parse(rec["vuln_class"])
        return LabeledSample(rec["id"], rec["code"], label, vc, origin)
    except DatasetError as e:
        raise DatasetError(f"line {lineno}: {e}") from None


def load_dataset(path: str | Path) -> list[LabeledSample]:
    """Read a JSONL dataset. Errors name the offending 1-based line."""
    samples = []
    seen: dict[str, int] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            s = _parse_record(line, lineno)
            if s.id in seen:
                raise DatasetError(f"line {lineno}: duplicate id {s.id!r} (first on line {seen[s.id]})")
            seen[s.id] = lineno
            samples.append(s)
    return samples


def save_dataset(samples: Iterable[LabeledSample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in samples:
            fh.write(json.dumps(s.to_record(), ensure_ascii=False) + "\n")


def _allocate(n: int, spec: SplitSpec) -> tuple[int, int, int]:
    # round-half-up so the arithmetic is the same in every language
    n_train = min(n, math.floor(spec.train_fraction * n + 0.5))
    n_test = min(n - n_train, math.floor(spec.test_fraction * n + 0.5))
    return n_train, n_test, n - n_train - n_test


def _stratified_quota(m0: int, m1: int, sizes: tuple[int, int, int],
                      fractions: tuple[float, float, float]) -> list[list[int]]:
    """Per-label partition counts with exact row and column totals.

    Searches label-0 counts within one of ``floor``/``ceil`` of the exact
    share; label-1 counts are what remains of each partition size. Picks the
    table with the smallest worst-case deviation from the fractional shares.
    """
    ranges = [range(max(0, math.floor(f * m0) - 1), math.ceil(f * m0) + 2) for f in fractions]
    best = None
    for q0 in itertools.product(*ranges):
        if sum(q0) != m0:
            continue
        q1 = tuple(sizes[p] - q0[p] for p in range(3))
        if min(q1) < 0:
            continue
        errs = [abs(q0[p] - fractions[p] * m0) for p in range(3)]
        errs += [abs(q1[p] - fractions[p] * m1) for p in range(3)]
        key = (max(errs), sum(e * e for e in errs), q0)
        if best is None or key < best[0]:
            best = (key, [list(q0), list(q1)])
    assert best is not None
    return best[1]


def split(samples: Sequence[LabeledSample], spec: SplitSpec) -> DatasetSplit:
    """Deterministic label-stratified train/test/validation split.

    Partition sizes follow the rounded fractions of the whole dataset. Each
    label's members are shuffled with a seeded permutation and dealt to the
    partitions in proportion, so per-label counts stay within one of their
    exact fractional share.
    """
    n = len(samples)
    if n == 0:
        raise DatasetError("cannot split an empty dataset")
    sizes = _allocate(n, spec)
    fractions = (spec.train_fraction, spec.test_fraction, spec.validation_fraction)

    by_label = {lab: [i for i, s in enumerate(samples) if s.label == lab] for lab in (0, 1)}
    quota = _stratified_quota(len(by_label[0]), len(by_label[1]), sizes, fractions)

    rng = Rng(spec.seed)
    parts: list[list[int]] = [[], [], []]
    for lab in (0, 1):
        idx = by_label[lab]
        order = [idx[k] for k in rng.permutation(len(idx))]
        start = 0
        for part in range(3):
            parts[part].extend(order[start:start + quota[lab][part]])
            start += quota[lab][part]
    out = [[samples[i] for i in sorted(p)] for p in parts]
    return DatasetSplit(*out)
