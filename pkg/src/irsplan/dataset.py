"""Labeled samples and their line-delimited JSON file format."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .features import FEATURE_NAMES, encode_features
from .logic import Goal, atom_str, parse_atom, state_strs

FIELDS = ("domain", "s0", "sg", "features", "label", "ite", "seed")


@dataclass(frozen=True)
class Sample:
    domain: str
    s0: tuple[str, ...]
    sg: tuple[str, ...]
    features: dict[str, int] = field(compare=False)
    label: int
    ite: float
    seed: int

    def to_json(self) -> str:
        rec = {k: getattr(self, k) for k in FIELDS}
        rec["s0"], rec["sg"] = list(self.s0), list(self.sg)
        return json.dumps(rec, ensure_ascii=False)

    @classmethod
    def from_json(cls, line: str) -> Sample:
        rec = json.loads(line)
        missing = [k for k in FIELDS if k not in rec]
        if missing:
            raise ValueError(f"sample missing fields {missing}")
        return cls(
            rec["domain"],
            tuple(rec["s0"]),
            tuple(rec["sg"]),
            {k: int(v) for k, v in rec["features"].items()},
            int(rec["label"]),
            float(rec["ite"]),
            int(rec["seed"]),
        )

    def rederive_features(self) -> dict[str, int]:
        s0 = frozenset(parse_atom(a) for a in self.s0)
        sg = Goal(frozenset(parse_atom(a) for a in self.sg))
        return encode_features(s0, sg)


def make_sample(domain: str, s0, sg: Goal, label: int, ite: float, seed: int) -> Sample:
    return Sample(
        domain,
        tuple(state_strs(s0)),
        tuple(sorted(atom_str(a) for a in sg.required)),
        encode_features(s0, sg),
        int(label),
        float(ite),
        int(seed),
    )


def dumps(samples: Iterable[Sample]) -> str:
    return "".join(s.to_json() + "\n" for s in samples)


def save(samples: Iterable[Sample], path: str | Path) -> None:
    Path(path).write_text(dumps(samples), encoding="utf-8")


def load(path: str | Path) -> list[Sample]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [Sample.from_json(ln) for ln in lines if ln.strip()]


def to_matrix(samples: Sequence[Sample], names: Sequence[str] = FEATURE_NAMES) -> tuple[np.ndarray, np.ndarray]:
    """(X, y) with X[i, j] = feature ``names[j]`` of sample i."""
    X = np.array([[s.features[n] for n in names] for s in samples], dtype=bool).reshape(len(samples), len(names))
    y = np.array([s.label for s in samples], dtype=bool)
    return X, y
