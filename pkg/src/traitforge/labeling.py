"""Three-way HI/ME/LO labels from raw trait scores and norm thresholds."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional

import yaml

from .corpus import GENDERS, TRAITS, Corpus


class TraitLabel(enum.IntEnum):
    LO = 0
    ME = 1
    HI = 2


CLASSES = (TraitLabel.LO, TraitLabel.ME, TraitLabel.HI)


@dataclass(frozen=True)
class Threshold:
    lo_max: float
    hi_min: float

    def __post_init__(self):
        if not (math.isfinite(self.lo_max) and math.isfinite(self.hi_min)):
            raise ValueError("thresholds must be finite")
        if not self.lo_max < self.hi_min:
            raise ValueError(f"need lo_max < hi_min, got {self.lo_max} >= {self.hi_min}")


@dataclass(frozen=True)
class NormThresholds:
    """Per-trait thresholds, optionally overridden per gender."""

    traits: Mapping[str, Threshold]
    by_gender: Mapping[str, Mapping[str, Threshold]] = field(default_factory=dict)

    def __post_init__(self):
        missing = [t for t in TRAITS if t not in self.traits]
        if missing:
            raise ValueError(f"norm thresholds missing traits: {missing}")
        for g in self.by_gender:
            if g not in GENDERS:
                raise ValueError(f"unknown gender in norms: {g!r}")

    def for_trait(self, trait: str, gender: Optional[str] = None) -> Threshold:
        if gender is not None and trait in self.by_gender.get(gender, {}):
            return self.by_gender[gender][trait]
        return self.traits[trait]

    @classmethod
    def from_mapping(cls, data: Mapping) -> "NormThresholds":
        """Build from dotted keys (``O.lo_max``, ``F.O.hi_min``) or the nested equivalent."""
        flat: dict[str, float] = {}

        def walk(prefix, node):
            if isinstance(node, Mapping):
                for k, v in node.items():
                    walk(f"{prefix}.{k}" if prefix else str(k), v)
            else:
                flat[prefix] = float(node)

        walk("", data)
        base: dict[str, dict[str, float]] = {}
        per_gender: dict[str, dict[str, dict[str, float]]] = {}
        for key, value in flat.items():
            parts = key.split(".")
            if len(parts) == 2:
                base.setdefault(parts[0], {})[parts[1]] = value
            elif len(parts) == 3:
                per_gender.setdefault(parts[0], {}).setdefault(parts[1], {})[parts[2]] = value
            else:
                raise ValueError(f"unrecognised norms key {key!r}")

        def build(d):
            try:
                return {t: Threshold(v["lo_max"], v["hi_min"]) for t, v in d.items()}
            except KeyError as exc:
                raise ValueError(f"norms entry missing {exc.args[0]}") from None

        return cls(build(base), {g: build(d) for g, d in per_gender.items()})


def load_norms(path: str | Path) -> NormThresholds:
    with open(path, encoding="utf-8") as fh:
        return NormThresholds.from_mapping(yaml.safe_load(fh) or {})


def label_score(score: float, t: Threshold) -> TraitLabel:
    """LO strictly below ``lo_max``, HI strictly above ``hi_min``, ME otherwise."""
    if not math.isfinite(score):
        raise ValueError(f"non-finite score {score!r}")
    if score < t.lo_max:
        return TraitLabel.LO
    if score > t.hi_min:
        return TraitLabel.HI
    return TraitLabel.ME


def label_corpus(
    corpus: Corpus, norms: NormThresholds, per_gender: bool = False
) -> dict[tuple[str, str], TraitLabel]:
    out = {}
    for sid, sp in corpus.speakers.items():
        gender = sp.gender if per_gender else None
        for trait in TRAITS:
            out[(sid, trait)] = label_score(sp.neo_scores[trait], norms.for_trait(trait, gender))
    return out
