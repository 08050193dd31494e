"""Seeded synthetic corpora with controllable group shifts and trait-expression flips.

Each speaker gets five trait scores drawn from a normal population. Every turn
carries an LLD vector

    signal * sum_t flip[cell, t] * z_t * direction_t + shift[cell] + noise

where ``z_t`` is the speaker's standardized score and the trait directions are
orthonormal. ``shift`` models group differences in voice/language use, ``flip``
models a group expressing a trait the opposite way.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Union

import numpy as np
import yaml

from .corpus import GENDERS, L1S, TRAITS, Corpus, SpeakerProfile, TimedToken, Turn, write_corpus
from .labeling import NormThresholds, Threshold

CELLS = tuple(f"{g}/{l}" for g in GENDERS for l in L1S)

# standard-normal terciles, so HI/ME/LO are about equally frequent
TERCILE_Z = 0.4307272992954576


@dataclass(frozen=True)
class GeneratorSpec:
    n_speakers: Union[int, Mapping[str, int]] = 25
    turns_per_speaker: int = 40
    dim: int = 20
    group_shift: Mapping[str, Union[float, list]] = field(default_factory=dict)
    expression_flip: Mapping[str, Mapping[str, int]] = field(default_factory=dict)
    signal: float = 1.0
    trait_signal: Mapping[str, float] = field(default_factory=dict)
    noise: float = 1.0
    speaker_sd: float = 0.0
    score_mean: float = 50.0
    score_sd: float = 10.0
    lo_z: float = -TERCILE_Z
    hi_z: float = TERCILE_Z
    seed: int = 0

    def __post_init__(self):
        counts = self.cell_counts()
        if any(c <= 0 for c in counts.values()):
            raise ValueError("speaker counts must be positive")
        if self.turns_per_speaker <= 0:
            raise ValueError("turns_per_speaker must be positive")
        if self.dim < len(TRAITS):
            raise ValueError(f"dim must be at least {len(TRAITS)}")
        for cell in (*self.group_shift, *self.expression_flip):
            if cell not in CELLS:
                raise ValueError(f"unknown cell {cell!r}; expected one of {CELLS}")
        for flips in self.expression_flip.values():
            for t, s in flips.items():
                if t not in TRAITS or s not in (1, -1):
                    raise ValueError(f"bad expression flip {t}: {s}")
        if not self.lo_z < self.hi_z:
            raise ValueError("need lo_z < hi_z")

    def cell_counts(self) -> dict[str, int]:
        if isinstance(self.n_speakers, Mapping):
            return {c: int(self.n_speakers.get(c, 0)) for c in CELLS}
        return {c: int(self.n_speakers) for c in CELLS}

    def shift_vector(self, cell: str) -> np.ndarray:
        s = self.group_shift.get(cell, 0.0)
        vec = np.full(self.dim, float(s)) if np.isscalar(s) else np.asarray(s, dtype=float)
        if vec.shape != (self.dim,):
            raise ValueError(f"group_shift for {cell} must be scalar or length {self.dim}")
        return vec

    def flip(self, cell: str, trait: str) -> int:
        return int(self.expression_flip.get(cell, {}).get(trait, 1))

    def norms(self) -> NormThresholds:
        t = Threshold(self.score_mean + self.lo_z * self.score_sd,
                      self.score_mean + self.hi_z * self.score_sd)
        return NormThresholds({tr: t for tr in TRAITS})

    @classmethod
    def from_mapping(cls, data: Mapping) -> "GeneratorSpec":
        return cls(**dict(data))


def load_spec(path: str | Path) -> GeneratorSpec:
    with open(path, encoding="utf-8") as fh:
        return GeneratorSpec.from_mapping(yaml.safe_load(fh) or {})


@dataclass(frozen=True)
class SynthCorpus:
    corpus: Corpus
    norms: NormThresholds
    lld_schema: tuple[str, ...]
    directions: np.ndarray  # (5, dim), rows follow TRAITS


def trait_directions(dim: int, rng: np.random.Generator) -> np.ndarray:
    q, _ = np.linalg.qr(rng.normal(size=(dim, len(TRAITS))))
    return q.T


def generate(spec: GeneratorSpec) -> SynthCorpus:
    rng = np.random.default_rng(spec.seed)
    dirs = trait_directions(spec.dim, rng)
    schema = tuple(f"f{j:03d}" for j in range(spec.dim))
    speakers, turns = [], []
    for cell, count in spec.cell_counts().items():
        gender, l1 = cell.split("/")
        shift = spec.shift_vector(cell)
        flips = np.array([spec.flip(cell, t) * spec.trait_signal.get(t, 1.0) for t in TRAITS])
        for i in range(count):
            sid = f"{gender}{l1}{i:03d}"
            z = rng.normal(size=len(TRAITS))
            scores = {t: float(spec.score_mean + spec.score_sd * zt) for t, zt in zip(TRAITS, z)}
            speakers.append(SpeakerProfile(sid, gender, l1, scores))
            center = spec.signal * (flips * z) @ dirs + shift
            center = center + spec.speaker_sd * rng.normal(size=spec.dim)
            noise = spec.noise * rng.normal(size=(spec.turns_per_speaker, spec.dim))
            clock = 0.0
            for k in range(spec.turns_per_speaker):
                toks = []
                for w in range(3):
                    toks.append(TimedToken(f"w{w}", round(clock, 3), round(clock + 0.3, 3)))
                    clock += 0.4
                clock += 1.0
                lld = {name: float(v) for name, v in zip(schema, center + noise[k])}
                turns.append(Turn(f"{sid}_{k:03d}", sid, tuple(toks), lld))
    return SynthCorpus(Corpus.from_lists(speakers, turns), spec.norms(), schema, dirs)


def write_synth(synth: SynthCorpus, out_dir: str | Path) -> dict[str, Path]:
    """Write speakers.csv, turns.jsonl, norms.yaml and lld_schema.txt."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "speakers": out / "speakers.csv",
        "turns": out / "turns.jsonl",
        "norms": out / "norms.yaml",
        "lld_schema": out / "lld_schema.txt",
    }
    write_corpus(synth.corpus, paths["speakers"], paths["turns"])
    norms = {t: {"lo_max": th.lo_max, "hi_min": th.hi_min} for t, th in synth.norms.traits.items()}
    with open(paths["norms"], "w", encoding="utf-8") as fh:
        fh.write("# synthetic placeholder thresholds, not published NEO norms\n")
        yaml.safe_dump(norms, fh, sort_keys=False)
    with open(paths["lld_schema"], "w", encoding="utf-8") as fh:
        fh.write("\n".join(synth.lld_schema) + "\n")
    return paths


def flip_scenario(seed: int = 0, **kw) -> GeneratorSpec:
    """Mandarin-L1 cells express every trait with the opposite sign."""
    flips = {c: {t: -1 for t in TRAITS} for c in CELLS if c.endswith("/MC")}
    return GeneratorSpec(expression_flip=flips, seed=seed, **kw)


def shift_scenario(seed: int = 0, by: str = "gender", magnitude: float = 3.0, **kw) -> GeneratorSpec:
    """Additive group offsets that depend only on gender (or only on L1)."""
    shifts: dict[str, float] = {}
    for c in CELLS:
        g, l1 = c.split("/")
        positive = (g == "F") if by == "gender" else (l1 == "MC")
        shifts[c] = magnitude if positive else -magnitude
    return GeneratorSpec(group_shift=shifts, seed=seed, **kw)
