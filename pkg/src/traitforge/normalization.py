"""Group z-score normalization.

Gender and L1 statistics are fit on training data and then applied to both
splits; speaker statistics are computed inside whatever matrix is given.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .corpus import GENDERS, L1S
from .features import FeatureMatrix

KINDS = ("none", "speaker", "gender", "l1")


class NormalizationError(ValueError):
    pass


@dataclass(frozen=True)
class GroupKey:
    kind: str
    value: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise NormalizationError(f"unknown normalization kind {self.kind!r}")
        if self.kind == "gender" and self.value not in GENDERS:
            raise NormalizationError(f"bad gender group {self.value!r}")
        if self.kind == "l1" and self.value not in L1S:
            raise NormalizationError(f"bad L1 group {self.value!r}")


@dataclass(frozen=True)
class NormStats:
    kind: str
    names: tuple[str, ...]
    mu: dict  # group value -> (d,) array
    sigma: dict

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["group", "feature", "mu", "sigma"])
            for g in sorted(self.mu):
                for j, name in enumerate(self.names):
                    w.writerow([g, name, repr(float(self.mu[g][j])), repr(float(self.sigma[g][j]))])

    @classmethod
    def from_csv(cls, path: str | Path, kind: str) -> "NormStats":
        rows: dict[str, list[tuple[str, float, float]]] = {}
        with open(path, newline="", encoding="utf-8") as fh:
            for r in csv.DictReader(fh):
                rows.setdefault(r["group"], []).append((r["feature"], float(r["mu"]), float(r["sigma"])))
        names = tuple(n for n, _, _ in next(iter(rows.values()))) if rows else ()
        return cls(
            kind, names,
            {g: np.array([m for _, m, _ in v]) for g, v in rows.items()},
            {g: np.array([s for _, _, s in v]) for g, v in rows.items()},
        )


def _moments(X: np.ndarray, ddof: int) -> tuple[np.ndarray, np.ndarray]:
    mu = X.mean(axis=0)
    if X.shape[0] <= ddof:
        return mu, np.zeros(X.shape[1])
    sd = X.std(axis=0, ddof=ddof)
    # rounding residue on constant columns
    sd[sd <= 1e-12 * np.maximum(1.0, np.abs(mu))] = 0.0
    return mu, sd


def _zscore(X: np.ndarray, mu: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    out = np.zeros_like(X)
    ok = sigma > 0
    out[:, ok] = (X[:, ok] - mu[ok]) / sigma[ok]
    return out


def fit_group_stats(train: FeatureMatrix, kind: str, ddof: int = 1) -> NormStats:
    """Per-group, per-feature mean and standard deviation (sample sd by default).

    Groups with fewer than two instances get sigma 0.
    """
    if kind not in ("gender", "l1", "speaker"):
        raise NormalizationError(f"cannot fit stats for kind {kind!r}")
    groups = train.group_values(kind)
    mu, sigma = {}, {}
    for g in sorted(set(groups)):
        m, s = _moments(train.X[groups == g], ddof)
        if np.sum(groups == g) < 2:
            s = np.zeros_like(s)
        mu[g], sigma[g] = m, s
    return NormStats(kind, train.names, mu, sigma)


def apply_stats(
    data: FeatureMatrix, stats: NormStats, columns: Optional[np.ndarray] = None
) -> FeatureMatrix:
    """Replace each value by (x - mu_g) / sigma_g of its own group (0 where sigma_g = 0).

    ``columns`` is an optional boolean mask; unmasked columns pass through.
    """
    if tuple(data.names) != tuple(stats.names):
        raise NormalizationError("feature names differ between data and stats")
    groups = data.group_values(stats.kind)
    missing = set(groups) - set(stats.mu)
    if missing:
        raise NormalizationError(f"no stats for group {sorted(missing)[0]!r}")
    X = data.X.copy()
    cols = np.ones(X.shape[1], dtype=bool) if columns is None else np.asarray(columns, bool)
    for g in stats.mu:
        rows = groups == g
        if not rows.any():
            continue
        X[np.ix_(rows, cols)] = _zscore(data.X[rows][:, cols], stats.mu[g][cols], stats.sigma[g][cols])
    return data.with_X(X)


def normalize_by_speaker(
    data: FeatureMatrix, columns: Optional[np.ndarray] = None, ddof: int = 1
) -> FeatureMatrix:
    """Self-normalize each speaker's rows with that speaker's own mean and sd."""
    return apply_stats(data, fit_group_stats(data, "speaker", ddof), columns)


def normalize_split(
    train: FeatureMatrix,
    test: FeatureMatrix,
    kind: str,
    exclude_families: Iterable[str] = (),
    ddof: int = 1,
) -> tuple[FeatureMatrix, FeatureMatrix]:
    """Apply one normalization arm to a train/test pair."""
    if kind not in KINDS:
        raise NormalizationError(f"unknown normalization kind {kind!r}")
    if kind == "none":
        return train, test
    cols = ~train.family_mask(exclude_families)
    if kind == "speaker":
        return normalize_by_speaker(train, cols, ddof), normalize_by_speaker(test, cols, ddof)
    stats = fit_group_stats(train, kind, ddof)
    return apply_stats(train, stats, cols), apply_stats(test, stats, cols)
