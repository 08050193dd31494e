"""Linear one-vs-rest SVM, class-balancing upsampling, speaker-disjoint splits,
and homogeneous model banks routed by gold gender/L1 labels."""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, Optional, Sequence

import numpy as np

from .features import FeatureMatrix, FeatureVector
from .labeling import CLASSES, TraitLabel

log = logging.getLogger(__name__)

SCHEMES = ("pooled", "by_gender", "by_l1", "by_gender_l1")


class ModelingError(ValueError):
    pass


@dataclass(frozen=True)
class SVMParams:
    """Hyperparameters for :func:`fit_svm`.

    The step size follows ``eta0 / (1 + lam * eta0 * t)``; as ``eta0`` grows this
    tends to the plain ``1 / (lam * t)`` schedule. ``batch_size=None`` runs
    full-batch subgradient descent, which involves no sampling at all.
    """

    lam: float = 1e-4
    epochs: int = 20
    seed: int = 42
    batch_size: Optional[int] = 32
    eta0: float = 1.0
    standardize: bool = True
    average: bool = True
    project: bool = True

    def __post_init__(self):
        if not self.lam > 0:
            raise ModelingError("lam must be positive")
        if self.epochs <= 0:
            raise ModelingError("epochs must be positive")
        if self.batch_size is not None and self.batch_size <= 0:
            raise ModelingError("batch_size must be positive")
        if not self.eta0 > 0:
            raise ModelingError("eta0 must be positive")


@dataclass(frozen=True)
class LinearModel:
    """Per-class weights over ``names`` in raw feature space (standardization folded in)."""

    names: tuple[str, ...]
    weights: np.ndarray  # (3, d), rows ordered LO, ME, HI
    bias: np.ndarray  # (3,)
    params: SVMParams = field(default_factory=SVMParams)
    degenerate: bool = False

    def decision_values(self, X: np.ndarray) -> np.ndarray:
        return np.atleast_2d(X) @ self.weights.T + self.bias

    def predict_matrix(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if not np.all(np.isfinite(X)):
            raise ModelingError("non-finite input to predict")
        # argmax returns the first maximum, i.e. LO < ME < HI tie-break
        return np.argmax(self.decision_values(X), axis=1)


def hinge_objective(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, lam: float) -> float:
    """lam/2 * ||w||^2 + mean(max(0, 1 - y (X w + b))), bias unregularized."""
    margins = y * (X @ w + b)
    return 0.5 * lam * float(w @ w) + float(np.mean(np.maximum(0.0, 1.0 - margins)))


def _best_constant_bias(y: np.ndarray) -> float:
    # minimiser over b of mean hinge(y * b)
    p = float(np.mean(y > 0))
    if p < 0.5:
        return -1.0
    if p > 0.5:
        return 1.0
    return 0.0


def _sgd(Z: np.ndarray, Y: np.ndarray, params: SVMParams, rng: np.random.Generator):
    """Minibatch stochastic subgradient descent for all one-vs-rest problems at once.

    Z is (n, d) conditioned data, Y is (n, k) in {-1, +1}. Returns (W, b).
    """
    n, d = Z.shape
    k = Y.shape[1]
    lam = params.lam
    eta0 = min(params.eta0, 1.0 / lam)  # keeps the shrink factor 1 - eta*lam in [0, 1)
    W = np.zeros((k, d))
    b = np.zeros(k)
    W_avg, b_avg, n_avg = np.zeros((k, d)), np.zeros(k), 0
    radius = 1.0 / math.sqrt(lam)
    bs = n if params.batch_size is None else min(params.batch_size, n)
    avg_from = params.epochs // 2
    t = 0
    for epoch in range(params.epochs):
        order = np.arange(n) if params.batch_size is None else rng.permutation(n)
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            Zb, Yb = Z[idx], Y[idx]
            eta = eta0 / (1.0 + lam * eta0 * t)
            viol = (Yb * (Zb @ W.T + b)) < 1.0
            coef = np.where(viol, Yb, 0.0)  # (m, k)
            m = len(idx)
            W = (1.0 - eta * lam) * W + (eta / m) * (coef.T @ Zb)
            b = b + (eta / m) * coef.sum(axis=0)
            if params.project:
                norms = np.linalg.norm(W, axis=1)
                scale = np.minimum(1.0, radius / np.maximum(norms, 1e-300))
                W = W * scale[:, None]
            t += 1
            if params.average and epoch >= avg_from:
                n_avg += 1
                W_avg += (W - W_avg) / n_avg
                b_avg += (b - b_avg) / n_avg
    if params.average and n_avg:
        return W_avg, b_avg
    return W, b


def fit_svm(
    X: np.ndarray,
    y: np.ndarray,
    names: Sequence[str] = (),
    params: SVMParams = SVMParams(),
) -> LinearModel:
    """Train one-vs-rest linear SVMs (L2-regularized hinge) for the LO/ME/HI classes.

    Features are standardized with the training mean/sd unless
    ``params.standardize`` is off; the returned weights act on raw features.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    n, d = X.shape
    names = tuple(names) if names else tuple(f"f{j}" for j in range(d))
    if n == 0:
        raise ModelingError("empty training set")
    if not np.all(np.isfinite(X)):
        raise ModelingError("non-finite training features")
    k = len(CLASSES)
    present = np.unique(y)
    if len(present) < 2:
        warnings.warn("single-class training data; returning a constant predictor", stacklevel=2)
        bias = -np.ones(k)
        bias[int(present[0])] = 1.0
        return LinearModel(names, np.zeros((k, d)), bias, params, degenerate=True)

    if params.standardize:
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale[scale <= 1e-12 * np.maximum(1.0, np.abs(mean))] = 0.0
    else:
        mean, scale = np.zeros(d), np.ones(d)
    usable = scale > 0
    Z = np.zeros_like(X)
    Z[:, usable] = (X[:, usable] - mean[usable]) / scale[usable]

    Y = np.where(y[:, None] == np.arange(k)[None, :], 1.0, -1.0)
    if not usable.any():
        W = np.zeros((k, d))
        b = np.array([_best_constant_bias(Y[:, c]) for c in range(k)])
    else:
        rng = np.random.default_rng(params.seed)
        W, b = _sgd(Z, Y, params, rng)
        for c in range(k):
            # never return something worse than the zero weight vector
            if hinge_objective(W[c], b[c], Z, Y[:, c], params.lam) > 1.0:
                W[c], b[c] = 0.0, 0.0

    W_raw = np.zeros_like(W)
    W_raw[:, usable] = W[:, usable] / scale[usable]
    b_raw = b - W_raw[:, usable] @ mean[usable]
    return LinearModel(names, W_raw, b_raw, params)


def _align(model: LinearModel, names: Sequence[str]) -> tuple[np.ndarray, int, int]:
    pos = {n: j for j, n in enumerate(names)}
    src = np.array([pos.get(n, -1) for n in model.names], dtype=int)
    n_missing = int(np.sum(src < 0))
    n_extra = len(set(names) - set(model.names))
    return src, n_missing, n_extra


def align_features(model: LinearModel, X: np.ndarray, names: Sequence[str]) -> np.ndarray:
    """Reorder columns to the model's names; missing columns become 0, extras are dropped."""
    if tuple(names) == model.names:
        return X
    src, n_missing, n_extra = _align(model, names)
    if n_missing or n_extra:
        log.warning("feature alignment: %d missing (zero-filled), %d extra (ignored)",
                    n_missing, n_extra)
    X = np.atleast_2d(X)
    out = np.zeros((X.shape[0], len(model.names)))
    ok = src >= 0
    out[:, ok] = X[:, src[ok]]
    return out


def predict(model: LinearModel, x: FeatureVector) -> TraitLabel:
    row = align_features(model, x.values[None, :], x.names)
    return TraitLabel(int(model.predict_matrix(row)[0]))


# --- upsampling -------------------------------------------------------------


def upsample_indices(y: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Indices that keep every original row and pad each class up to the largest class."""
    y = np.asarray(y)
    if y.size == 0:
        raise ModelingError("cannot upsample an empty set")
    classes, counts = np.unique(y, return_counts=True)
    target = counts.max()
    parts = [np.arange(len(y))]
    for c, cnt in zip(classes, counts):
        if cnt < target:
            members = np.flatnonzero(y == c)
            parts.append(rng.choice(members, size=target - cnt, replace=True))
    return np.concatenate(parts)


def upsample(data: FeatureMatrix, trait: str, seed: int) -> FeatureMatrix:
    idx = upsample_indices(data.labels[trait], np.random.default_rng(seed))
    return data.take(idx)


# --- partitions and banks ---------------------------------------------------


def group_key(scheme: str, gender: str, l1: str) -> str:
    if scheme == "pooled":
        return "all"
    if scheme == "by_gender":
        return gender
    if scheme == "by_l1":
        return l1
    if scheme == "by_gender_l1":
        return f"{gender}/{l1}"
    raise ModelingError(f"unknown partition scheme {scheme!r}")


def partition(data: FeatureMatrix, scheme: str) -> dict[str, np.ndarray]:
    """Row indices per group key; empty parts are omitted."""
    keys = np.array([group_key(scheme, g, l) for g, l in zip(data.genders, data.l1s)], dtype=object)
    return {k: np.flatnonzero(keys == k) for k in sorted(set(keys))}


@dataclass(frozen=True)
class ModelBank:
    scheme: str
    trait: str
    models: Mapping[str, LinearModel]


def train_bank(
    data: FeatureMatrix,
    scheme: str,
    trait: str,
    params: SVMParams = SVMParams(),
    upsample_seed: int = 0,
) -> ModelBank:
    """Partition by ``scheme``, upsample each part, fit one model per part."""
    parts = partition(data, scheme)
    if not parts:
        raise ModelingError("all partitions empty")
    models = {}
    for i, (key, idx) in enumerate(parts.items()):
        part = upsample(data.take(idx), trait, upsample_seed + i)
        models[key] = fit_svm(part.X, part.labels[trait], part.names, params)
    return ModelBank(scheme, trait, models)


def route_and_predict(bank: ModelBank, data: FeatureMatrix) -> np.ndarray:
    """Predict each row with the model matching its gold gender/L1 group."""
    out = np.empty(len(data), dtype=int)
    for key, idx in partition(data, bank.scheme).items():
        model = bank.models.get(key)
        if model is None:
            raise ModelingError(f"no homogeneous model for group {key!r}")
        X = align_features(model, data.X[idx], data.names)
        out[idx] = model.predict_matrix(X)
    return out


def route_and_predict_one(bank: ModelBank, x: FeatureVector, gender: str, l1: str) -> TraitLabel:
    key = group_key(bank.scheme, gender, l1)
    if key not in bank.models:
        raise ModelingError(f"no homogeneous model for group {key!r}")
    return predict(bank.models[key], x)


# --- speaker-disjoint splits -----------------------------------------------


def _cells(data: FeatureMatrix) -> dict[tuple[str, str], list[str]]:
    cells: dict[tuple[str, str], set[str]] = {}
    for s, g, l in zip(data.speaker_ids, data.genders, data.l1s):
        cells.setdefault((g, l), set()).add(s)
    return {c: sorted(v) for c, v in sorted(cells.items())}


def speaker_holdout(
    data: FeatureMatrix, test_fraction: float = 0.2, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Speaker-disjoint train/test row indices, stratified by (gender, L1)."""
    if not 0 < test_fraction < 1:
        raise ModelingError("test_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    test_speakers: set[str] = set()
    for speakers in _cells(data).values():
        order = rng.permutation(len(speakers))
        n_test = int(round(test_fraction * len(speakers)))
        if len(speakers) >= 2:
            n_test = min(max(n_test, 1), len(speakers) - 1)
        test_speakers.update(speakers[i] for i in order[:n_test])
    is_test = np.array([s in test_speakers for s in data.speaker_ids])
    return np.flatnonzero(~is_test), np.flatnonzero(is_test)


def speaker_kfold(
    data: FeatureMatrix, k: int = 5, seed: int = 0
) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Speaker-disjoint k-fold splits, stratified by (gender, L1)."""
    if k < 2:
        raise ModelingError("k must be at least 2")
    rng = np.random.default_rng(seed)
    fold_of: dict[str, int] = {}
    offset = 0
    for speakers in _cells(data).values():
        for rank, i in enumerate(rng.permutation(len(speakers))):
            fold_of[speakers[i]] = (rank + offset) % k
        offset += len(speakers)
    folds = np.array([fold_of[s] for s in data.speaker_ids])
    for f in range(k):
        yield np.flatnonzero(folds != f), np.flatnonzero(folds == f)


# --- model files ------------------------------------------------------------


def save_bank(bank: ModelBank, directory: str | Path) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for key, model in bank.models.items():
        path = directory / f"model_{bank.trait}_{bank.scheme}_{key.replace('/', '-')}.txt"
        write_model(model, path, bank.trait, bank.scheme, key)
        paths.append(path)
    return paths


def write_model(model: LinearModel, path: str | Path, trait: str, scheme: str, group: str) -> None:
    p = model.params
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# trait={trait}\n# scheme={scheme}\n# group={group}\n")
        fh.write(f"# lam={p.lam!r} epochs={p.epochs} seed={p.seed} batch_size={p.batch_size} "
                 f"eta0={p.eta0!r} standardize={p.standardize} average={p.average} "
                 f"project={p.project}\n")
        fh.write(f"# degenerate={model.degenerate}\n# n_features={len(model.names)}\n")
        fh.write("feature_name,w_LO,w_ME,w_HI\n")
        for j, name in enumerate(model.names):
            fh.write(f"{name}," + ",".join(repr(float(v)) for v in model.weights[:, j]) + "\n")
        fh.write("__bias__," + ",".join(repr(float(v)) for v in model.bias) + "\n")


def read_model(path: str | Path) -> tuple[LinearModel, dict[str, str]]:
    header: dict[str, str] = {}
    names, rows, bias = [], [], None
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                for tok in line[1:].split():
                    key, _, val = tok.partition("=")
                    header[key] = val
                continue
            if line.startswith("feature_name,"):
                continue
            name, *vals = line.rsplit(",", 3)
            if name == "__bias__":
                bias = np.array([float(v) for v in vals])
            else:
                names.append(name)
                rows.append([float(v) for v in vals])
    if bias is None:
        raise ModelingError(f"{path}: no bias row")

    def _opt_int(v):
        return None if v == "None" else int(v)

    params = SVMParams(
        lam=float(header.get("lam", 1e-4)), epochs=int(header.get("epochs", 20)),
        seed=int(header.get("seed", 42)), batch_size=_opt_int(header.get("batch_size", "32")),
        eta0=float(header.get("eta0", 1.0)), standardize=header.get("standardize") != "False",
        average=header.get("average") != "False", project=header.get("project") != "False",
    )
    W = np.array(rows, dtype=float).reshape(len(rows), 3).T
    model = LinearModel(tuple(names), W, bias, params, header.get("degenerate") == "True")
    return model, header
