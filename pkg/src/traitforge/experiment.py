"""Config-driven experiment runner: ingest, label, extract, split, train, predict, report."""
from __future__ import annotations

import datetime as _dt
import logging
import os
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

import numpy as np
import yaml

from .corpus import TRAITS, load_corpus
from .evaluation import (
    ALL_ARMS,
    BASELINE,
    HOMOGENEOUS_ARMS,
    ArmResult,
    ExperimentReport,
    accuracy,
    group_row_name,
    pool_results,
    render_report,
    write_results,
)
from .features import FAMILIES, FeatureMatrix, Resources, build_matrix, load_affect, \
    load_embeddings, load_lexicon, load_lld_schema
from .labeling import load_norms
from .modeling import SVMParams, partition, route_and_predict, save_bank, speaker_holdout, \
    speaker_kfold, train_bank
from .normalization import normalize_split
from .synthcorpus import GeneratorSpec, generate

log = logging.getLogger(__name__)

ARM_SCHEME = {
    BASELINE: "pooled",
    "by-gender": "by_gender",
    "by-l1": "by_l1",
    "by-gender-l1": "by_gender_l1",
    "speaker-norm": "pooled",
    "gender-norm": "pooled",
    "l1-norm": "pooled",
}
ARM_NORM = {"speaker-norm": "speaker", "gender-norm": "gender", "l1-norm": "l1"}


class ExperimentError(RuntimeError):
    pass


@dataclass
class ExperimentConfig:
    speakers: Optional[str] = None
    turns: Optional[str] = None
    synth: Optional[dict] = None  # GeneratorSpec fields; used when no corpus paths are given
    lexicon: Optional[str] = None
    affect: Optional[str] = None
    embeddings: Optional[str] = None
    lld_schema: Optional[str] = None
    norms: Optional[str] = None
    per_gender_norms: bool = False
    families: Optional[list[str]] = None
    normalize_exclude: list[str] = field(default_factory=list)
    arms: list[str] = field(default_factory=lambda: list(ALL_ARMS))
    traits: list[str] = field(default_factory=lambda: list(TRAITS))
    test_fraction: float = 0.2
    folds: Optional[int] = None
    seed: int = 42
    svm: dict = field(default_factory=dict)
    out_dir: str = "runs/out"
    save_models: bool = True
    threads: Optional[int] = None

    def __post_init__(self):
        if not self.arms:
            raise ExperimentError("config needs at least one arm")
        bad = [a for a in self.arms if a not in ALL_ARMS]
        if bad:
            raise ExperimentError(f"unknown arms {bad}; choose from {list(ALL_ARMS)}")
        bad = [t for t in self.traits if t not in TRAITS]
        if bad or not self.traits:
            raise ExperimentError(f"bad traits {bad or self.traits}")
        if (self.speakers is None) != (self.turns is None):
            raise ExperimentError("speakers and turns must be given together")
        if self.families is not None:
            bad = [f for f in self.families if f not in FAMILIES]
            if bad:
                raise ExperimentError(f"unknown feature families {bad}")
        self.arms = [a for a in ALL_ARMS if a in self.arms]
        self.traits = [t for t in TRAITS if t in self.traits]

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any], base_dir: Optional[Path] = None) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ExperimentError(f"unknown config keys {sorted(unknown)}")
        data = dict(data)
        if base_dir is not None:
            for key in ("speakers", "turns", "lexicon", "affect", "embeddings", "lld_schema", "norms"):
                if data.get(key) and not Path(data[key]).is_absolute():
                    data[key] = str(base_dir / data[key])
        return cls(**data)

    def svm_params(self, seed: int) -> SVMParams:
        return SVMParams(**{**self.svm, "seed": seed})


def load_config(path: str | Path, overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return ExperimentConfig.from_mapping(data, Path(path).resolve().parent)


def derive_seed(seed: int, purpose: str) -> int:
    """Stable per-purpose seed derived from the top-level seed."""
    ss = np.random.SeedSequence([seed, zlib.crc32(purpose.encode())])
    return int(ss.generate_state(1)[0] % (2**31 - 1))


def worker_count(config: ExperimentConfig) -> int:
    if config.threads:
        return max(1, int(config.threads))
    env = os.environ.get("TRAITFORGE_THREADS")
    return max(1, int(env)) if env else 1


# --- data -------------------------------------------------------------------


def load_matrix(config: ExperimentConfig) -> FeatureMatrix:
    if config.speakers is not None:
        corpus = load_corpus(config.speakers, config.turns)
        if config.norms is None:
            raise ExperimentError("a norms file is required with an external corpus")
        norms = load_norms(config.norms)
        schema = load_lld_schema(config.lld_schema) if config.lld_schema else None
    else:
        synth = generate(GeneratorSpec.from_mapping(config.synth or {}))
        corpus, schema = synth.corpus, list(synth.lld_schema)
        norms = load_norms(config.norms) if config.norms else synth.norms
        if config.lld_schema:
            schema = load_lld_schema(config.lld_schema)
    resources = Resources(
        lexicon=load_lexicon(config.lexicon) if config.lexicon else None,
        affect=load_affect(config.affect) if config.affect else None,
        embeddings=load_embeddings(config.embeddings) if config.embeddings else None,
        lld_schema=schema,
    )
    families = config.families
    if families is None:
        available = {
            "lld": schema is not None, "liwc": resources.lexicon is not None,
            "dal": resources.affect is not None, "wv": resources.embeddings is not None,
            "pos": all(tok.pos_tag is not None for t in corpus.turns for tok in t.tokens),
        }
        families = [f for f in FAMILIES if available[f]]
    return build_matrix(corpus, families, resources, norms, config.per_gender_norms)


def splits(data: FeatureMatrix, config: ExperimentConfig):
    seed = derive_seed(config.seed, "split")
    if config.folds:
        return list(speaker_kfold(data, config.folds, seed))
    return [speaker_holdout(data, config.test_fraction, seed)]


# --- running ----------------------------------------------------------------


def _run_trait(data: FeatureMatrix, folds, trait: str, config: ExperimentConfig,
               model_dir: Optional[Path]) -> list[ArmResult]:
    svm = config.svm_params(derive_seed(config.seed, f"svm:{trait}"))
    up_seed = derive_seed(config.seed, f"upsample:{trait}")
    parts: dict[str, list[ArmResult]] = {}
    for f, (tr, te) in enumerate(folds):
        train, test = data.take(tr), data.take(te)
        gold = test.labels[trait]
        baseline_pred = None
        for arm in config.arms:
            try:
                if arm in ARM_NORM:
                    a, b = normalize_split(train, test, ARM_NORM[arm], config.normalize_exclude)
                else:
                    a, b = train, test
                bank = train_bank(a, ARM_SCHEME[arm], trait, svm, up_seed)
                pred = route_and_predict(bank, b)
            except Exception as exc:
                raise ExperimentError(f"trait {trait}, arm {arm}: {exc}") from exc
            if arm == BASELINE:
                baseline_pred = pred
            if model_dir is not None:
                save_bank(bank, model_dir / f"fold{f}" / arm)
            parts.setdefault(arm, []).append(accuracy(pred, gold, trait, arm, baseline_pred))
            if arm in HOMOGENEOUS_ARMS:
                for key, idx in partition(b, bank.scheme).items():
                    ref = None if baseline_pred is None else baseline_pred[idx]
                    row = group_row_name(key)
                    parts.setdefault(row, []).append(
                        accuracy(pred[idx], gold[idx], trait, row, ref))
    return [pool_results(v) for v in parts.values()]


def run_experiment(config: ExperimentConfig, data: Optional[FeatureMatrix] = None,
                   write: bool = True) -> ExperimentReport:
    if data is None:
        data = load_matrix(config)
    missing = [t for t in config.traits if t not in data.labels]
    if missing:
        raise ExperimentError(f"no labels for traits {missing}")
    folds = splits(data, config)
    out = Path(config.out_dir)
    model_dir = out / "models" if (write and config.save_models) else None
    jobs = worker_count(config)
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            per_trait = list(pool.map(lambda t: _run_trait(data, folds, t, config, model_dir),
                                      config.traits))
    else:
        per_trait = [_run_trait(data, folds, t, config, model_dir) for t in config.traits]
    results = [r for rs in per_trait for r in rs]
    meta = {
        "seed": str(config.seed),
        "split_seed": str(derive_seed(config.seed, "split")),
        "split": f"{config.folds}-fold speaker cv" if config.folds
        else f"speaker holdout {config.test_fraction}",
        "upsample_seeds": " ".join(f"{t}:{derive_seed(config.seed, f'upsample:{t}')}"
                                   for t in config.traits),
        "svm_seeds": " ".join(f"{t}:{derive_seed(config.seed, f'svm:{t}')}" for t in config.traits),
        "features": str(len(data.names)),
        "instances": str(len(data)),
    }
    report = ExperimentReport(results, meta)
    if write:
        write_outputs(report, out, config)
    return report


def write_outputs(report: ExperimentReport, out: Path, config: Optional[ExperimentConfig] = None,
                  formats: Sequence[str] = ("csv", "md")) -> dict[str, Path]:
    out.mkdir(parents=True, exist_ok=True)
    stamp = _dt.datetime.now(_dt.timezone.utc).strftime("%Y%m%dT%H%M%S")
    base = f"report_{stamp}"
    k = 1
    while any((out / f"{base}.{ext}").exists() for ext in formats):
        base = f"report_{stamp}_{k}"
        k += 1
    paths = {}
    for ext in formats:
        p = out / f"{base}.{ext}"
        p.write_text(render_report(report, "csv" if ext == "csv" else "markdown"), encoding="utf-8")
        paths[ext] = p
    write_results(report.results, out / f"{base}_results.csv")
    if config is not None:
        with open(out / f"{base}_config.yaml", "w", encoding="utf-8") as fh:
            yaml.safe_dump(asdict(config), fh, sort_keys=True)
    return paths
