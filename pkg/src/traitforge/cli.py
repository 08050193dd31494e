"""Command-line entry point: ``traitforge {generate,extract,train,evaluate,run,report}``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Optional, Sequence

from .evaluation import (
    BASELINE,
    HOMOGENEOUS_ARMS,
    ExperimentReport,
    accuracy,
    group_row_name,
    parse_report_csv,
    read_results,
    render_report,
)
from .experiment import (
    ARM_NORM,
    ARM_SCHEME,
    ExperimentConfig,
    ExperimentError,
    derive_seed,
    load_config,
    load_matrix,
    run_experiment,
    splits,
    write_outputs,
)
from .features import read_matrix, write_matrix
from .modeling import ModelBank, partition, read_model, route_and_predict, save_bank, train_bank
from .normalization import NormStats, apply_stats, fit_group_stats, normalize_by_speaker
from .synthcorpus import GeneratorSpec, generate, load_spec, write_synth

log = logging.getLogger("traitforge")


def _csv_list(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _config(args) -> ExperimentConfig:
    overrides = {
        "arms": args.arms, "traits": args.traits, "seed": args.seed,
        "out_dir": args.out,
    }
    if args.config:
        return load_config(args.config, overrides)
    return ExperimentConfig(**{k: v for k, v in overrides.items() if v is not None})


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="experiment config (YAML)")
    p.add_argument("--arms", type=_csv_list, help="comma-separated arms")
    p.add_argument("--traits", type=lambda s: [t.upper() for t in _csv_list(s)],
                   help="comma-separated traits from O,C,E,A,N")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", choices=("csv", "md"), default="md")


def cmd_generate(args) -> int:
    spec = load_spec(args.config) if args.config else GeneratorSpec()
    if args.seed is not None:
        spec = GeneratorSpec(**{**asdict(spec), "seed": args.seed})
    paths = write_synth(generate(spec), args.out or "synth")
    for name, p in paths.items():
        print(f"{name}: {p}")
    return 0


def cmd_extract(args) -> int:
    config = _config(args)
    data = load_matrix(config)
    if args.split != "all":
        ((tr, te),) = splits(data, ExperimentConfig(**{**asdict(config), "folds": None}))
        data = data.take(tr if args.split == "train" else te)
    out = Path(args.out or config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"features_{args.split}.csv"
    write_matrix(data, path)
    print(f"{len(data)} rows x {len(data.names)} features -> {path}")
    return 0


def cmd_train(args) -> int:
    config = _config(args)
    data = read_matrix(args.matrix)
    out = Path(args.out or config.out_dir) / "models"
    for arm in config.arms:
        train = data
        if arm in ("gender-norm", "l1-norm"):
            stats = fit_group_stats(data, ARM_NORM[arm])
            (out / arm).mkdir(parents=True, exist_ok=True)
            stats.to_csv(out / arm / "norm_stats.csv")
            train = apply_stats(data, stats)
        elif arm == "speaker-norm":
            train = normalize_by_speaker(data)
        for trait in config.traits:
            try:
                bank = train_bank(train, ARM_SCHEME[arm], trait,
                                  config.svm_params(derive_seed(config.seed, f"svm:{trait}")),
                                  derive_seed(config.seed, f"upsample:{trait}"))
            except Exception as exc:
                raise ExperimentError(f"trait {trait}, arm {arm}: {exc}") from exc
            save_bank(bank, out / arm)
    print(f"models -> {out}")
    return 0


def _load_bank(directory: Path, arm: str, trait: str) -> ModelBank:
    models = {}
    for path in sorted(directory.glob(f"model_{trait}_*.txt")):
        model, header = read_model(path)
        models[header["group"]] = model
    if not models:
        raise ExperimentError(f"trait {trait}, arm {arm}: no models in {directory}")
    return ModelBank(ARM_SCHEME[arm], trait, models)


def cmd_evaluate(args) -> int:
    config = _config(args)
    data = read_matrix(args.matrix)
    model_root = Path(args.models)
    results = []
    for trait in config.traits:
        gold = data.labels[trait]
        baseline_pred = None
        arms = [a for a in config.arms if (model_root / a).is_dir()]
        for arm in arms:
            test = data
            if arm in ("gender-norm", "l1-norm"):
                test = apply_stats(data, NormStats.from_csv(model_root / arm / "norm_stats.csv",
                                                            ARM_NORM[arm]))
            elif arm == "speaker-norm":
                test = normalize_by_speaker(data)
            try:
                bank = _load_bank(model_root / arm, arm, trait)
                pred = route_and_predict(bank, test)
            except ExperimentError:
                raise
            except Exception as exc:
                raise ExperimentError(f"trait {trait}, arm {arm}: {exc}") from exc
            if arm == BASELINE:
                baseline_pred = pred
            results.append(accuracy(pred, gold, trait, arm, baseline_pred))
            if arm in HOMOGENEOUS_ARMS:
                for key, idx in partition(test, bank.scheme).items():
                    ref = None if baseline_pred is None else baseline_pred[idx]
                    row = group_row_name(key)
                    results.append(accuracy(pred[idx], gold[idx], trait, row, ref))
    report = ExperimentReport(results, {"matrix": str(args.matrix), "models": str(model_root)})
    paths = write_outputs(report, Path(args.out or config.out_dir))
    print(render_report(report, "csv" if args.format == "csv" else "markdown"))
    log.info("wrote %s", ", ".join(map(str, paths.values())))
    return 0


def cmd_run(args) -> int:
    config = _config(args)
    report = run_experiment(config)
    print(render_report(report, "csv" if args.format == "csv" else "markdown"))
    return 0


def cmd_report(args) -> int:
    path = Path(args.input)
    text = path.read_text(encoding="utf-8")
    if text.startswith("trait,arm,"):
        report = ExperimentReport(read_results(path))
    else:
        report = parse_report_csv(text)
    if args.traits:
        report = ExperimentReport([r for r in report.results if r.trait in args.traits],
                                  report.meta)
    rendered = render_report(report, "csv" if args.format == "csv" else "markdown")
    if args.out:
        write_outputs(report, Path(args.out))
    print(rendered)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="traitforge",
                                     description="Big Five trait classification experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic corpus")
    _add_common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("extract", help="extract a feature matrix file")
    _add_common(p)
    p.add_argument("--split", choices=("all", "train", "test"), default="all")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="train model banks on a feature matrix")
    _add_common(p)
    p.add_argument("--matrix", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate stored model banks on a feature matrix")
    _add_common(p)
    p.add_argument("--matrix", required=True)
    p.add_argument("--models", required=True, help="directory written by 'train'")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("run", help="end-to-end experiment")
    _add_common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="re-render stored or externally supplied accuracies")
    _add_common(p)
    p.add_argument("input", help="results CSV or accuracy-table CSV")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ExperimentError, ValueError, OSError) as exc:
        print(f"traitforge {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
