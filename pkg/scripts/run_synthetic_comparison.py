"""Homogeneous banks vs normalization on two synthetic scenarios: groups that
express traits with opposite signs (flip) and groups with no differences (zero-shift)."""
import argparse
from dataclasses import asdict

from traitforge.evaluation import HOMOGENEOUS_ARMS, render_report
from traitforge.experiment import ExperimentConfig, run_experiment
from traitforge.synthcorpus import GeneratorSpec, flip_scenario


def run(spec, seed, folds, out):
    cfg = ExperimentConfig(synth=asdict(spec), seed=seed, folds=folds, out_dir=out or "runs/synthetic")
    return run_experiment(cfg, write=out is not None)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--synth-seed", type=int, default=0)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--folds", type=int, default=None, help="speaker k-fold instead of holdout")
    ap.add_argument("--out", default=None, help="also write reports under this directory")
    ap.add_argument("--full", action="store_true", help="print the full markdown reports")
    args = ap.parse_args()

    for name, spec in (("flip", flip_scenario(args.synth_seed)),
                       ("zero-shift", GeneratorSpec(seed=args.synth_seed))):
        out = f"{args.out}/{name}" if args.out else None
        rep = run(spec, args.seed, args.folds, out)
        print(f"== {name}")
        if args.full:
            print(render_report(rep))
        for d in rep.deltas():
            print(f"  {d.trait} {d.arm:13s} best {d.best:+.3f} ({d.best_group})  avg {d.average:+.3f}")
        for r in rep.results:
            if r.arm in HOMOGENEOUS_ARMS:
                sig = rep.sig_baseline(r).value or "n.s."
                print(f"  {r.trait} {r.arm:13s} {r.accuracy:.3f} vs pooled {r.ref_accuracy:.3f}  {sig}")


if __name__ == "__main__":
    main()
