"""Control for the zero-shift scenario: how much does a pooled model lose when
trained on a random quarter of the training speakers, i.e. the data one
gender x L1 cell would see?"""
import argparse

import numpy as np

from traitforge.corpus import TRAITS
from traitforge.experiment import ExperimentConfig, derive_seed, load_matrix, splits
from traitforge.modeling import route_and_predict, train_bank


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--synth-seed", type=int, default=0)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--draws", type=int, default=4)
    args = ap.parse_args()

    cfg = ExperimentConfig(synth={"seed": args.synth_seed}, seed=args.seed)
    data = load_matrix(cfg)
    ((tr, te),) = splits(data, cfg)
    train, test = data.take(tr), data.take(te)
    speakers = np.unique(train.speaker_ids)
    rng = np.random.default_rng(args.seed)
    for t in TRAITS:
        params = cfg.svm_params(derive_seed(args.seed, f"svm:{t}"))
        up = derive_seed(args.seed, f"upsample:{t}")
        gold = test.labels[t]

        def score(subset, scheme="pooled"):
            return float(np.mean(route_and_predict(train_bank(subset, scheme, t, params, up), test) == gold))

        quarter = []
        for _ in range(args.draws):
            keep = rng.choice(speakers, len(speakers) // 4, replace=False)
            quarter.append(score(train.take(np.flatnonzero(np.isin(train.speaker_ids, keep)))))
        print(f"{t}  pooled {score(train):.3f}  by-gender-l1 {score(train, 'by_gender_l1'):.3f}  "
              f"pooled on 1/4 of speakers {np.mean(quarter):.3f} (min {min(quarter):.3f})")


if __name__ == "__main__":
    main()
