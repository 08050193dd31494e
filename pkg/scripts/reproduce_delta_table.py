"""Recompute the homogeneous-minus-normalized delta table from published
accuracies and compare it cell by cell with the published deltas."""
import argparse
import csv
from pathlib import Path

from traitforge.evaluation import DELTA_ROWS, fmt_delta, parse_report_csv

DATA = Path(__file__).resolve().parents[1] / "data"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--accuracies", default=DATA / "reference_accuracies.csv")
    ap.add_argument("--expected", default=DATA / "reference_deltas.csv")
    args = ap.parse_args()

    report = parse_report_csv(Path(args.accuracies).read_text(encoding="utf-8"))
    with open(args.expected, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    traits = rows[0][2:]
    expected = {(r[0], r[1]): dict(zip(traits, r[2:])) for r in rows[1:]}
    hits = total = 0
    for d in report.deltas():
        for kind, value in (("delta_best", d.best), ("delta_avg", d.average)):
            want = expected[(kind, DELTA_ROWS[d.arm])][d.trait]
            got = fmt_delta(value)
            total += 1
            hits += got == want
            flag = "" if got == want else "   <-- differs"
            print(f"{kind:11s} {DELTA_ROWS[d.arm]:8s} {d.trait}  exact {value:+.4f}  "
                  f"shown {got}  published {want}{flag}")
    print(f"{hits}/{total} cells match")


if __name__ == "__main__":
    main()
