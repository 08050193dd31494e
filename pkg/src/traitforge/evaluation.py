"""Accuracies, significance tests and Table-style reports."""
from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal
from statistics import NormalDist
from typing import Iterable, Optional, Sequence

import numpy as np

from .corpus import TRAITS

CHANCE = 1.0 / 3.0

BASELINE = "baseline"
HOMOGENEOUS_ARMS = ("by-gender", "by-l1", "by-gender-l1")
NORMALIZED_ARMS = ("speaker-norm", "gender-norm", "l1-norm")
ALL_ARMS = (BASELINE, *HOMOGENEOUS_ARMS, *NORMALIZED_ARMS)
GROUP_ROWS = (
    "male", "female", "chinese", "english",
    "male/chinese", "male/english", "female/chinese", "female/english",
)
DELTA_ROWS = {"speaker-norm": "Speaker", "gender-norm": "Gender", "l1-norm": "Language"}

_GENDER_NAME = {"F": "female", "M": "male"}
_L1_NAME = {"SAE": "english", "MC": "chinese"}


def group_row_name(key: str) -> str:
    """Bank group key (``F``, ``MC``, ``F/SAE``) -> table row name."""
    if "/" in key:
        g, l1 = key.split("/")
        return f"{_GENDER_NAME[g]}/{_L1_NAME[l1]}"
    return _GENDER_NAME.get(key) or _L1_NAME[key]


class Significance(enum.Enum):
    BETTER = "+"
    WORSE = "-"
    NOTSIG = ""


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class ArmResult:
    """One accuracy cell. ``n_test`` is None for externally supplied accuracies.

    ``ref_correct`` is the baseline's correct count on the same test rows.
    """

    trait: str
    arm: str
    accuracy: float
    n_test: Optional[int] = None
    n_correct: Optional[int] = None
    ref_correct: Optional[int] = None

    def __post_init__(self):
        if self.trait not in TRAITS:
            raise EvaluationError(f"unknown trait {self.trait!r}")
        if not 0.0 <= self.accuracy <= 1.0:
            raise EvaluationError(f"accuracy out of range: {self.accuracy}")
        if self.n_test is not None:
            if self.n_test <= 0 or self.n_correct is None or not 0 <= self.n_correct <= self.n_test:
                raise EvaluationError("inconsistent counts")
            if self.accuracy != self.n_correct / self.n_test:
                raise EvaluationError("accuracy != n_correct / n_test")

    @property
    def ref_accuracy(self) -> Optional[float]:
        if self.ref_correct is None or not self.n_test:
            return None
        return self.ref_correct / self.n_test


def accuracy(predictions: Sequence[int], gold: Sequence[int], trait: str = "O", arm: str = BASELINE,
             reference: Optional[Sequence[int]] = None) -> ArmResult:
    pred, gold = np.asarray(predictions), np.asarray(gold)
    if pred.shape != gold.shape:
        raise EvaluationError("predictions and gold differ in length")
    if pred.size == 0:
        raise EvaluationError("no predictions")
    n, k = int(pred.size), int(np.sum(pred == gold))
    ref = None if reference is None else int(np.sum(np.asarray(reference) == gold))
    return ArmResult(trait, arm, k / n, n, k, ref)


# --- significance -----------------------------------------------------------


def _critical(alpha: float) -> float:
    return NormalDist().inv_cdf(1.0 - alpha / 2.0)


def z_vs_chance(acc: float, n: int, p0: float = CHANCE) -> float:
    return (acc - p0) / math.sqrt(p0 * (1.0 - p0) / n)


def z_two_proportion(acc_a: float, n_a: int, acc_b: float, n_b: int) -> float:
    """Pooled two-proportion z statistic; 0 when both proportions sit at 0 or 1."""
    pooled = (acc_a * n_a + acc_b * n_b) / (n_a + n_b)
    var = pooled * (1.0 - pooled) * (1.0 / n_a + 1.0 / n_b)
    if var <= 0:
        return 0.0
    return (acc_a - acc_b) / math.sqrt(var)


def _direction(z: float, crit: float) -> Significance:
    if z > crit:
        return Significance.BETTER
    if z < -crit:
        return Significance.WORSE
    return Significance.NOTSIG


def sig_vs_chance(acc: float, n: int, p0: float = CHANCE, alpha: float = 0.05,
                  method: str = "z") -> Significance:
    """Two-tailed one-sample test of ``acc`` against ``p0``.

    ``method="exact"`` uses a binomial test, meant for small n (< 50).
    """
    if not 0 < p0 < 1 or n <= 0:
        raise EvaluationError("need 0 < p0 < 1 and n > 0")
    if method == "exact":
        from scipy.stats import binomtest

        k = int(round(acc * n))
        if binomtest(k, n, p0).pvalue >= alpha or k == p0 * n:
            return Significance.NOTSIG
        return Significance.BETTER if k / n > p0 else Significance.WORSE
    if method != "z":
        raise EvaluationError(f"unknown method {method!r}")
    return _direction(z_vs_chance(acc, n, p0), _critical(alpha))


def sig_vs_baseline(acc_a: float, n_a: int, acc_b: float, n_b: int,
                    alpha: float = 0.05) -> Significance:
    if n_a <= 0 or n_b <= 0:
        raise EvaluationError("need positive sample sizes")
    return _direction(z_two_proportion(acc_a, n_a, acc_b, n_b), _critical(alpha))


# --- delta tables ---------------------------------------------------------


@dataclass(frozen=True)
class Delta:
    arm: str
    trait: str
    best: float
    average: float
    best_group: str
    significance: Significance = Significance.NOTSIG


def delta_table(
    homogeneous: Iterable[ArmResult], normalized: Iterable[ArmResult], alpha: float = 0.05
) -> list[Delta]:
    """best = max(homogeneous acc) - normalized acc; average = mean(homogeneous acc) - normalized acc.

    Computed per (normalized arm, trait). When counts are known, the best
    homogeneous group is tested against the normalized arm.
    """
    hom: dict[str, list[ArmResult]] = {}
    for r in homogeneous:
        hom.setdefault(r.trait, []).append(r)
    out = []
    for r in normalized:
        group = hom.get(r.trait)
        if not group:
            raise EvaluationError(f"missing homogeneous arms for trait {r.trait}")
        best = max(group, key=lambda g: g.accuracy)
        mean = sum(g.accuracy for g in group) / len(group)
        sig = Significance.NOTSIG
        if best.n_test and r.n_test:
            sig = sig_vs_baseline(best.accuracy, best.n_test, r.accuracy, r.n_test, alpha)
        out.append(Delta(r.arm, r.trait, best.accuracy - r.accuracy, mean - r.accuracy,
                         best.arm, sig))
    return out


def round2(x: float) -> Decimal:
    """Two-decimal display value; exact decimal ties round half to even."""
    return Decimal(repr(round(x, 10))).quantize(Decimal("0.01"), rounding=ROUND_HALF_EVEN)


def fmt_delta(x: float) -> str:
    d = round2(x)
    return "0.00" if d == 0 else f"{d:+.2f}"


def fmt_acc(x: float) -> str:
    return f"{round2(x):.2f}"


# --- report -----------------------------------------------------------------


@dataclass
class ExperimentReport:
    results: list[ArmResult]
    meta: dict[str, str] = field(default_factory=dict)
    alpha: float = 0.05

    def cell(self, arm: str, trait: str) -> Optional[ArmResult]:
        for r in self.results:
            if r.arm == arm and r.trait == trait:
                return r
        return None

    def rows(self, names: Iterable[str]) -> list[str]:
        present = {r.arm for r in self.results}
        return [n for n in names if n in present]

    def sig_chance(self, r: ArmResult) -> Significance:
        if not r.n_test:
            return Significance.NOTSIG
        return sig_vs_chance(r.accuracy, r.n_test, CHANCE, self.alpha)

    def sig_baseline(self, r: ArmResult) -> Significance:
        """Arm vs the baseline scored on the same test rows."""
        ref = r.ref_accuracy
        if ref is None:
            return Significance.NOTSIG
        return sig_vs_baseline(r.accuracy, r.n_test, ref, r.n_test, self.alpha)

    def deltas(self) -> list[Delta]:
        hom = [r for r in self.results if r.arm in GROUP_ROWS]
        norm = [r for r in self.results if r.arm in NORMALIZED_ARMS]
        if not hom or not norm:
            return []
        traits_hom = {r.trait for r in hom}
        return delta_table(hom, [r for r in norm if r.trait in traits_hom], self.alpha)

    def traits(self) -> list[str]:
        present = {r.trait for r in self.results}
        return [t for t in TRAITS if t in present]


def _sections(report: ExperimentReport):
    """Yield (section, title, rows) with rows as (name, {trait: display}) in fixed order."""
    traits = report.traits()

    def acc_rows(names, sig):
        rows = []
        for name in report.rows(names):
            cells = {}
            for t in traits:
                r = report.cell(name, t)
                if r is not None:
                    cells[t] = fmt_acc(r.accuracy) + sig(r).value
            rows.append((name, cells))
        return rows

    if report.rows([BASELINE]):
        chance = ("chance", {t: fmt_acc(CHANCE) for t in traits})
        yield ("overall", "Baseline accuracy (+/- : significantly better/worse than chance)",
               [chance, *acc_rows([BASELINE], report.sig_chance)])
    if report.rows(GROUP_ROWS):
        yield ("groups", "Homogeneous models (+/- : vs baseline on the same turns)",
               acc_rows(GROUP_ROWS, report.sig_baseline))
    if report.rows(HOMOGENEOUS_ARMS):
        yield ("banks", "Homogeneous banks, all test turns routed by gold labels",
               acc_rows(HOMOGENEOUS_ARMS, report.sig_baseline))
    if report.rows(NORMALIZED_ARMS):
        yield ("normalized", "Normalized models (+/- : vs baseline)",
               acc_rows(NORMALIZED_ARMS, report.sig_baseline))
    deltas = report.deltas()
    if deltas:
        for kind, attr in (("delta_best", "best"), ("delta_avg", "average")):
            rows = []
            for arm in NORMALIZED_ARMS:
                cells = {d.trait: fmt_delta(getattr(d, attr))
                         + (d.significance.value if attr == "best" else "")
                         for d in deltas if d.arm == arm}
                if cells:
                    rows.append((DELTA_ROWS[arm], cells))
            title = ("Best homogeneous minus normalized" if attr == "best"
                     else "Average homogeneous minus normalized")
            yield (kind, title, rows)


def render_report(report: ExperimentReport, fmt: str = "markdown") -> str:
    traits = report.traits()
    if fmt in ("md", "markdown"):
        out = ["# Trait classification report", ""]
        for k, v in report.meta.items():
            out.append(f"- {k}: {v}")
        if report.meta:
            out.append("")
        for _, title, rows in _sections(report):
            out += [f"## {title}", "", "| | " + " | ".join(traits) + " |",
                    "|---|" + "---|" * len(traits)]
            for name, cells in rows:
                out.append(f"| {name} | " + " | ".join(cells.get(t, "") for t in traits) + " |")
            out.append("")
        if not report.deltas():
            out += ["_Homogeneous-vs-normalized deltas omitted: needs both homogeneous "
                    "and normalized arms._", ""]
        return "\n".join(out)
    if fmt != "csv":
        raise EvaluationError(f"unknown report format {fmt!r}")
    buf = io.StringIO()
    for k, v in report.meta.items():
        buf.write(f"# {k}={v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["section", "row", *traits])
    for section, _, rows in _sections(report):
        for name, cells in rows:
            w.writerow([section, name, *(cells.get(t, "") for t in traits)])
    arms = [a for a in (*ALL_ARMS, *GROUP_ROWS) if report.rows([a])]
    for key, get in (
        ("exact", lambda r: repr(r.accuracy)),
        ("n_test", lambda r: "" if r.n_test is None else str(r.n_test)),
        ("n_correct", lambda r: "" if r.n_correct is None else str(r.n_correct)),
        ("ref_correct", lambda r: "" if r.ref_correct is None else str(r.ref_correct)),
    ):
        for arm in arms:
            cells = [get(r) if (r := report.cell(arm, t)) else "" for t in traits]
            w.writerow([key, arm, *cells])
    return buf.getvalue()


_ROW_ALIASES = {
    "all feat": BASELINE, "baseline": BASELINE,
    "speaker": "speaker-norm", "gender": "gender-norm", "l1": "l1-norm", "language": "l1-norm",
}


def parse_report_csv(text: str) -> ExperimentReport:
    """Rebuild a report from CSV.

    Accepts the CSV written by :func:`render_report` (full precision comes from
    its ``exact`` rows) or a hand-written accuracy table with rows named like
    the published tables (``All Feat``, ``male/chinese``, ``Speaker``, ...).
    """
    meta, lines = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].strip().partition("=")
            meta[k] = v
        elif line.strip():
            lines.append(line)
    reader = csv.reader(lines)
    header = next(reader)
    if header[:2] != ["section", "row"]:
        raise EvaluationError("expected header 'section,row,<traits>'")
    traits = header[2:]
    display: dict[tuple[str, str], float] = {}
    blocks: dict[str, dict[tuple[str, str], str]] = {"exact": {}, "n_test": {}, "n_correct": {},
                                                      "ref_correct": {}}
    for row in reader:
        section, name, cells = row[0], row[1].strip(), row[2:]
        if section in blocks:
            for t, v in zip(traits, cells):
                if v != "":
                    blocks[section][(name, t)] = v
            continue
        if section.startswith("delta") or name == "chance":
            continue
        arm = _ROW_ALIASES.get(name.lower(), name.lower())
        for t, v in zip(traits, cells):
            v = v.strip().rstrip("+-")
            if v:
                display[(arm, t)] = float(v)
    results = []
    keys = list(blocks["exact"]) or list(display)
    for arm, t in keys:
        if (arm, t) in blocks["exact"]:
            n = blocks["n_test"].get((arm, t))
            k = blocks["n_correct"].get((arm, t))
            ref = blocks["ref_correct"].get((arm, t))
            results.append(ArmResult(
                t, arm, float(blocks["exact"][(arm, t)]),
                int(n) if n else None, int(k) if k else None, int(ref) if ref else None,
            ))
        else:
            results.append(ArmResult(t, arm, display[(arm, t)]))
    order = {a: i for i, a in enumerate((*ALL_ARMS, *GROUP_ROWS))}
    results.sort(key=lambda r: (order.get(r.arm, len(order)), TRAITS.index(r.trait)))
    return ExperimentReport(results, meta)


# --- long-form result files -------------------------------------------------


def write_results(results: Iterable[ArmResult], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trait", "arm", "accuracy", "n_test", "n_correct", "ref_correct"])
        for r in results:
            w.writerow([r.trait, r.arm, repr(r.accuracy),
                        *("" if v is None else v for v in (r.n_test, r.n_correct, r.ref_correct))])


def read_results(path) -> list[ArmResult]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            def opt(k):
                return int(row[k]) if row.get(k) else None
            out.append(ArmResult(row["trait"], row["arm"], float(row["accuracy"]),
                                 opt("n_test"), opt("n_correct"), opt("ref_correct")))
    return out


def pool_results(parts: Sequence[ArmResult]) -> ArmResult:
    """Sum counts of the same (trait, arm) across folds."""
    first = parts[0]
    n = sum(p.n_test for p in parts)
    k = sum(p.n_correct for p in parts)
    refs = [p.ref_correct for p in parts]
    ref = None if any(r is None for r in refs) else sum(refs)
    return ArmResult(first.trait, first.arm, k / n, n, k, ref)
