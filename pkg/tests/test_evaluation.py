import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from traitforge.evaluation import (
    ArmResult, EvaluationError, ExperimentReport, Significance, accuracy, fmt_delta,
    parse_report_csv, read_results, render_report, round2, sig_vs_baseline, sig_vs_chance,
    delta_table, write_results, z_two_proportion, z_vs_chance,
)

DATA = Path(__file__).resolve().parents[1] / "data"


def test_accuracy_counts():
    r = accuracy([0, 1, 2, 2], [0, 1, 1, 2], "E", "baseline", reference=[0, 0, 0, 0])
    assert (r.n_test, r.n_correct, r.ref_correct) == (4, 3, 1)
    assert r.accuracy == 0.75 and r.ref_accuracy == 0.25
    with pytest.raises(EvaluationError):
        accuracy([0], [0, 1])
    with pytest.raises(EvaluationError):
        accuracy([], [])


def _z_oracle(p, n, p0=1 / 3):
    return (p - p0) / math.sqrt(p0 * (1 - p0) / n)


def test_vs_chance_examples():
    assert z_vs_chance(0.39, 6000) == pytest.approx(9.31, abs=0.01)
    assert sig_vs_chance(0.39, 6000) is Significance.BETTER
    assert sig_vs_chance(0.31, 6000) is Significance.WORSE
    assert sig_vs_chance(0.34, 100) is Significance.NOTSIG


def test_vs_baseline_examples():
    assert z_two_proportion(0.43, 3000, 0.35, 3000) == pytest.approx(6.35, abs=0.01)
    assert sig_vs_baseline(0.43, 3000, 0.35, 3000) is Significance.BETTER
    assert sig_vs_baseline(0.26, 3000, 0.33, 3000) is Significance.WORSE
    assert z_two_proportion(1.0, 10, 1.0, 10) == 0.0


def test_exact_binomial_option():
    assert sig_vs_chance(0.9, 20, method="exact") is Significance.BETTER
    assert sig_vs_chance(0.35, 20, method="exact") is Significance.NOTSIG
    assert sig_vs_chance(0.0, 20, method="exact") is Significance.WORSE


@settings(max_examples=200)
@given(st.floats(0.01, 0.99), st.integers(1, 10**5), st.floats(0.01, 0.99), st.integers(1, 10**5))
def test_two_proportion_antisymmetric(a, na, b, nb):
    assert z_two_proportion(a, na, b, nb) == pytest.approx(-z_two_proportion(b, nb, a, na), abs=1e-9)


@settings(max_examples=200)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.integers(1, 10**5))
def test_vs_chance_monotone(a, b, n):
    lo, hi = sorted((a, b))
    assert z_vs_chance(lo, n) <= z_vs_chance(hi, n)
    assert z_vs_chance(hi, n) == pytest.approx(_z_oracle(hi, n), rel=1e-12, abs=1e-12)


def _cells(rows):
    return [ArmResult("O", arm, acc) for arm, acc in rows]


def test_delta_table_example():
    hom = _cells([("male", 0.32), ("female", 0.34), ("chinese", 0.34), ("english", 0.36),
                  ("male/chinese", 0.35), ("male/english", 0.38), ("female/chinese", 0.35),
                  ("female/english", 0.48)])
    (d,) = delta_table(hom, _cells([("speaker-norm", 0.33)]))
    assert fmt_delta(d.best) == "+0.15" and d.best_group == "female/english"
    assert d.average == pytest.approx(np.mean([h.accuracy for h in hom]) - 0.33)
    assert d.best >= d.average


@settings(max_examples=100)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=8), st.floats(0, 1))
def test_best_at_least_average(accs, norm):
    hom = [ArmResult("C", f"g{i}", a) for i, a in enumerate(accs)]
    (d,) = delta_table(hom, [ArmResult("C", "gender-norm", norm)])
    assert d.best >= d.average - 1e-12


def test_rounding_display():
    assert fmt_delta(0.0) == "0.00" and fmt_delta(-0.0025) == "0.00"
    assert fmt_delta(0.025) == "+0.02" and fmt_delta(0.035) == "+0.04"
    assert str(round2(0.125)) == "0.12"


def _report(seed=0):
    rng = np.random.default_rng(seed)
    gold = rng.integers(0, 3, 300)
    base = rng.integers(0, 3, 300)
    results = []
    for t in "OCEAN":
        results.append(accuracy(base, gold, t, "baseline", base))
        for arm in ("male", "female", "speaker-norm", "gender-norm"):
            results.append(accuracy(rng.integers(0, 3, 300), gold, t, arm, base))
    return ExperimentReport(results, {"seed": "0"})


def _display_numbers(text):
    import re
    return re.findall(r"[+-]?\d\.\d\d(?![\d])", text)


def test_csv_and_markdown_show_same_numbers():
    rep = _report()
    csv_text = render_report(rep, "csv")
    display = csv_text.split("\nexact,")[0]
    md = render_report(rep, "markdown")
    md_body = md.split("\n", 3)[3]
    assert _display_numbers(display) == _display_numbers(md_body)


def test_csv_roundtrip_exact():
    rep = _report(1)
    back = parse_report_csv(render_report(rep, "csv"))
    assert sorted(back.results, key=repr) == sorted(rep.results, key=repr)
    assert back.meta == rep.meta


def test_results_file_roundtrip(tmp_path):
    rep = _report(2)
    write_results(rep.results, tmp_path / "r.csv")
    assert read_results(tmp_path / "r.csv") == rep.results


def test_omission_notice():
    rep = ExperimentReport([accuracy([0, 1], [0, 1], "O", "baseline")])
    md = render_report(rep)
    assert "omitted" in md
    assert "delta" not in render_report(rep, "csv")


def test_parse_hand_table():
    rep = parse_report_csv((DATA / "reference_accuracies.csv").read_text())
    assert rep.cell("baseline", "O").accuracy == 0.39
    assert rep.cell("l1-norm", "C").accuracy == 0.36
    assert rep.cell("female/english", "E").accuracy == 0.47
    assert len(rep.results) == 12 * 5
