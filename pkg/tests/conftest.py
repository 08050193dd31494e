import json

import pytest

from traitforge.corpus import TRAITS
from traitforge.features import FeatureMatrix


def write_speakers(path, rows):
    lines = ["speaker_id,gender,l1," + ",".join(TRAITS)]
    lines += [",".join(str(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_turns(path, turns):
    path.write_text("".join(json.dumps(t) + "\n" for t in turns), encoding="utf-8")


def make_turn(turn_id, speaker, words, start=0.0, lld=None, pos=None):
    toks = []
    for i, w in enumerate(words):
        tok = {"text": w, "start_s": start + 0.4 * i, "end_s": start + 0.4 * i + 0.3}
        if pos is not None:
            tok["pos"] = pos[i]
        toks.append(tok)
    obj = {"turn_id": turn_id, "speaker_id": speaker, "tokens": toks}
    if lld is not None:
        obj["lld"] = lld
    return obj


@pytest.fixture
def small_corpus_files(tmp_path):
    sp = tmp_path / "speakers.csv"
    tu = tmp_path / "turns.jsonl"
    write_speakers(sp, [
        ("s1", "F", "SAE", 10, 20, 30, 40, 50),
        ("s2", "M", "MC", 31, 25, 19, 20, 28),
    ])
    write_turns(tu, [
        make_turn("t1", "s1", ["Hello,", "world!"], lld={"f0_mean": 210.0}),
        make_turn("t2", "s1", ["happy", "days"]),
        make_turn("t3", "s2", ["so", "sad"], lld={"f0_mean": 120.0}),
        make_turn("t4", "s2", ["don't", "go"]),
    ])
    return sp, tu


def random_matrix(rng, n=200, d=4, n_speakers=8, traits=("O",)):
    """Random FeatureMatrix with balanced gender/L1 provenance."""
    speakers = [f"s{i}" for i in range(n_speakers)]
    sid = rng.choice(speakers, size=n)
    meta = {s: (("F", "M")[i % 2], ("SAE", "MC")[(i // 2) % 2]) for i, s in enumerate(speakers)}
    labels = {t: rng.integers(0, 3, size=n) for t in traits}
    return FeatureMatrix(
        rng.normal(size=(n, d)) * rng.uniform(0.5, 5, size=d) + rng.normal(0, 10, size=d),
        [f"lld:f{j}" for j in range(d)], [f"t{i}" for i in range(n)], sid,
        [meta[s][0] for s in sid], [meta[s][1] for s in sid], labels,
    )


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
