"""Corpus data model, file ingestion and silence-based turn segmentation."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

TRAITS = ("O", "C", "E", "A", "N")
GENDERS = ("F", "M")
L1S = ("SAE", "MC")

_GENDER_ALIASES = {"F": "F", "FEMALE": "F", "M": "M", "MALE": "M"}


class CorpusError(ValueError):
    """Raised for malformed or inconsistent corpus input."""


@dataclass(frozen=True)
class SpeakerProfile:
    speaker_id: str
    gender: str
    l1: str
    neo_scores: Mapping[str, float]

    def __post_init__(self):
        if not self.speaker_id:
            raise CorpusError("empty speaker_id")
        if self.gender not in GENDERS:
            raise CorpusError(f"speaker {self.speaker_id}: bad gender {self.gender!r}")
        if self.l1 not in L1S:
            raise CorpusError(f"speaker {self.speaker_id}: bad l1 {self.l1!r}")
        for t in TRAITS:
            if t not in self.neo_scores:
                raise CorpusError(f"speaker {self.speaker_id}: missing trait score {t}")
            if not math.isfinite(self.neo_scores[t]):
                raise CorpusError(f"speaker {self.speaker_id}: non-finite score for {t}")


@dataclass(frozen=True)
class TimedToken:
    text: str
    start_s: float
    end_s: float
    pos_tag: Optional[str] = None

    def __post_init__(self):
        if not self.text:
            raise CorpusError("empty token text")
        if not (0 <= self.start_s <= self.end_s):
            raise CorpusError(
                f"token {self.text!r}: need 0 <= start_s <= end_s, got "
                f"({self.start_s}, {self.end_s})"
            )


@dataclass(frozen=True)
class Turn:
    turn_id: str
    speaker_id: str
    tokens: tuple[TimedToken, ...]
    lld: Optional[Mapping[str, float]] = None

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        for prev, nxt in zip(self.tokens, self.tokens[1:]):
            if nxt.start_s < prev.start_s:
                raise CorpusError(f"turn {self.turn_id}: tokens not ordered by start_s")

    @property
    def duration_s(self) -> float:
        if not self.tokens:
            return 0.0
        return self.tokens[-1].end_s - self.tokens[0].start_s


@dataclass(frozen=True)
class Corpus:
    speakers: Mapping[str, SpeakerProfile]
    turns: tuple[Turn, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "turns", tuple(self.turns))
        seen = set()
        for turn in self.turns:
            if turn.speaker_id not in self.speakers:
                raise CorpusError(
                    f"turn {turn.turn_id}: unknown speaker {turn.speaker_id!r}"
                )
            if turn.turn_id in seen:
                raise CorpusError(f"duplicate turn_id {turn.turn_id!r}")
            seen.add(turn.turn_id)

    @classmethod
    def from_lists(cls, speakers: Iterable[SpeakerProfile], turns: Iterable[Turn]) -> "Corpus":
        table: dict[str, SpeakerProfile] = {}
        for sp in speakers:
            if sp.speaker_id in table:
                raise CorpusError(f"duplicate speaker_id {sp.speaker_id!r}")
            table[sp.speaker_id] = sp
        return cls(table, tuple(turns))

    def speaker_of(self, turn: Turn) -> SpeakerProfile:
        return self.speakers[turn.speaker_id]


def segment_turns(
    words: Sequence[TimedToken],
    gap_threshold_s: float = 0.5,
    speaker_id: str = "",
    turn_prefix: str = "t",
) -> list[Turn]:
    """Split a word alignment wherever the silence between words exceeds the threshold.

    The comparison is strict: a gap of exactly ``gap_threshold_s`` does not split.
    """
    if not gap_threshold_s > 0:
        raise ValueError("gap_threshold_s must be positive")
    for prev, nxt in zip(words, words[1:]):
        if nxt.start_s < prev.start_s:
            raise CorpusError("unsorted alignment")
    groups: list[list[TimedToken]] = []
    for i, w in enumerate(words):
        if i == 0 or (w.start_s - words[i - 1].end_s) > gap_threshold_s:
            groups.append([])
        groups[-1].append(w)
    return [
        Turn(f"{turn_prefix}{k}", speaker_id, tuple(g)) for k, g in enumerate(groups)
    ]


# --- ingestion --------------------------------------------------------------


def _parse_float(raw: str, where: str) -> float:
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise CorpusError(f"{where}: cannot parse number {raw!r}") from None
    if not math.isfinite(value):
        raise CorpusError(f"{where}: non-finite number {raw!r}")
    return value


def load_speakers(path: str | Path) -> list[SpeakerProfile]:
    """Read the speakers CSV (``speaker_id,gender,l1,O,C,E,A,N``)."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in ("speaker_id", "gender", "l1"):
            if col not in header:
                raise CorpusError(f"{path}: line 1: missing column {col!r}")
        for row in reader:
            where = f"{path}: line {reader.line_num}"
            scores = {}
            for t in TRAITS:
                raw = row.get(t)
                if raw is None or raw.strip() == "":
                    raise CorpusError(f"{where}: missing trait score {t}")
                scores[t] = _parse_float(raw, where)
            gender = _GENDER_ALIASES.get((row["gender"] or "").strip().upper())
            if gender is None:
                raise CorpusError(f"{where}: bad gender {row['gender']!r}")
            try:
                out.append(SpeakerProfile(row["speaker_id"].strip(), gender,
                                          (row["l1"] or "").strip(), scores))
            except CorpusError as exc:
                raise CorpusError(f"{where}: {exc}") from None
    return out


def _turn_from_json(obj: dict, where: str) -> Turn:
    try:
        tokens = tuple(
            TimedToken(
                str(tok["text"]),
                _parse_float(tok["start_s"], where),
                _parse_float(tok["end_s"], where),
                tok.get("pos"),
            )
            for tok in obj["tokens"]
        )
        turn_id, speaker_id = str(obj["turn_id"]), str(obj["speaker_id"])
    except KeyError as exc:
        raise CorpusError(f"{where}: missing field {exc.args[0]!r}") from None
    except CorpusError as exc:
        raise CorpusError(f"{where}: {exc}") from None
    if not tokens:
        raise CorpusError(f"{where}: turn {turn_id} has no tokens")
    lld = obj.get("lld")
    if lld is not None:
        lld = {str(k): _parse_float(v, where) for k, v in lld.items()}
    try:
        return Turn(turn_id, speaker_id, tokens, lld)
    except CorpusError as exc:
        raise CorpusError(f"{where}: {exc}") from None


def load_turns(path: str | Path) -> list[Turn]:
    """Read the JSON-lines turn file. Blank lines are skipped."""
    turns = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            where = f"{path}: line {lineno}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{where}: parse error: {exc.msg}") from None
            turns.append(_turn_from_json(obj, where))
    return turns


def load_corpus(speakers_path: str | Path, turns_path: str | Path) -> Corpus:
    return Corpus.from_lists(load_speakers(speakers_path), load_turns(turns_path))


def write_corpus(corpus: Corpus, speakers_path: str | Path, turns_path: str | Path) -> None:
    with open(speakers_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["speaker_id", "gender", "l1", *TRAITS])
        for sp in corpus.speakers.values():
            w.writerow([sp.speaker_id, sp.gender, sp.l1,
                        *(repr(float(sp.neo_scores[t])) for t in TRAITS)])
    with open(turns_path, "w", encoding="utf-8") as fh:
        for turn in corpus.turns:
            obj = {
                "turn_id": turn.turn_id,
                "speaker_id": turn.speaker_id,
                "tokens": [
                    {"text": t.text, "start_s": t.start_s, "end_s": t.end_s,
                     **({"pos": t.pos_tag} if t.pos_tag is not None else {})}
                    for t in turn.tokens
                ],
            }
            if turn.lld is not None:
                obj["lld"] = dict(turn.lld)
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
