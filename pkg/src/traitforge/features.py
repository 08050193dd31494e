"""Per-turn feature extraction (LLD, lexicon categories, affect, word vectors, POS)
and the FeatureMatrix container the rest of the pipeline works on."""
from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .corpus import TRAITS, Corpus, Turn
from .labeling import NormThresholds, TraitLabel, label_corpus

FAMILIES = ("lld", "liwc", "dal", "wv", "pos")

# 36 word-level + 9 punctuation tags of the Penn Treebank.
PENN_TAGSET = (
    "CC", "CD", "DT", "EX", "FW", "IN", "JJ", "JJR", "JJS", "LS", "MD", "NN",
    "NNS", "NNP", "NNPS", "PDT", "POS", "PRP", "PRP$", "RB", "RBR", "RBS", "RP",
    "SYM", "TO", "UH", "VB", "VBD", "VBG", "VBN", "VBP", "VBZ", "WDT", "WP",
    "WP$", "WRB", "$", "#", "``", "''", "-LRB-", "-RRB-", ",", ".", ":",
)
assert len(PENN_TAGSET) == 45

_EDGE_PUNCT = re.compile(r"^[^\w]+|[^\w]+$", re.UNICODE)


class FeatureError(ValueError):
    pass


# --- resources --------------------------------------------------------------


@dataclass(frozen=True)
class Lexicon:
    """Word/stem patterns mapped to categories; ``happ*`` is a prefix pattern."""

    entries: Mapping[str, frozenset[str]]

    def __post_init__(self):
        if not self.entries:
            raise FeatureError("lexicon has no entries")
        words, stems = {}, []
        for pattern, cats in self.entries.items():
            if pattern != pattern.lower():
                raise FeatureError(f"lexicon pattern not lowercase: {pattern!r}")
            if not cats:
                raise FeatureError(f"lexicon pattern {pattern!r} has no categories")
            if pattern.endswith("*"):
                stems.append((pattern[:-1], frozenset(cats)))
            else:
                words[pattern] = frozenset(cats)
        object.__setattr__(self, "_words", words)
        object.__setattr__(self, "_stems", tuple(stems))
        object.__setattr__(
            self, "categories", tuple(sorted({c for cs in self.entries.values() for c in cs}))
        )

    def categories_of(self, word: str) -> frozenset[str]:
        cats = set(self._words.get(word, ()))
        for stem, sc in self._stems:
            if word.startswith(stem):
                cats |= sc
        return frozenset(cats)


@dataclass(frozen=True)
class AffectDictionary:
    scores: Mapping[str, tuple[float, float, float]]

    def __post_init__(self):
        for w, triple in self.scores.items():
            if len(triple) != 3 or not all(math.isfinite(v) for v in triple):
                raise FeatureError(f"affect entry for {w!r} must be three finite scores")


@dataclass(frozen=True)
class EmbeddingTable:
    vectors: Mapping[str, np.ndarray]
    dim: int = 300

    def __post_init__(self):
        if self.dim <= 0:
            raise FeatureError("embedding dimension must be positive")
        for w, v in self.vectors.items():
            if np.shape(v) != (self.dim,):
                raise FeatureError(f"embedding for {w!r} has shape {np.shape(v)}, expected ({self.dim},)")


@dataclass(frozen=True)
class Resources:
    lexicon: Optional[Lexicon] = None
    affect: Optional[AffectDictionary] = None
    embeddings: Optional[EmbeddingTable] = None
    lld_schema: Optional[Sequence[str]] = None
    tagset: Sequence[str] = PENN_TAGSET


def load_lexicon(path: str | Path) -> Lexicon:
    entries: dict[str, frozenset[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            try:
                pattern, cats = line.split("\t")
            except ValueError:
                raise FeatureError(f"{path}: line {lineno}: expected pattern<TAB>categories") from None
            cs = frozenset(c.strip() for c in cats.split(",") if c.strip())
            entries[pattern.strip()] = entries.get(pattern.strip(), frozenset()) | cs
    return Lexicon(entries)


def load_affect(path: str | Path) -> AffectDictionary:
    scores = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            try:
                scores[row["word"].lower()] = (
                    float(row["pleasantness"]), float(row["activation"]), float(row["imagery"])
                )
            except (KeyError, TypeError, ValueError):
                raise FeatureError(f"{path}: line {reader.line_num}: bad affect row") from None
    return AffectDictionary(scores)


def load_embeddings(path: str | Path) -> EmbeddingTable:
    vectors = {}
    with open(path, encoding="utf-8") as fh:
        head = fh.readline().strip()
        if not head.startswith("d="):
            raise FeatureError(f"{path}: line 1: expected 'd=<dim>'")
        dim = int(head[2:])
        for lineno, line in enumerate(fh, 2):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != dim + 1:
                raise FeatureError(f"{path}: line {lineno}: expected {dim} values")
            vectors[parts[0]] = np.array([float(x) for x in parts[1:]])
    return EmbeddingTable(vectors, dim)


def load_lld_schema(path: str | Path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]


# --- extractors -------------------------------------------------------------


@dataclass(frozen=True)
class FeatureVector:
    names: tuple[str, ...]
    values: np.ndarray
    turn_id: str = ""
    speaker_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if len(self.names) != len(self.values):
            raise FeatureError("names and values differ in length")
        if len(set(self.names)) != len(self.names):
            raise FeatureError("duplicate feature names")
        if not np.all(np.isfinite(self.values)):
            raise FeatureError("non-finite feature value")

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values.tolist()))


def _normalize_word(text: str) -> str:
    return _EDGE_PUNCT.sub("", text.lower()).strip("_")


def tokenize(turn: Turn | Iterable[str]) -> list[str]:
    """Lowercase, strip leading/trailing punctuation, drop empties."""
    texts = (t.text for t in turn.tokens) if isinstance(turn, Turn) else turn
    return [w for w in map(_normalize_word, texts) if w]


def extract_lexicon_counts(words: Sequence[str], lex: Lexicon) -> FeatureVector:
    counts = dict.fromkeys(lex.categories, 0)
    for w in words:
        for c in lex.categories_of(w):
            counts[c] += 1
    n = len(words)
    return FeatureVector(tuple(lex.categories),
                         [counts[c] / n if n else 0.0 for c in lex.categories])


def extract_affect(words: Sequence[str], dal: AffectDictionary) -> FeatureVector:
    names = ("pleasantness", "activation", "imagery", "coverage")
    covered = [dal.scores[w] for w in words if w in dal.scores]
    if not covered:
        return FeatureVector(names, np.zeros(4))
    means = np.mean(np.array(covered), axis=0)
    return FeatureVector(names, [*means, len(covered) / len(words)])


def extract_wordvec(words: Sequence[str], emb: EmbeddingTable) -> FeatureVector:
    names = tuple(f"{i:03d}" for i in range(emb.dim))
    hits = [emb.vectors[w] for w in words if w in emb.vectors]
    if not hits:
        return FeatureVector(names, np.zeros(emb.dim))
    return FeatureVector(names, np.mean(np.array(hits), axis=0))


def extract_pos_counts(turn: Turn, tagset: Sequence[str] = PENN_TAGSET) -> FeatureVector:
    index = {tag: i for i, tag in enumerate(tagset)}
    counts = np.zeros(len(tagset) + 1)
    for tok in turn.tokens:
        if tok.pos_tag is None:
            raise FeatureError("untagged corpus; POS features unavailable")
        counts[index.get(tok.pos_tag, len(tagset))] += 1
    return FeatureVector((*tagset, "OTHER"), counts, turn.turn_id, turn.speaker_id)


def extract_lld(turn: Turn, schema: Sequence[str]) -> FeatureVector:
    """Project the turn's LLD dict onto ``schema``; absent values are 0 with ``lld_missing``=1."""
    lld = turn.lld or {}
    values, missing = [], turn.lld is None
    for name in schema:
        if name in lld:
            v = float(lld[name])
            if not math.isfinite(v):
                raise FeatureError(f"turn {turn.turn_id}: non-finite LLD {name}")
            values.append(v)
        else:
            values.append(0.0)
            missing = True
    return FeatureVector((*schema, "lld_missing"), [*values, float(missing)],
                         turn.turn_id, turn.speaker_id)


def assemble(turn: Turn, families: Iterable[str], resources: Resources) -> FeatureVector:
    """Concatenate enabled families in the fixed order lld, liwc, dal, wv, pos."""
    enabled = set(families)
    unknown = enabled - set(FAMILIES)
    if unknown:
        raise FeatureError(f"unknown feature families: {sorted(unknown)}")
    words = tokenize(turn)
    parts: list[tuple[str, FeatureVector]] = []
    for fam in FAMILIES:
        if fam not in enabled:
            continue
        if fam == "lld":
            if resources.lld_schema is None:
                raise FeatureError("lld enabled but no LLD schema given")
            parts.append((fam, extract_lld(turn, resources.lld_schema)))
        elif fam == "liwc":
            if resources.lexicon is None:
                raise FeatureError("liwc enabled but no lexicon given")
            parts.append((fam, extract_lexicon_counts(words, resources.lexicon)))
        elif fam == "dal":
            if resources.affect is None:
                raise FeatureError("dal enabled but no affect dictionary given")
            parts.append((fam, extract_affect(words, resources.affect)))
        elif fam == "wv":
            if resources.embeddings is None:
                raise FeatureError("wv enabled but no embeddings given")
            parts.append((fam, extract_wordvec(words, resources.embeddings)))
        else:
            parts.append((fam, extract_pos_counts(turn, resources.tagset)))
    names = tuple(f"{fam}:{n}" for fam, fv in parts for n in fv.names)
    values = np.concatenate([fv.values for _, fv in parts]) if parts else np.zeros(0)
    return FeatureVector(names, values, turn.turn_id, turn.speaker_id)


# --- matrix -----------------------------------------------------------------


@dataclass(frozen=True)
class FeatureMatrix:
    """Dense instances (rows = turns) with named columns and per-row provenance.

    ``labels`` maps trait -> int array of TraitLabel values.
    """

    X: np.ndarray
    names: tuple[str, ...]
    turn_ids: np.ndarray
    speaker_ids: np.ndarray
    genders: np.ndarray
    l1s: np.ndarray
    labels: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim != 2:
            raise FeatureError("X must be 2-D")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "names", tuple(self.names))
        for attr in ("turn_ids", "speaker_ids", "genders", "l1s"):
            arr = np.asarray(getattr(self, attr), dtype=object)
            if arr.shape != (X.shape[0],):
                raise FeatureError(f"{attr} length does not match row count")
            object.__setattr__(self, attr, arr)
        labels = {t: np.asarray(v, dtype=int) for t, v in self.labels.items()}
        for t, v in labels.items():
            if v.shape != (X.shape[0],):
                raise FeatureError(f"labels for {t} length does not match row count")
        object.__setattr__(self, "labels", labels)
        if X.shape[1] != len(self.names):
            raise FeatureError("column count does not match names")

    def __len__(self) -> int:
        return self.X.shape[0]

    def take(self, idx) -> "FeatureMatrix":
        idx = np.asarray(idx)
        return replace(
            self, X=self.X[idx], turn_ids=self.turn_ids[idx], speaker_ids=self.speaker_ids[idx],
            genders=self.genders[idx], l1s=self.l1s[idx],
            labels={t: v[idx] for t, v in self.labels.items()},
        )

    def with_X(self, X: np.ndarray) -> "FeatureMatrix":
        return replace(self, X=X)

    def group_values(self, kind: str) -> np.ndarray:
        kind = kind.lower()
        if kind == "speaker":
            return self.speaker_ids
        if kind == "gender":
            return self.genders
        if kind == "l1":
            return self.l1s
        if kind == "gender_l1":
            return np.array([f"{g}x{l}" for g, l in zip(self.genders, self.l1s)], dtype=object)
        raise ValueError(f"unknown group kind {kind!r}")

    def family_mask(self, families: Iterable[str]) -> np.ndarray:
        fams = set(families)
        return np.array([n.split(":", 1)[0] in fams for n in self.names], dtype=bool)

    def row(self, i: int) -> FeatureVector:
        return FeatureVector(self.names, self.X[i], self.turn_ids[i], self.speaker_ids[i])


def build_matrix(
    corpus: Corpus,
    families: Iterable[str],
    resources: Resources,
    norms: Optional[NormThresholds] = None,
    per_gender_norms: bool = False,
) -> FeatureMatrix:
    families = tuple(families)
    rows, names = [], None
    for turn in corpus.turns:
        fv = assemble(turn, families, resources)
        if names is None:
            names = fv.names
        rows.append(fv.values)
    if names is None:
        names = ()
    labels = {}
    if norms is not None:
        lab = label_corpus(corpus, norms, per_gender=per_gender_norms)
        labels = {t: [int(lab[(turn.speaker_id, t)]) for turn in corpus.turns] for t in TRAITS}
    sp = [corpus.speaker_of(t) for t in corpus.turns]
    return FeatureMatrix(
        np.array(rows).reshape(len(rows), len(names)), names,
        [t.turn_id for t in corpus.turns], [t.speaker_id for t in corpus.turns],
        [s.gender for s in sp], [s.l1 for s in sp], labels,
    )


_META = ("turn_id", "speaker_id", "gender", "l1")


def write_matrix(m: FeatureMatrix, path: str | Path) -> None:
    traits = [t for t in TRAITS if t in m.labels]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*_META, *(f"label_{t}" for t in traits), *m.names])
        for i in range(len(m)):
            w.writerow([
                m.turn_ids[i], m.speaker_ids[i], m.genders[i], m.l1s[i],
                *(TraitLabel(m.labels[t][i]).name for t in traits),
                *(repr(float(v)) for v in m.X[i]),
            ])


def read_matrix(path: str | Path) -> FeatureMatrix:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header[:4]) != _META:
            raise FeatureError(f"{path}: not a feature matrix file")
        label_cols = [h for h in header[4:] if h.startswith("label_")]
        k = 4 + len(label_cols)
        names = header[k:]
        meta, labels, X = [], {h[6:]: [] for h in label_cols}, []
        for row in reader:
            meta.append(row[:4])
            for h, v in zip(label_cols, row[4:k]):
                labels[h[6:]].append(int(TraitLabel[v]))
            X.append([float(v) for v in row[k:]])
    meta_a = np.array(meta, dtype=object).reshape(len(meta), 4)
    return FeatureMatrix(
        np.array(X, dtype=float).reshape(len(X), len(names)), names,
        meta_a[:, 0], meta_a[:, 1], meta_a[:, 2], meta_a[:, 3], labels,
    )
