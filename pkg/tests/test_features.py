import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from traitforge.corpus import TimedToken, Turn
from traitforge.features import (
    PENN_TAGSET, AffectDictionary, EmbeddingTable, FeatureError, Lexicon, Resources, assemble,
    extract_affect, extract_lexicon_counts, extract_lld, extract_pos_counts, extract_wordvec,
    load_affect, load_embeddings, load_lexicon, read_matrix, tokenize, write_matrix,
    build_matrix,
)


def turn(words, tags=None, lld=None, tid="t1"):
    toks = tuple(TimedToken(w, i * 0.5, i * 0.5 + 0.3, None if tags is None else tags[i])
                 for i, w in enumerate(words))
    return Turn(tid, "s1", toks, lld)


LEX = Lexicon({"happ*": frozenset({"Pos"}), "sad": frozenset({"Neg"}),
               "happy": frozenset({"Joy"})})


def test_tokenize():
    assert tokenize(turn(["Hello,", "world!"])) == ["hello", "world"]
    assert tokenize(turn(["..."])) == []
    assert tokenize(turn(["don't"])) == ["don't"]
    assert tokenize(["well-known", "(yes)"]) == ["well-known", "yes"]


def test_lexicon_proportions():
    fv = extract_lexicon_counts(["happy", "happily", "sad"], Lexicon({
        "happ*": frozenset({"Pos"}), "sad": frozenset({"Neg"})}))
    d = fv.as_dict()
    assert d["Pos"] == pytest.approx(2 / 3)
    assert d["Neg"] == pytest.approx(1 / 3)


def test_lexicon_empty_and_multi_category():
    assert np.all(extract_lexicon_counts([], LEX).values == 0)
    d = extract_lexicon_counts(["happy"], LEX).as_dict()
    assert d == {"Joy": 1.0, "Neg": 0.0, "Pos": 1.0}


def test_lexicon_validation():
    with pytest.raises(FeatureError):
        Lexicon({})
    with pytest.raises(FeatureError):
        Lexicon({"Happy": frozenset({"Pos"})})


DAL = AffectDictionary({"good": (1.0, 2.0, 3.0), "great": (3.0, 2.0, 1.0)})


def test_affect():
    d = extract_affect(["good", "great"], DAL).as_dict()
    assert d["pleasantness"] == 2.0
    assert d["coverage"] == 1.0
    d = extract_affect(["x", "y"], DAL).as_dict()
    assert d == {"pleasantness": 0.0, "activation": 0.0, "imagery": 0.0, "coverage": 0.0}
    d = extract_affect(["good", "x", "y", "z"], DAL).as_dict()
    assert d["coverage"] == 0.25
    assert d["imagery"] == 3.0


def _emb(d=4):
    return EmbeddingTable({"a": np.eye(d)[0], "b": np.eye(d)[1]}, d)


def test_wordvec():
    emb = _emb()
    np.testing.assert_array_equal(extract_wordvec(["a", "b"], emb).values, [0.5, 0.5, 0, 0])
    np.testing.assert_array_equal(extract_wordvec(["a"], emb).values, [1, 0, 0, 0])
    np.testing.assert_array_equal(extract_wordvec(["zz"], emb).values, np.zeros(4))
    np.testing.assert_array_equal(extract_wordvec([], emb).values, np.zeros(4))


def test_embedding_dimension_check():
    with pytest.raises(FeatureError):
        EmbeddingTable({"a": np.zeros(3)}, 4)


def test_pos_counts():
    fv = extract_pos_counts(turn(["a", "b", "c"], ["NN", "NN", "VB"]))
    d = fv.as_dict()
    assert len(PENN_TAGSET) == 45 and len(fv.names) == 46
    assert d["NN"] == 2 and d["VB"] == 1 and sum(d.values()) == 3
    assert np.all(extract_pos_counts(Turn("e", "s", ())).values == 0)
    assert extract_pos_counts(turn(["a"], ["XYZ"])).as_dict()["OTHER"] == 1


def test_pos_untagged():
    with pytest.raises(FeatureError, match="untagged corpus"):
        extract_pos_counts(turn(["a", "b"], ["NN", None]))


def test_lld():
    d = extract_lld(turn(["a"], lld={"f0_mean": 120.0}), ["f0_mean"]).as_dict()
    assert d == {"f0_mean": 120.0, "lld_missing": 0.0}
    d = extract_lld(turn(["a"]), ["f0_mean", "int"]).as_dict()
    assert d == {"f0_mean": 0.0, "int": 0.0, "lld_missing": 1.0}
    d = extract_lld(turn(["a"], lld={"f0_mean": 1.0, "extra": 9.0}), ["f0_mean"]).as_dict()
    assert d == {"f0_mean": 1.0, "lld_missing": 0.0}
    with pytest.raises(FeatureError):
        extract_lld(turn(["a"], lld={"f0_mean": float("nan")}), ["f0_mean"])


def _resources(d=5):
    return Resources(LEX, DAL, _emb(d), ["f0_mean", "int"])


def test_assemble_all_families():
    res = _resources()
    t = turn(["Happy", "good", "a"], ["JJ", "JJ", "DT"], {"f0_mean": 100.0, "int": 60.0})
    fv = assemble(t, ["lld", "liwc", "dal", "wv", "pos"], res)
    assert len(fv.names) == 2 + 1 + len(LEX.categories) + 4 + 5 + 46
    fams = [n.split(":")[0] for n in fv.names]
    assert fams == sorted(fams, key=["lld", "liwc", "dal", "wv", "pos"].index)
    assert fv.values.tolist() == assemble(t, ["pos", "wv", "dal", "liwc", "lld"], res).values.tolist()


def test_assemble_wv_only_and_missing_resource():
    fv = assemble(turn(["a"]), ["wv"], _resources(7))
    assert len(fv.names) == 7
    with pytest.raises(FeatureError):
        assemble(turn(["a"]), ["liwc"], Resources())


words = st.lists(st.sampled_from(["happy", "happily", "sad", "good", "great", "a", "b", "zz"]),
                 max_size=12)


@settings(max_examples=100)
@given(words, st.randoms())
def test_order_invariance(ws, rnd):
    shuffled = list(ws)
    rnd.shuffle(shuffled)
    emb = _emb()
    for f, res in ((extract_lexicon_counts, LEX), (extract_affect, DAL), (extract_wordvec, emb)):
        np.testing.assert_allclose(f(ws, res).values, f(shuffled, res).values, atol=1e-12)


@settings(max_examples=100)
@given(words, st.floats(-10, 10, allow_nan=False))
def test_wordvec_linearity(ws, c):
    emb = _emb()
    scaled = EmbeddingTable({k: c * v for k, v in emb.vectors.items()}, emb.dim)
    np.testing.assert_allclose(extract_wordvec(ws, scaled).values,
                               c * extract_wordvec(ws, emb).values, atol=1e-12)


def test_resource_files(tmp_path):
    (tmp_path / "lex.tsv").write_text("happ*\tPos,Emo\nsad\tNeg\n")
    lex = load_lexicon(tmp_path / "lex.tsv")
    assert lex.categories == ("Emo", "Neg", "Pos")
    (tmp_path / "dal.csv").write_text("word,pleasantness,activation,imagery\nGood,1,2,3\n")
    assert load_affect(tmp_path / "dal.csv").scores["good"] == (1.0, 2.0, 3.0)
    (tmp_path / "emb.txt").write_text("d=3\na 1 2 3\nb 0 0 1\n")
    emb = load_embeddings(tmp_path / "emb.txt")
    assert emb.dim == 3 and emb.vectors["a"].tolist() == [1, 2, 3]
    (tmp_path / "bad.txt").write_text("d=3\na 1 2\n")
    with pytest.raises(FeatureError, match="line 2"):
        load_embeddings(tmp_path / "bad.txt")


def test_matrix_roundtrip(tmp_path, small_corpus_files):
    from traitforge.corpus import load_corpus
    from traitforge.labeling import NormThresholds, Threshold
    corpus = load_corpus(*small_corpus_files)
    norms = NormThresholds({t: Threshold(20, 30) for t in "OCEAN"})
    m = build_matrix(corpus, ["lld", "liwc"], Resources(lexicon=LEX, lld_schema=["f0_mean"]), norms)
    assert m.X.shape == (4, 2 + len(LEX.categories))
    assert m.labels["O"].tolist() == [0, 0, 2, 2]
    write_matrix(m, tmp_path / "m.csv")
    back = read_matrix(tmp_path / "m.csv")
    np.testing.assert_array_equal(back.X, m.X)
    assert back.names == m.names
    assert back.genders.tolist() == ["F", "F", "M", "M"]
    assert {t: v.tolist() for t, v in back.labels.items()} == {t: v.tolist() for t, v in m.labels.items()}
