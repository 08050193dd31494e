import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from traitforge.features import FeatureMatrix
from traitforge.normalization import (
    GroupKey, NormalizationError, NormStats, apply_stats, fit_group_stats, normalize_by_speaker,
    normalize_split,
)

from conftest import random_matrix


def matrix(values, speakers=None, genders=None, l1s=None):
    X = np.asarray(values, dtype=float).reshape(len(values), -1)
    n = X.shape[0]
    return FeatureMatrix(X, [f"f{j}" for j in range(X.shape[1])], [f"t{i}" for i in range(n)],
                         speakers or ["s"] * n, genders or ["F"] * n, l1s or ["SAE"] * n)


def test_fit_example():
    stats = fit_group_stats(matrix([2, 4, 6]), "gender")
    assert stats.mu["F"][0] == 4.0
    assert stats.sigma["F"][0] == 2.0


def test_constant_feature():
    stats = fit_group_stats(matrix([5, 5, 5]), "gender")
    assert stats.mu["F"][0] == 5.0 and stats.sigma["F"][0] == 0.0
    out = apply_stats(matrix([5, 7]), stats)
    assert out.X.ravel().tolist() == [0.0, 0.0]


def test_single_instance_group_sigma_zero():
    stats = fit_group_stats(matrix([3.0]), "gender")
    assert stats.sigma["F"][0] == 0.0


def test_apply_example():
    stats = fit_group_stats(matrix([2, 4, 6]), "gender")
    out = apply_stats(matrix([6, 4]), stats)
    assert out.X.ravel().tolist() == [1.0, 0.0]


def test_groups_independent_and_order_free():
    m = matrix([1, 2, 3, 10, 20, 30], genders=["F", "F", "F", "M", "M", "M"])
    s1 = fit_group_stats(m, "gender")
    s2 = fit_group_stats(m.take([5, 0, 4, 1, 3, 2]), "gender")
    assert s1.mu["F"][0] == 2.0 and s1.mu["M"][0] == 20.0
    for g in "FM":
        np.testing.assert_allclose(s1.mu[g], s2.mu[g])
        np.testing.assert_allclose(s1.sigma[g], s2.sigma[g])


def test_unseen_group():
    stats = fit_group_stats(matrix([1, 2, 3]), "gender")
    with pytest.raises(NormalizationError, match="no stats for group"):
        apply_stats(matrix([1.0], genders=["M"]), stats)


def test_speaker_norm_examples():
    out = normalize_by_speaker(matrix([2, 4, 6]))
    assert out.X.ravel().tolist() == [-1.0, 0.0, 1.0]
    out = normalize_by_speaker(matrix([7.0]))
    assert out.X.ravel().tolist() == [0.0]
    m = matrix([1, 2, 4, 101, 102, 104], speakers=["a"] * 3 + ["b"] * 3)
    out = normalize_by_speaker(m).X.ravel()
    np.testing.assert_allclose(out[:3], out[3:], atol=1e-12)


def test_none_is_identity():
    rng = np.random.default_rng(0)
    m = random_matrix(rng)
    t = random_matrix(rng)
    a, b = normalize_split(m, t, "none")
    assert a is m and b is t


def test_gender_split_uses_train_stats():
    train = matrix([0, 2, 4, 10], genders=["F", "F", "F", "M"])
    test = matrix([2, 6], genders=["F", "F"])
    _, b = normalize_split(train, test, "gender")
    assert b.X.ravel().tolist() == [0.0, 2.0]


def test_family_opt_out():
    m = FeatureMatrix(np.array([[1.0, 10.0], [3.0, 30.0]]), ["lld:a", "wv:0"], ["t0", "t1"],
                      ["s", "s"], ["F", "F"], ["SAE", "SAE"])
    a, _ = normalize_split(m, m, "speaker", exclude_families=["wv"])
    assert a.X[:, 1].tolist() == [10.0, 30.0]
    assert a.X[:, 0].tolist() == pytest.approx([-2 ** -0.5, 2 ** -0.5])


def test_stats_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    m = random_matrix(rng)
    stats = fit_group_stats(m, "l1")
    stats.to_csv(tmp_path / "s.csv")
    back = NormStats.from_csv(tmp_path / "s.csv", "l1")
    assert back.names == stats.names
    for g in stats.mu:
        np.testing.assert_array_equal(back.mu[g], stats.mu[g])
        np.testing.assert_array_equal(back.sigma[g], stats.sigma[g])


def test_group_key():
    assert GroupKey("gender", "F").value == "F"
    with pytest.raises(NormalizationError):
        GroupKey("gender", "SAE")


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["gender", "l1"]))
def test_fit_apply_moments(seed, kind):
    m = random_matrix(np.random.default_rng(seed), n=120, d=3)
    out = apply_stats(m, fit_group_stats(m, kind))
    groups = m.group_values(kind)
    for g in set(groups):
        Xg = out.X[groups == g]
        if len(Xg) < 2:
            continue
        assert np.all(np.abs(Xg.mean(axis=0)) < 1e-9)
        assert np.all(np.abs(Xg.std(axis=0, ddof=1) - 1) < 1e-9)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 100), st.floats(-1000, 1000))
def test_speaker_offset_invariance(seed, a, b):
    rng = np.random.default_rng(seed)
    m = random_matrix(rng, n=80, d=2)
    offsets = {s: rng.normal(0, 50) for s in set(m.speaker_ids)}
    shifted = m.with_X(m.X + np.array([offsets[s] for s in m.speaker_ids])[:, None])
    np.testing.assert_allclose(normalize_by_speaker(m).X, normalize_by_speaker(shifted).X, atol=1e-8)
    scaled = m.with_X(a * m.X + b)
    np.testing.assert_allclose(normalize_by_speaker(m).X, normalize_by_speaker(scaled).X, atol=1e-8)
