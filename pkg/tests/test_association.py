import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from echo_metrics import synth
from echo_metrics.association import (
    CorrelationMatrix, correlation_matrix, mantel_test, read_matrix_csv, spearman,
    write_matrix_csv,
)
from echo_metrics.ingest import ItemStats


def test_spearman_fixtures():
    assert spearman([1, 2, 3], [10, 20, 30]) == 1.0
    assert spearman([1, 2, 3], [30, 20, 10]) == -1.0
    # ranks x = (1, 2.5, 2.5, 4), y = (1, 3, 2, 4)
    rx = np.array([1, 2.5, 2.5, 4]) - 2.5
    ry = np.array([1, 3, 2, 4]) - 2.5
    expected = rx @ ry / np.sqrt((rx @ rx) * (ry @ ry))
    assert spearman([1, 2, 2, 4], [1, 3, 2, 4]) == expected
    assert expected == pytest.approx(4.5 / np.sqrt(4.5 * 5))


def test_spearman_errors():
    with pytest.raises(ValueError):
        spearman([1, 2, 3], [1, 2])
    with pytest.raises(ValueError):
        spearman([1, 2], [1, 2])
    with pytest.raises(ValueError, match="constant"):
        spearman([1, 1, 1], [1, 2, 3])


vectors = st.lists(st.integers(-50, 50), min_size=3, max_size=40)


@settings(max_examples=100)
@given(st.data())
def test_spearman_symmetric_and_rank_invariant(data):
    x = data.draw(vectors)
    y = data.draw(st.lists(st.integers(-50, 50), min_size=len(x), max_size=len(x)))
    if len(set(x)) < 2 or len(set(y)) < 2:
        return
    r = spearman(x, y)
    assert r == pytest.approx(spearman(y, x), abs=1e-14)
    assert r == pytest.approx(spearman(np.exp(np.array(x) / 10), np.array(y) ** 3), abs=1e-12)
    assert r == pytest.approx(stats.spearmanr(x, y).statistic, abs=1e-12)
    assert -1 <= r <= 1


def _fb(i, likes, comments, shares, cat="science"):
    return ItemStats(f"p{i}", "facebook", cat, comments=comments, likes=likes, shares=shares)


def test_matrix_aligned_actions():
    items = [_fb(i, i, 2 * i + 1, i * i) for i in range(10)]
    m = correlation_matrix(items, ["fb_likes", "fb_comments", "fb_shares"])
    np.testing.assert_array_equal(m.values, np.ones((3, 3)))
    assert m.n_items == 10


def test_matrix_independent_actions():
    rng = np.random.default_rng(0)
    items = [_fb(i, *rng.integers(0, 10**6, 3)) for i in range(10_000)]
    m = correlation_matrix(items, ["fb_likes", "fb_comments", "fb_shares"])
    off = m.values[np.triu_indices(3, 1)]
    assert np.all(np.abs(off) < 0.05)


def test_matrix_cross_platform_join_and_category():
    fb, yt = synth.generate_item_stats(synth.GeneratorConfig(n_items=50), coupling=0.9)
    m = correlation_matrix(fb + yt[:60], ["fb_likes", "yt_views"])
    assert m.n_items == 60
    assert m.values[0, 1] > 0.6
    sci = correlation_matrix(fb + yt, ["fb_likes", "yt_views"], category="science")
    assert sci.n_items == sum(it.category == "science" for it in fb)


def test_matrix_errors():
    items = [_fb(i, i, i, i) for i in range(5)]
    with pytest.raises(ValueError, match="undefined"):
        correlation_matrix(items, ["fb_likes", "fb_views"])
    with pytest.raises(ValueError, match="usable"):
        correlation_matrix(items[:2], ["fb_likes", "fb_shares"])
    with pytest.raises(ValueError, match="usable"):
        correlation_matrix(items, ["fb_likes", "yt_views"])


def test_coupling_orders_cross_correlation():
    cfg = synth.GeneratorConfig(n_items=1000)
    rs = []
    for c in (0.0, 0.5, 1.0):
        fb, yt = synth.generate_item_stats(cfg, coupling=c, seed=1)
        rs.append(correlation_matrix(fb + yt, ["fb_likes", "yt_views"]).values[0, 1])
    assert rs[0] < rs[1] < rs[2]
    assert abs(rs[0]) < 0.1


def test_matrix_invariants():
    with pytest.raises(ValueError, match="symmetric"):
        CorrelationMatrix(("a", "b"), [[1, 0.2], [0.3, 1]])
    with pytest.raises(ValueError):
        CorrelationMatrix(("a", "b"), np.eye(3))


def test_matrix_csv_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    v = rng.uniform(-1, 1, (4, 4))
    m = CorrelationMatrix(tuple("abcd"), (v + v.T) / 2)
    write_matrix_csv(m, tmp_path / "m.csv")
    back = read_matrix_csv(tmp_path / "m.csv")
    assert back.labels == m.labels
    assert back.values.tobytes() == m.values.tobytes()


# -- mantel ------------------------------------------------------------------------------

def random_corr(rng, d):
    a = rng.standard_normal((d + 5, d))
    return np.corrcoef(a, rowvar=False)


def exact_mantel_p(a, b):
    d = a.shape[0]
    iu = np.triu_indices(d, 1)
    r_obs = np.corrcoef(a[iu], b[iu])[0, 1]
    hits = 0
    perms = list(itertools.permutations(range(d)))
    for p in perms:
        pb = b[np.ix_(p, p)]
        hits += np.corrcoef(a[iu], pb[iu])[0, 1] >= r_obs - 1e-12
    return hits / len(perms)


def test_mantel_identity():
    rng = np.random.default_rng(0)
    a = random_corr(rng, 10)
    res = mantel_test(a, a, replicates=10_000)
    assert res.r == 1.0
    assert res.p_value <= 1.01 / 10_001


def test_mantel_small_identity_counts_ties():
    # in dim 4 a share 1/24 of permutations reproduces the matrix and ties
    a = random_corr(np.random.default_rng(1), 4)
    res = mantel_test(a, a, replicates=24_000)
    assert res.p_value == pytest.approx(1 / 24, abs=0.005)


def test_mantel_exact_dim3():
    rng = np.random.default_rng(5)
    for k in range(10):
        a, b = random_corr(rng, 3), random_corr(rng, 3)
        mc = mantel_test(a, b, replicates=10_000, seed=k)
        assert abs(mc.p_value - exact_mantel_p(a, b)) < 0.02


def test_mantel_statistic_is_upper_triangle_pearson():
    rng = np.random.default_rng(6)
    a, b = random_corr(rng, 6), random_corr(rng, 6)
    iu = np.triu_indices(6, 1)
    assert mantel_test(a, b, replicates=99).r == pytest.approx(
        np.corrcoef(a[iu], b[iu])[0, 1], abs=1e-14)


def test_mantel_deterministic():
    rng = np.random.default_rng(7)
    a, b = random_corr(rng, 5), random_corr(rng, 5)
    assert mantel_test(a, b, seed=3) == mantel_test(a, b, seed=3)


def test_mantel_errors():
    a = CorrelationMatrix(tuple("abc"), np.eye(3) + 0.1 * (1 - np.eye(3)))
    b = CorrelationMatrix(tuple("abd"), a.values)
    with pytest.raises(ValueError, match="dimension"):
        mantel_test(np.eye(3), np.eye(4))
    with pytest.raises(ValueError, match="label"):
        mantel_test(a, b)
    with pytest.raises(ValueError):
        mantel_test(a.values, a.values, replicates=50)
    with pytest.raises(ValueError):
        mantel_test(np.eye(2), np.eye(2))


def test_mantel_null_calibration():
    rng = np.random.default_rng(8)
    ps = [mantel_test(random_corr(rng, 6), random_corr(rng, 6), replicates=2000, seed=i).p_value
          for i in range(200)]
    ps = np.array(ps)
    for alpha in (0.05, 0.10):
        assert np.mean(ps <= alpha) <= alpha + 0.04
    assert stats.kstest(ps, "uniform").pvalue > 0.001
