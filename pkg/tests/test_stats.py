import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special, stats as sps

from neuroscore import fixtures
from neuroscore.core import GAN_CATEGORIES, ScoreTable
from neuroscore.errors import (
    DegenerateGroups,
    EmptyCategory,
    GridMismatch,
    LowSampleSize,
    NoVariation,
    TooFewSamples,
    ZeroVariance,
)
from neuroscore.stats import (
    betainc,
    bootstrap_correlation,
    behavioral_accuracy,
    channel_anova_f,
    correlate_tables,
    gan_only_correlation,
    mean_center_within,
    pearson,
    t_two_tailed_p,
)
from neuroscore.synth import simulate_behavioral_trials


@pytest.fixture(scope="module")
def tables():
    return fixtures.neuroscore_table(), fixtures.behavioral_table()


def _random_tables(seed, n_p=12, n_c=4):
    rng = np.random.default_rng(seed)
    parts = tuple(str(i) for i in range(n_p))
    cats = tuple(f"k{j}" for j in range(n_c))
    return (ScoreTable(parts, cats, rng.random((n_p, n_c))),
            ScoreTable(parts, cats, rng.random((n_p, n_c))))


# --- incomplete beta and t tail -------------------------------------------

@pytest.mark.parametrize("a,b", [(0.5, 0.5), (23.0, 0.5), (1.0, 3.0), (7.5, 12.0), (200.0, 0.5)])
def test_betainc_matches_scipy(a, b):
    x = np.linspace(0.0, 1.0, 41)
    np.testing.assert_allclose(betainc(a, b, x), special.betainc(a, b, x), rtol=1e-10,
                               atol=1e-300)


def test_betainc_tiny_tail():
    x = 1e-6
    assert betainc(23.0, 0.5, x) == pytest.approx(special.betainc(23.0, 0.5, x), rel=1e-9)


def test_t_tail_reference_value():
    p = t_two_tailed_p(2.0, 46)
    assert p == pytest.approx(0.0514, abs=5e-4)
    assert p == pytest.approx(2 * sps.t.sf(2.0, 46), rel=1e-10)


def test_t_tail_by_integration():
    """Independent check: integrate the t density numerically."""
    from scipy.integrate import quad
    df = 46
    dens = lambda x: np.exp(special.gammaln((df + 1) / 2) - special.gammaln(df / 2)) \
        / np.sqrt(df * np.pi) * (1 + x * x / df) ** (-(df + 1) / 2)
    tail, _ = quad(dens, 2.0, np.inf, epsabs=1e-14)
    assert t_two_tailed_p(2.0, df) == pytest.approx(2 * tail, rel=1e-8)


def test_t_tail_extremes():
    assert t_two_tailed_p(0.0, 10) == pytest.approx(1.0)
    assert t_two_tailed_p(np.inf, 10) == 0.0


# --- pearson ---------------------------------------------------------------

def test_pearson_perfect():
    with pytest.warns(LowSampleSize):
        r = pearson([1, 2, 3], [2, 4, 6])
    assert r.r == pytest.approx(1.0) and r.p_two_tailed == pytest.approx(0.0, abs=1e-15)
    with pytest.warns(LowSampleSize):
        assert pearson([1, 2, 3], [6, 4, 2]).r == pytest.approx(-1.0)


def test_pearson_matches_scipy(rng):
    x, y = rng.standard_normal(30), rng.standard_normal(30)
    y = y + 0.4 * x
    ours, ref = pearson(x, y), sps.pearsonr(x, y)
    assert ours.r == pytest.approx(ref[0], rel=1e-12)
    assert ours.p_two_tailed == pytest.approx(ref[1], rel=1e-9)
    assert ours.df == 28 and ours.n == 30


def test_pearson_errors():
    with pytest.raises(ZeroVariance):
        pearson([1, 1, 1], [1, 2, 3])
    with pytest.raises(TooFewSamples):
        pearson([1, 2], [2, 1])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 100), st.floats(-50, 50))
def test_pearson_affine_invariance(seed, a, b):
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal(15), rng.standard_normal(15)
    base = pearson(x, y).r
    assert pearson(a * x + b, y).r == pytest.approx(base, abs=1e-10)
    assert pearson(-x, y).r == pytest.approx(-base, abs=1e-12)
    assert -1.0 <= base <= 1.0


# --- centering -------------------------------------------------------------

def test_center_example():
    t = mean_center_within(ScoreTable(("1",), ("a", "b", "c", "d"), [[1, 2, 3, 4]]))
    np.testing.assert_allclose(t.values, [[-1.5, -0.5, 0.5, 1.5]])


def test_center_idempotent(tables):
    once = mean_center_within(tables[0])
    np.testing.assert_allclose(mean_center_within(once).values, once.values, atol=1e-15)
    assert np.abs(once.values.mean(axis=1)).max() <= 1e-12


def test_center_participant_one(tables):
    row = mean_center_within(tables[0]).values[0]
    np.testing.assert_allclose(row, [-0.0658, 0.0253, 0.0423, -0.0018], atol=1e-4)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_center_preserves_differences(seed):
    t, _ = _random_tables(seed)
    c = mean_center_within(t).values
    v = t.values
    np.testing.assert_allclose(c[:, :, None] - c[:, None, :], v[:, :, None] - v[:, None, :],
                               atol=1e-12)
    assert (np.argsort(c, axis=1) == np.argsort(v, axis=1)).all()


# --- reproduction on the reference tables ----------------------------------

def test_centered_correlation(tables):
    res = correlate_tables(*tables, center=True)
    assert res.n == 48 and res.df == 46
    assert res.r == pytest.approx(-0.767, abs=0.02)
    assert 2.1e-12 <= res.p_two_tailed <= 2.1e-8
    a = tables[0].values - tables[0].values.mean(axis=1, keepdims=True)
    b = tables[1].values - tables[1].values.mean(axis=1, keepdims=True)
    ref = sps.pearsonr(a.ravel(), b.ravel())
    assert res.r == pytest.approx(ref[0], rel=1e-12)
    assert res.p_two_tailed == pytest.approx(ref[1], rel=1e-8)


def test_uncentered_correlation(tables):
    res = correlate_tables(*tables)
    assert res.r == pytest.approx(-0.556, abs=0.02)
    assert 4.038e-7 <= res.p_two_tailed <= 4.038e-3


def test_gan_only_correlation(tables):
    res = gan_only_correlation(*tables)
    assert res.n == 36
    assert res.r == pytest.approx(-0.827, abs=0.02)


def test_single_participant_low_n(tables):
    one = [ScoreTable(t.participants[:1], t.categories, t.values[:1]) for t in tables]
    with pytest.warns(LowSampleSize):
        res = correlate_tables(*one)
    assert res.n == 4 and res.low_n
    with pytest.warns(LowSampleSize):
        res = correlate_tables(*one, categories=GAN_CATEGORIES)
    assert res.n == 3 and res.to_dict()["low_n"]


def test_mismatched_grids(tables):
    n, b = tables
    other = ScoreTable(tuple(str(i) for i in range(20, 32)), b.categories, b.values)
    with pytest.raises(GridMismatch):
        correlate_tables(n, other)
    with pytest.raises(GridMismatch):
        bootstrap_correlation(n, other, iterations=10)


# --- bootstrap -------------------------------------------------------------

def test_bootstrap_reference_tables(tables):
    res = bootstrap_correlation(*tables, iterations=10000, seed=7, center=True)
    assert res.p_value <= 0.001
    assert res.to_dict()["seed"] == 7 and res.iterations == 10000


def test_bootstrap_reproducible(tables):
    a = bootstrap_correlation(*_random_tables(3), iterations=500, seed=11)
    b = bootstrap_correlation(*_random_tables(3), iterations=500, seed=11)
    assert a == b
    c = bootstrap_correlation(*_random_tables(3), iterations=500, seed=12)
    assert c.count != a.count or c.seed != a.seed


def test_bootstrap_prefix_stable():
    """Iteration i depends only on (seed, i), so runs share their common prefix."""
    short = bootstrap_correlation(*_random_tables(4), iterations=200, seed=5)
    long = bootstrap_correlation(*_random_tables(4), iterations=400, seed=5)
    assert long.count >= short.count


def test_bootstrap_matches_loop_oracle():
    n, b = _random_tables(8, n_p=5, n_c=3)
    res = bootstrap_correlation(n, b, iterations=300, seed=2)
    p_obs = sps.pearsonr(n.values.ravel(), b.values.ravel())[1]
    count = 0
    for i in range(300):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([2, i])))
        perm = np.argsort(rng.random(b.values.shape), axis=1)
        shuffled = np.take_along_axis(b.values, perm, axis=1)
        count += sps.pearsonr(n.values.ravel(), shuffled.ravel())[1] < p_obs
    # the oracle's p-values differ from ours in the last bits; allow a boundary tie
    assert abs(res.count - count) <= 1


def test_bootstrap_constant_behaviour():
    n, b = _random_tables(1)
    flat = ScoreTable(b.participants, b.categories,
                      np.repeat(np.arange(12.0)[:, None], 4, axis=1))
    with pytest.warns(NoVariation):
        res = bootstrap_correlation(n, flat, iterations=100)
    assert res.p_value == 1.0


def test_bootstrap_null_calibration():
    ok = sum(bootstrap_correlation(*_random_tables(1000 + s), iterations=2000, seed=s).p_value
             > 0.05 for s in range(50))
    assert ok >= 45


def test_bootstrap_iterations_positive(tables):
    with pytest.raises(ValueError):
        bootstrap_correlation(*tables, iterations=0)


# --- behavioural accuracy --------------------------------------------------

def test_accuracy_examples():
    trials = [("A", i < 7) for i in range(10)] + [("B", True)] * 3
    assert behavioral_accuracy(trials) == {"A": 0.7, "B": 1.0}
    with pytest.raises(EmptyCategory):
        behavioral_accuracy(trials, categories=["A", "C"])


def test_accuracy_monte_carlo():
    rates = {"DCGAN": 0.995, "BEGAN": 0.824, "PROGAN": 0.705, "RFACE": 0.695}
    acc = behavioral_accuracy(simulate_behavioral_trials(rates, 540, seed=3))
    for c, p in rates.items():
        assert abs(acc[c] - p) <= 0.05


# --- ANOVA -----------------------------------------------------------------

def test_anova_equal_means_zero():
    g = [np.array([1.0, 2.0, 3.0]), np.array([3.0, 2.0, 1.0]), np.array([0.0, 4.0, 2.0])]
    assert channel_anova_f(g).f_values[0] == pytest.approx(0.0, abs=1e-12)


def test_anova_textbook():
    g = [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 9.0]]
    # between SS = 3 * (9 + 0 + 9) = 54 on 2 df, within SS = 6 on 6 df
    assert channel_anova_f(g).f_values[0] == pytest.approx((54 / 2) / (6 / 6))


def test_anova_matches_scipy_per_channel(rng):
    groups = {c: rng.standard_normal((n, 5)) + i * 0.3
              for i, (c, n) in enumerate([("A", 10), ("B", 12), ("C", 8), ("D", 11)])}
    fmap = channel_anova_f(groups, list("vwxyz"))
    for ch in range(5):
        ref = sps.f_oneway(*[g[:, ch] for g in groups.values()]).statistic
        assert fmap.f_values[ch] == pytest.approx(ref, rel=1e-10)
    assert fmap.as_dict()["v"] == fmap.f_values[0]


def test_anova_degenerate():
    with pytest.raises(DegenerateGroups):
        channel_anova_f([[1.0, 2.0]])
    with pytest.raises(DegenerateGroups):
        channel_anova_f([[1.0], [2.0, 3.0]])
    with pytest.raises(DegenerateGroups):
        channel_anova_f([[1.0, 1.0], [2.0, 2.0]])


def test_fmap_csv(tmp_path):
    fmap = channel_anova_f([[1.0, 2.0, 3.0], [4.0, 5.0, 7.0]], ["Pz"])
    lines = fmap.to_csv(tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "channel,f_value" and lines[1].startswith("Pz,")
