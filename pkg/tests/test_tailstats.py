import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from echo_metrics.synth import powerlaw_sample
from echo_metrics.tailstats import (
    PowerLawFit, ccdf, exponent_difference, fit_powerlaw, hdi, posterior_exponent,
    powerlaw_loglik,
)


def _sample(seed, n, theta, x_min=1.0):
    return powerlaw_sample(np.random.default_rng(seed), n, x_min, theta)


# -- ccdf ------------------------------------------------------------------------

def test_ccdf_hand_count():
    x, p = ccdf([1, 2, 3])
    assert x.tolist() == [1, 2, 3]
    np.testing.assert_allclose(p, [1.0, 2 / 3, 1 / 3], atol=1e-15)


def test_ccdf_constant():
    x, p = ccdf([4, 4, 4])
    assert x.tolist() == [4] and p.tolist() == [1.0]


def test_ccdf_errors():
    with pytest.raises(ValueError):
        ccdf([])
    with pytest.raises(ValueError):
        ccdf([1, 0, 3])


def test_ccdf_matches_brute_force(rng):
    for _ in range(100):
        vals = rng.integers(1, 30, size=int(rng.integers(1, 80)))
        x, p = ccdf(vals)
        brute = [sum(v >= xi for v in vals) / len(vals) for xi in x]
        np.testing.assert_allclose(p, brute, rtol=0, atol=1e-15)
        assert np.all(np.diff(p) < 0) and p[0] == 1.0 and p[-1] > 0


def test_ccdf_loglog_slope():
    x, p = ccdf(_sample(1, 100_000, 2.0))
    keep = (p > 1e-3)
    slope = np.polyfit(np.log(x[keep]), np.log(p[keep]), 1)[0]
    assert slope == pytest.approx(-1.0, abs=0.05)


@settings(max_examples=80)
@given(st.lists(st.floats(1e-3, 1e6), min_size=1, max_size=100))
def test_ccdf_bounded_monotone(vals):
    _, p = ccdf(vals)
    assert np.all(p <= 1) and np.all(p > 0) and np.all(np.diff(p) <= 0)


# -- fit -----------------------------------------------------------------------

def test_fit_closed_form():
    e = math.e
    vals = [e, e ** 2] + [e] * 0
    fit = fit_powerlaw(vals, x_min=1.0, min_tail=2)
    assert fit.theta_hat == pytest.approx(1 + 2 / 3, abs=1e-14)
    assert fit.sigma_hat == pytest.approx((2 / 3) / math.sqrt(2), abs=1e-14)


def test_fit_divergent_and_short_tail():
    with pytest.raises(ValueError, match="diverges"):
        fit_powerlaw([5.0] * 20, x_min=5.0)
    with pytest.raises(ValueError, match="need 10"):
        fit_powerlaw(np.arange(1, 10, dtype=float), x_min=1.0)


def test_fit_recovers_exponent():
    fit = fit_powerlaw(_sample(3, 100_000, 2.5, 10.0), x_min=10.0)
    assert abs(fit.theta_hat - 2.5) < 0.02
    assert fit.sigma_hat == pytest.approx(1.5 / math.sqrt(100_000), rel=0.01)


def test_fit_matches_grid_search():
    grid = np.arange(1.0001, 6.0 + 1e-12, 1e-4)
    for seed in range(20):
        theta = 1.5 + 0.2 * seed
        x = _sample(100 + seed, 500, theta, 2.0)
        fit = fit_powerlaw(x, x_min=2.0)
        s = float(np.sum(np.log(x / 2.0)))
        ll = x.size * (np.log(grid - 1) - np.log(2.0)) - grid * s
        assert abs(grid[np.argmax(ll)] - fit.theta_hat) < 2e-4


def test_auto_xmin_finds_cutoff():
    rng = np.random.default_rng(9)
    body = rng.uniform(1, 20, 5000)
    tail = powerlaw_sample(rng, 5000, 20.0, 2.5)
    fit = fit_powerlaw(np.concatenate([body, tail]))
    assert 15 <= fit.x_min <= 30
    assert abs(fit.theta_hat - 2.5) < 0.1


def test_auto_xmin_matches_exhaustive_scan():
    x = np.sort(np.ceil(_sample(4, 800, 2.3, 3.0)))
    auto = fit_powerlaw(x)
    best = None
    for xm in np.unique(x):
        try:
            f = fit_powerlaw(x, x_min=xm)
        except ValueError:
            continue
        if best is None or f.ks_distance < best.ks_distance:
            best = f
    assert (auto.x_min, auto.n_tail) == (best.x_min, best.n_tail)
    assert auto.theta_hat == pytest.approx(best.theta_hat, rel=1e-12)


def test_fit_report_fields():
    fit = fit_powerlaw(_sample(5, 100, 2.0), x_min=1.0)
    assert set(fit.to_dict()) == {"x_min", "theta_hat", "sigma_hat", "n_tail"}
    assert all(type(v) in (int, float) for v in fit.to_dict().values())


# -- posterior ---------------------------------------------------------------------

@pytest.fixture(scope="module")
def big_chain():
    x = _sample(11, 100_000, 2.2)
    fit = fit_powerlaw(x, x_min=1.0)
    return x, fit, posterior_exponent(x, fit, seed=3)


def test_posterior_large_sample(big_chain):
    _, fit, post = big_chain
    assert abs(post.mean - 2.2) < 0.02
    assert fit.sigma_hat / 2 <= post.sd <= 2 * fit.sigma_hat
    assert post.mean == pytest.approx(fit.theta_hat, abs=0.3 * fit.sigma_hat)


def test_posterior_sd_reflects_doubled_information(big_chain):
    # the prior is centred on the same data, so the posterior is about sqrt(2) narrower
    _, fit, post = big_chain
    assert post.sd == pytest.approx(fit.sigma_hat / math.sqrt(2), rel=0.1)


def test_posterior_shape_and_acceptance(big_chain):
    _, _, post = big_chain
    assert post.draws.size == post.iterations - post.burn_in == 45_000
    assert 0.15 <= post.acceptance_rate <= 0.60
    assert not post.flagged


def test_posterior_bit_identical():
    x = _sample(12, 2000, 2.2)
    fit = fit_powerlaw(x, x_min=1.0)
    a = posterior_exponent(x, fit, iterations=5000, burn_in=500, seed=4)
    b = posterior_exponent(x, fit, iterations=5000, burn_in=500, seed=4)
    c = posterior_exponent(x, fit, iterations=5000, burn_in=500, seed=5)
    assert a.draws.tobytes() == b.draws.tobytes()
    assert a.draws.tobytes() != c.draws.tobytes()


def test_posterior_errors():
    x = _sample(13, 200, 2.2)
    fit = fit_powerlaw(x, x_min=1.0)
    with pytest.raises(ValueError):
        posterior_exponent(x, fit, iterations=100, burn_in=100)
    with pytest.raises(ValueError, match="n_tail"):
        posterior_exponent(x[:150], fit, iterations=200, burn_in=10)
    bad = PowerLawFit(fit.x_min, fit.theta_hat, 0.0, fit.n_tail)
    with pytest.raises(ValueError, match="proposal"):
        posterior_exponent(x, bad, iterations=200, burn_in=10)


def test_posterior_never_below_one():
    # tiny sample with a wide posterior that reaches towards theta = 1
    x = _sample(14, 10, 1.3)
    fit = fit_powerlaw(x, x_min=1.0)
    post = posterior_exponent(x, fit, iterations=20_000, burn_in=2000)
    assert post.draws.min() > 1.0


def test_loglik_reference():
    assert powerlaw_loglik(1.0, 5, 1.0, 1.0) == -math.inf
    assert powerlaw_loglik(2.0, 3, 1.5, 2.0) == pytest.approx(3 * (0 - math.log(2)) - 3.0)


# -- hdi ---------------------------------------------------------------------------

def hdi_brute(samples, mass):
    s = sorted(samples)
    k = math.ceil(mass * len(s) - 1e-9)
    best = None
    for i in range(len(s) - k + 1):
        w = s[i + k - 1] - s[i]
        if best is None or w < best[0]:
            best = (w, s[i], s[i + k - 1])
    return best[1], best[2]


def test_hdi_matches_brute_force(rng):
    for _ in range(50):
        x = rng.gamma(2.0, size=int(rng.integers(10, 300)))
        mass = float(rng.choice([0.5, 0.8, 0.9, 0.95]))
        assert hdi(x, mass) == hdi_brute(x, mass)


def test_hdi_normal():
    x = np.random.default_rng(0).standard_normal(200_000)
    lo, hi = hdi(x, 0.9)
    assert lo == pytest.approx(-1.645, abs=0.02) and hi == pytest.approx(1.645, abs=0.02)


@settings(max_examples=60)
@given(st.lists(st.floats(-100, 100), min_size=5, max_size=60), st.floats(0.05, 0.95))
def test_hdi_covers_required_mass(vals, mass):
    lo, hi = hdi(vals, mass)
    assert lo <= hi
    inside = sum(lo <= v <= hi for v in vals)
    assert inside >= math.ceil(mass * len(vals) - 1e-9)


def test_difference_of_identical_chains():
    d = np.linspace(2, 3, 500)
    rep = exponent_difference(d, d)
    assert (rep.lower, rep.upper, rep.contains_zero) == (0.0, 0.0, True)


def test_difference_truncates_and_checks_size():
    rep = exponent_difference(np.full(300, 2.0), np.full(200, 2.5))
    assert rep.lower == rep.upper == -0.5 and not rep.contains_zero
    with pytest.raises(ValueError):
        exponent_difference(np.ones(99), np.ones(500))
