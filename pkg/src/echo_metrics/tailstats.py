"""Empirical CCDFs, power-law tail fits and Bayesian exponent comparison.

The tail model is the continuous power law above ``x_min``::

    p(x | theta) = (theta - 1) / x_min * (x / x_min) ** -theta

Exponents are compared by drawing from the posterior of each exponent
with Metropolis-Hastings, using a Normal prior centred on the maximum
likelihood estimate, and summarising the paired differences with the
highest density interval.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from ._runtime import substream

MIN_TAIL = 10
MIN_DRAWS = 100


@dataclass(frozen=True)
class PowerLawFit:
    x_min: float
    theta_hat: float
    sigma_hat: float
    n_tail: int
    ks_distance: float = float("nan")

    def to_dict(self):
        return {
            "x_min": self.x_min,
            "theta_hat": self.theta_hat,
            "sigma_hat": self.sigma_hat,
            "n_tail": self.n_tail,
        }


@dataclass(frozen=True, eq=False)
class PosteriorDraws:
    draws: np.ndarray
    iterations: int
    burn_in: int
    acceptance_rate: float
    seed: int
    step: float
    label: str = "chain"

    @property
    def flagged(self):
        """True when the post-burn-in acceptance rate is implausible."""
        return not 0.05 <= self.acceptance_rate <= 0.95

    @property
    def mean(self):
        return float(self.draws.mean())

    @property
    def sd(self):
        return float(self.draws.std(ddof=1))

    def summary(self):
        lo, hi = hdi(self.draws, 0.90)
        return {
            "label": self.label,
            "iterations": self.iterations,
            "burn_in": self.burn_in,
            "seed": self.seed,
            "acceptance_rate": self.acceptance_rate,
            "flagged": self.flagged,
            "step": self.step,
            "mean": self.mean,
            "sd": self.sd,
            "hdi90": [lo, hi],
        }


@dataclass(frozen=True)
class HdiReport:
    lower: float
    upper: float
    mass: float
    contains_zero: bool

    def to_dict(self):
        return {"lower": self.lower, "upper": self.upper, "mass": self.mass,
                "contains_zero": self.contains_zero}


def _positive_array(values):
    x = np.asarray(values, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("empty input")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite values")
    if np.any(x <= 0):
        raise ValueError("values must be positive")
    return x


def ccdf(values):
    """Empirical CCDF, ``P(X >= x)`` at each distinct ``x``.

    Returns ``(x, p)`` with ``x`` ascending and ``p[0] == 1``.
    """
    x = np.sort(_positive_array(values))
    uniq, first = np.unique(x, return_index=True)
    return uniq, (x.size - first) / x.size


def _mle(tail_logs_sum, n_tail):
    theta = 1.0 + n_tail / float(tail_logs_sum)
    return theta, (theta - 1.0) / math.sqrt(n_tail)


def _ks_distance(tail_sorted, x_min, theta):
    n = tail_sorted.size
    model = 1.0 - (tail_sorted / x_min) ** (1.0 - theta)
    i = np.arange(n)
    return float(max(np.max((i + 1) / n - model), np.max(model - i / n)))


def fit_powerlaw(values, x_min="auto", min_tail=MIN_TAIL, max_candidates=2000):
    """Maximum likelihood power-law fit of the tail ``x >= x_min``.

    ``theta_hat = 1 + n / sum(log(x / x_min))`` and
    ``sigma_hat = (theta_hat - 1) / sqrt(n)``.

    With ``x_min="auto"`` every distinct value leaving at least
    ``min_tail`` points above it is tried and the one minimising the
    Kolmogorov-Smirnov distance between tail and fitted CDF wins. When
    there are more than ``max_candidates`` such values an evenly spaced
    subset (always including the smallest) is scanned instead.
    """
    x = np.sort(_positive_array(values))
    if x_min is None or (isinstance(x_min, str) and x_min == "auto"):
        return _fit_auto(x, min_tail, max_candidates)

    x_min = float(x_min)
    if not x_min > 0:
        raise ValueError("x_min must be positive")
    tail = x[np.searchsorted(x, x_min, side="left"):]
    if tail.size < min_tail:
        raise ValueError(f"only {tail.size} observations >= x_min={x_min:g}; need {min_tail}")
    s = float(np.sum(np.log(tail / x_min)))
    if s <= 0:
        raise ValueError("all tail values equal x_min: exponent diverges")
    theta, sigma = _mle(s, tail.size)
    return PowerLawFit(x_min, theta, sigma, int(tail.size), _ks_distance(tail, x_min, theta))


def _fit_auto(x, min_tail, max_candidates):
    n = x.size
    uniq, first = np.unique(x, return_index=True)
    ok = (n - first) >= min_tail
    # the largest value alone would leave a degenerate tail
    ok &= uniq < x[-1]
    cand_idx = np.flatnonzero(ok)
    if cand_idx.size == 0:
        raise ValueError(f"no x_min leaves {min_tail} non-degenerate tail points")
    if max_candidates and cand_idx.size > max_candidates:
        pick = np.unique(np.linspace(0, cand_idx.size - 1, max_candidates).round().astype(int))
        cand_idx = cand_idx[pick]

    logs = np.log(x)
    suffix = np.concatenate((np.cumsum(logs[::-1])[::-1], [0.0]))
    best = None
    for j in cand_idx:
        xm, start = float(uniq[j]), int(first[j])
        n_tail = n - start
        s = suffix[start] - n_tail * math.log(xm)
        if s <= 0:
            continue
        theta, sigma = _mle(s, n_tail)
        d = _ks_distance(x[start:], xm, theta)
        if best is None or d < best.ks_distance:
            best = PowerLawFit(xm, theta, sigma, int(n_tail), d)
    if best is None:
        raise ValueError("no admissible x_min")
    return best


def powerlaw_loglik(theta, n_tail, log_ratio_sum, x_min):
    """Log-likelihood of a continuous power-law tail from sufficient statistics."""
    if theta <= 1:
        return -math.inf
    return n_tail * (math.log(theta - 1) - math.log(x_min)) - theta * log_ratio_sum


def posterior_exponent(values, fit, iterations=50_000, burn_in=5_000, seed=0,
                       label="chain", target_accept=0.35, adapt_every=100):
    """Metropolis-Hastings draws from ``p(theta | x)``.

    The prior is Normal(``fit.theta_hat``, ``fit.sigma_hat``). Proposals
    are a Gaussian random walk starting with step ``fit.sigma_hat``; the
    step is tuned towards ``target_accept`` during burn-in and frozen
    afterwards. Proposals with ``theta <= 1`` are rejected outright.

    The random stream depends on ``(seed, label)`` only.
    """
    if iterations <= burn_in:
        raise ValueError("iterations must exceed burn_in")
    if burn_in < 0:
        raise ValueError("burn_in must be >= 0")
    x = _positive_array(values)
    tail = x[x >= fit.x_min]
    if tail.size != fit.n_tail:
        raise ValueError(f"fit has n_tail={fit.n_tail} but sample has {tail.size} points >= x_min")
    step = float(fit.sigma_hat)
    if not (math.isfinite(step) and step > 0):
        raise ValueError(f"degenerate proposal scale {step!r}")

    n_tail = int(tail.size)
    log_sum = float(np.sum(np.log(tail / fit.x_min)))
    mu, tau = float(fit.theta_hat), float(fit.sigma_hat)

    def log_post(t):
        ll = powerlaw_loglik(t, n_tail, log_sum, fit.x_min)
        return ll - 0.5 * ((t - mu) / tau) ** 2

    rng = substream(seed, label)
    z = rng.standard_normal(iterations).tolist()
    log_u = np.log(rng.random(iterations)).tolist()

    theta = mu
    lp = log_post(theta)
    if not math.isfinite(lp):
        raise ValueError("non-finite log-likelihood at the starting point")

    chain = np.empty(iterations)
    accepted = 0
    window = 0
    for i in range(iterations):
        prop = theta + step * z[i]
        if prop > 1.0:
            lp_prop = log_post(prop)
            if lp_prop - lp >= log_u[i]:
                theta, lp = prop, lp_prop
                if i >= burn_in:
                    accepted += 1
                else:
                    window += 1
        chain[i] = theta
        if i < burn_in and (i + 1) % adapt_every == 0:
            step *= math.exp(2.0 * (window / adapt_every - target_accept))
            window = 0

    draws = chain[burn_in:]
    draws.setflags(write=False)
    return PosteriorDraws(
        draws=draws, iterations=iterations, burn_in=burn_in,
        acceptance_rate=accepted / (iterations - burn_in),
        seed=seed, step=step, label=label,
    )


def hdi(samples, mass=0.90):
    """Shortest interval covering ``ceil(mass * n)`` of the sorted samples."""
    s = np.sort(np.asarray(samples, dtype=float))
    n = s.size
    if not 0 < mass < 1:
        raise ValueError("mass must be in (0, 1)")
    k = math.ceil(round(mass * n, 9))
    if k < 1 or n == 0:
        raise ValueError("too few samples")
    widths = s[k - 1:] - s[:n - k + 1]
    i = int(np.argmin(widths))
    return float(s[i]), float(s[i + k - 1])


def exponent_difference(a, b, mass=0.90):
    """HDI of ``theta_a - theta_b`` from two independent chains.

    Draws are paired element-wise after truncating to the shorter chain.
    """
    da, db = np.asarray(getattr(a, "draws", a)), np.asarray(getattr(b, "draws", b))
    if min(da.size, db.size) < MIN_DRAWS:
        raise ValueError(f"need at least {MIN_DRAWS} draws per chain")
    m = min(da.size, db.size)
    lo, hi = hdi(da[:m] - db[:m], mass)
    return HdiReport(lower=lo, upper=hi, mass=mass, contains_zero=bool(lo <= 0.0 <= hi))


def write_ccdf_csv(x, p, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("x", "ccdf"))
        for xi, pi in zip(x, p):
            w.writerow([repr(float(xi)), repr(float(pi))])


def write_chain_csv(post, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("iteration", "theta"))
        for k, t in enumerate(post.draws):
            w.writerow([post.burn_in + k, repr(float(t))])
