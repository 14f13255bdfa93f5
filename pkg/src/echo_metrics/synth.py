"""Synthetic comment logs with known polarization ground truth.

Each user gets a latent conspiracy propensity ``rho_star`` from a
three-part mixture: Beta(a, b) on the science side, Uniform(0.3, 0.7)
in the middle, Beta(b, a) on the conspiracy side. The number of comments
is a continuous power law rounded up. For a ``switching_fraction`` share
of users the first ``switching_length`` comments are fair coin flips
between narratives; everything else follows ``rho_star``.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from ._runtime import substream
from .ingest import CATEGORIES, PLATFORMS, Dataset, ItemStats
from .polarization import classify

START_TS = 1388534400  # 2014-01-01


@dataclass(frozen=True)
class GeneratorConfig:
    n_users: int = 1000
    platform: str = "facebook"
    mixture: tuple = (0.45, 0.10, 0.45)
    beta_params: tuple = (0.5, 8.0)
    switching_length: int = 0
    switching_fraction: float = 1.0
    activity_theta: float = 2.2
    activity_xmin: float = 8.0
    seed: int = 0
    n_items: int = 200

    def __post_init__(self):
        w = np.asarray(self.mixture, dtype=float)
        if w.shape != (3,) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"mixture must be 3 non-negative weights summing to 1, got {self.mixture}")
        a, b = self.beta_params
        if not (a > 0 and b > 0):
            raise ValueError("beta parameters must be positive")
        if self.platform not in PLATFORMS:
            raise ValueError(f"unknown platform {self.platform!r}")
        if self.n_users < 1:
            raise ValueError("n_users must be >= 1")
        if self.switching_length < 0:
            raise ValueError("switching_length must be >= 0")
        if not 0.0 <= self.switching_fraction <= 1.0:
            raise ValueError("switching_fraction must be in [0, 1]")
        if not self.activity_theta > 1:
            raise ValueError("activity_theta must be > 1")
        if not self.activity_xmin > 0:
            raise ValueError("activity_xmin must be positive")
        if self.n_items < 1:
            raise ValueError("n_items must be >= 1")


@dataclass(frozen=True)
class GroundTruth:
    rho_star: float
    label: str
    n_comments: int
    switching_length: int


def powerlaw_sample(rng, size, x_min, theta):
    """Continuous power-law draws by inverse CDF."""
    u = rng.random(size)
    return x_min * (1.0 - u) ** (-1.0 / (theta - 1.0))


def item_name(category, index):
    return f"{category[:3]}{index:05d}"


def generate(config):
    """Draw a Dataset and per-user ground truth from ``config``."""
    rng = substream(config.seed, "synth", config.platform)
    n = config.n_users
    a, b = config.beta_params

    comp = rng.choice(3, size=n, p=np.asarray(config.mixture, dtype=float))
    rho_star = np.empty(n)
    for k, draw in enumerate((
            lambda m: rng.beta(a, b, m),
            lambda m: rng.uniform(0.3, 0.7, m),
            lambda m: rng.beta(b, a, m))):
        sel = comp == k
        rho_star[sel] = draw(int(sel.sum()))

    counts = np.ceil(powerlaw_sample(rng, n, config.activity_xmin, config.activity_theta)).astype(np.int64)
    total = int(counts.sum())
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    user = np.repeat(np.arange(n), counts)
    position = np.arange(total) - np.repeat(starts, counts)

    switch_len = np.where(rng.random(n) < config.switching_fraction, config.switching_length, 0)
    p_con = np.where(position < switch_len[user], 0.5, rho_star[user])
    category = (rng.random(total) < p_con).astype(np.int8)
    item = category.astype(np.int64) * config.n_items + rng.integers(config.n_items, size=total)

    gaps = rng.integers(1, 6 * 3600, size=total)
    csum = np.cumsum(gaps)
    base = np.repeat(csum[starts] - gaps[starts], counts)
    offset = np.repeat(rng.integers(0, 365 * 86400, size=n), counts)
    timestamp = START_TS + offset + (csum - base)

    prefix = config.platform[:2]
    user_names = [f"{prefix}{i:06d}" for i in range(n)]
    item_names = [item_name(CATEGORIES[c], i) for c in (0, 1) for i in range(config.n_items)]
    dataset = Dataset(
        user_codes=user, user_names=user_names,
        item_codes=item, item_names=item_names,
        platform=np.full(total, PLATFORMS.index(config.platform), dtype=np.int8),
        category=category, timestamp=timestamp,
    )
    truth = {
        user_names[i]: GroundTruth(float(rho_star[i]), classify(rho_star[i]),
                                   int(counts[i]), int(min(switch_len[i], counts[i])))
        for i in range(n)
    }
    return dataset, truth


# action -> (log-scale baseline, spread)
_FB_ACTIONS = {"likes": (5.0, 1.0), "comments": (4.0, 1.0), "shares": (4.5, 1.0)}
_YT_ACTIONS = {"views": (9.0, 1.2), "likes": (6.0, 1.2), "comments": (4.5, 1.2)}
_ACTION_NOISE = 0.15


def generate_item_stats(config, coupling, seed=None, n_items=None):
    """Linked Facebook/YouTube item pairs sharing a latent popularity.

    Facebook actions load on a latent ``z``; YouTube actions load on
    ``coupling * z + sqrt(1 - coupling**2) * e``. Returns
    ``(facebook_items, youtube_items)``, paired by index and item id.
    """
    if not 0.0 <= coupling <= 1.0:
        raise ValueError("coupling must be in [0, 1]")
    seed = config.seed if seed is None else seed
    n = 2 * config.n_items if n_items is None else int(n_items)
    rng = substream(seed, "items")

    w_sci, _, w_con = config.mixture
    p_con = w_con / (w_sci + w_con) if w_sci + w_con > 0 else 0.5
    is_con = rng.random(n) < p_con
    z_fb = rng.standard_normal(n)
    z_yt = coupling * z_fb + math.sqrt(1.0 - coupling ** 2) * rng.standard_normal(n)

    def actions(z, spec):
        out = {}
        for name, (base, spread) in spec.items():
            lam = np.exp(base + spread * (z + _ACTION_NOISE * rng.standard_normal(n)))
            out[name] = rng.poisson(lam)
        return out

    fb = actions(z_fb, _FB_ACTIONS)
    yt = actions(z_yt, _YT_ACTIONS)
    fb_items, yt_items = [], []
    for i in range(n):
        cat = "conspiracy" if is_con[i] else "science"
        iid = item_name(cat, i)
        fb_items.append(ItemStats(iid, "facebook", cat, comments=int(fb["comments"][i]),
                                  likes=int(fb["likes"][i]), shares=int(fb["shares"][i])))
        yt_items.append(ItemStats(iid, "youtube", cat, comments=int(yt["comments"][i]),
                                  likes=int(yt["likes"][i]), views=int(yt["views"][i])))
    return fb_items, yt_items


def write_ground_truth_csv(truth, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("user_id", "rho_star", "class", "N_u", "L"))
        for uid, g in truth.items():
            w.writerow([uid, repr(g.rho_star), g.label, g.n_comments, g.switching_length])


# Bimodal population dominated by light commenters, as on real platforms
# where most users leave one or two comments.
BIMODAL_POPULATION = GeneratorConfig(
    n_users=100_000, mixture=(0.45, 0.10, 0.45), beta_params=(0.5, 8.0),
    activity_theta=2.2, activity_xmin=0.5,
)

UNIMODAL_POPULATION = GeneratorConfig(
    n_users=100_000, mixture=(0.0, 1.0, 0.0), activity_theta=2.2, activity_xmin=8.0,
)

# Heavy commenters; half of them explore both narratives for 30 comments first.
CLASSIFIER_COHORT = GeneratorConfig(
    n_users=3000, mixture=(0.35, 0.30, 0.35), beta_params=(0.5, 20.0),
    switching_length=30, switching_fraction=0.5,
    activity_theta=2.5, activity_xmin=100.0,
)
