"""Per-user polarization, polarization trajectories and bimodality."""

import csv
import logging
from dataclasses import dataclass

import numpy as np

from . import CLASSES
from .ingest import PLATFORMS

log = logging.getLogger(__name__)

SCIENCE_THRESHOLD = 0.05
CONSPIRACY_THRESHOLD = 0.95
BC_CRITICAL = 5 / 9

CONSPIRACY, NOT_POLARIZED, SCIENCE = CLASSES


def classify(rho):
    """Label a polarization value with the strict 0.05 / 0.95 rule."""
    if rho > CONSPIRACY_THRESHOLD:
        return CONSPIRACY
    if rho < SCIENCE_THRESHOLD:
        return SCIENCE
    return NOT_POLARIZED


@dataclass(frozen=True, eq=False)
class UserRecord:
    user_id: str
    platform: str
    s: int
    c: int
    rho: float
    trajectory: np.ndarray
    label: str

    @property
    def n_comments(self):
        return self.s + self.c


@dataclass(frozen=True)
class BimodalityReport:
    bc: float
    skewness: float
    excess_kurtosis: float
    n: int
    is_bimodal: bool

    def to_dict(self):
        return {
            "bc": self.bc,
            "skewness": self.skewness,
            "excess_kurtosis": self.excess_kurtosis,
            "n": self.n,
            "is_bimodal": self.is_bimodal,
        }


def user_polarization(dataset, min_comments=1):
    """One :class:`UserRecord` per (user, platform) with enough comments.

    Every comment counts, including repeats on the same item. The
    trajectory holds the conspiracy fraction after each of the user's
    comments in time order, so ``trajectory[-1] == rho``.
    """
    if min_comments < 1:
        raise ValueError("min_comments must be >= 1")
    if not len(dataset):
        return []

    key = dataset.user_codes * 2 + dataset.platform
    order = np.lexsort((np.arange(len(dataset)), dataset.timestamp, key))
    key_sorted = key[order]
    cat = dataset.category[order].astype(np.int64)
    starts = np.concatenate(([0], np.flatnonzero(np.diff(key_sorted)) + 1))
    ends = np.append(starts[1:], len(order))

    # running conspiracy count per group
    csum = np.cumsum(cat)
    offset = np.repeat(np.concatenate(([0], csum[starts[1:] - 1])), ends - starts)
    within = csum - offset
    position = np.arange(len(order)) - np.repeat(starts, ends - starts) + 1
    traj = within / position
    traj.setflags(write=False)

    records = []
    skipped = 0
    for a, b in zip(starts, ends):
        n = int(b - a)
        if n < min_comments:
            skipped += 1
            continue
        k = int(key_sorted[a])
        c = int(within[b - 1])
        rho = c / n
        records.append(UserRecord(
            user_id=dataset.user_names[k // 2],
            platform=PLATFORMS[k % 2],
            s=n - c,
            c=c,
            rho=rho,
            trajectory=traj[a:b],
            label=classify(rho),
        ))
    if skipped:
        log.info("excluded %d users with fewer than %d comments", skipped, min_comments)
    return records


def _rho_values(records):
    vals = [r.rho if isinstance(r, UserRecord) else r for r in records]
    return np.asarray(vals, dtype=float)


def polarization_density(records, bins=50):
    """Histogram density of polarization on [0, 1].

    Accepts UserRecords or raw polarization values. Returns
    ``(bin_centers, density)``; ``density.sum() * (1 / bins) == 1``.
    """
    rho = _rho_values(records)
    if rho.size == 0:
        raise ValueError("no records")
    if bins < 2:
        raise ValueError("need at least 2 bins")
    density, edges = np.histogram(rho, bins=bins, range=(0.0, 1.0), density=True)
    return (edges[:-1] + edges[1:]) / 2, density


def bimodality_coefficient(values):
    """Bimodality coefficient with sample-size corrected moments.

    Uses the bias-corrected skewness ``G1 = g1 * sqrt(n(n-1)) / (n-2)`` and
    excess kurtosis ``G2 = ((n+1) g2 + 6)(n-1) / ((n-2)(n-3))``, where g1
    and g2 are the plain moment ratios. Values above 5/9 suggest
    bimodality.
    """
    x = _rho_values(values)
    n = x.size
    if n < 4:
        raise ValueError(f"bimodality coefficient needs n >= 4, got {n}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite values")
    d = x - x.mean()
    m2 = np.mean(d ** 2)
    if m2 == 0 or np.ptp(x) == 0:
        raise ValueError("zero variance: moments undefined")
    g1 = np.mean(d ** 3) / m2 ** 1.5
    g2 = np.mean(d ** 4) / m2 ** 2 - 3.0
    skew = g1 * np.sqrt(n * (n - 1)) / (n - 2)
    kurt = ((n + 1) * g2 + 6) * (n - 1) / ((n - 2) * (n - 3))
    bc = (skew ** 2 + 1) / (kurt + 3 * (n - 1) ** 2 / ((n - 2) * (n - 3)))
    return BimodalityReport(
        bc=float(bc), skewness=float(skew), excess_kurtosis=float(kurt),
        n=int(n), is_bimodal=bool(bc > BC_CRITICAL),
    )


def polarized_fraction(records):
    if not records:
        raise ValueError("no records")
    return sum(r.label != NOT_POLARIZED for r in records) / len(records)


USERS_HEADER = ("user_id", "platform", "s", "c", "rho", "label")


def write_users_csv(records, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(USERS_HEADER)
        for r in records:
            w.writerow([r.user_id, r.platform, r.s, r.c, repr(r.rho), r.label])


def write_density_csv(centers, density, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("bin_center", "density"))
        for x, d in zip(centers, density):
            w.writerow([repr(float(x)), repr(float(d))])
