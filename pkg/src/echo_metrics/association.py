"""Spearman correlation matrices of item actions and the Mantel test."""

import csv
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from ._runtime import substream

PLATFORM_PREFIX = {"fb": "facebook", "yt": "youtube"}
ACTION_FIELDS = {
    "facebook": ("likes", "comments", "shares"),
    "youtube": ("views", "likes", "comments"),
}


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    labels: tuple
    values: np.ndarray
    n_items: int = 0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        d = len(self.labels)
        if v.shape != (d, d):
            raise ValueError(f"matrix shape {v.shape} does not match {d} labels")
        if not np.allclose(v, v.T, rtol=0, atol=1e-12):
            raise ValueError("matrix is not symmetric")
        v = (v + v.T) / 2
        np.fill_diagonal(v, 1.0)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "labels", tuple(self.labels))


@dataclass(frozen=True)
class MantelResult:
    r: float
    p_value: float
    replicates: int
    seed: int

    def to_dict(self):
        return {"r": self.r, "p_value": self.p_value,
                "replicates": self.replicates, "seed": self.seed}


def _pearson(a, b):
    a = a - a.mean()
    b = b - b.mean()
    return float(np.dot(a, b) / np.sqrt(np.dot(a, a) * np.dot(b, b)))


def spearman(x, y):
    """Spearman's rho: Pearson correlation of average ranks."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-d with equal length")
    if x.size < 3:
        raise ValueError("need at least 3 observations")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise ValueError("constant input: correlation undefined")
    r = _pearson(rankdata(x), rankdata(y))
    return min(1.0, max(-1.0, r))


def _action_column(items_by_key, item_ids, action):
    prefix, _, field = action.partition("_")
    platform = PLATFORM_PREFIX.get(prefix)
    if platform is None or field not in ACTION_FIELDS[platform]:
        raise ValueError(f"undefined action {action!r}")
    return np.array([getattr(items_by_key[(platform, i)], field) for i in item_ids], dtype=float)


def correlation_matrix(items, actions, category=None):
    """Pairwise Spearman matrix over items for the named actions.

    Action names are ``<fb|yt>_<field>``, e.g. ``fb_shares`` or
    ``yt_views``. A Facebook post and the YouTube video it links share an
    item id; when actions span both platforms, items lacking either side
    are dropped. ``category`` restricts to one narrative.
    """
    actions = list(actions)
    if len(actions) < 2:
        raise ValueError("need at least two actions")
    if isinstance(items, dict):
        items = items.values()
    by_key = {}
    for it in items:
        if category is None or it.category == category:
            by_key[(it.platform, it.item_id)] = it

    platforms = set()
    for a in actions:
        prefix = a.partition("_")[0]
        if prefix not in PLATFORM_PREFIX:
            raise ValueError(f"undefined action {a!r}")
        platforms.add(PLATFORM_PREFIX[prefix])
    ids_per_platform = [{i for p, i in by_key if p == plat} for plat in sorted(platforms)]
    ids = sorted(set.intersection(*ids_per_platform))
    if len(ids) < 3:
        raise ValueError(f"only {len(ids)} usable items; need at least 3")

    cols = [_action_column(by_key, ids, a) for a in actions]
    d = len(actions)
    m = np.eye(d)
    for i in range(d):
        for j in range(i + 1, d):
            m[i, j] = m[j, i] = spearman(cols[i], cols[j])
    return CorrelationMatrix(tuple(actions), m, n_items=len(ids))


def _upper(values):
    iu, ju = np.triu_indices(values.shape[0], k=1)
    return values[iu, ju]


def mantel_test(a, b, replicates=10_000, seed=0):
    """One-tailed Mantel test of association between two matrices.

    The statistic is the Pearson correlation of upper-triangle entries.
    The null distribution applies random simultaneous row/column
    permutations to ``b``; ``p = (1 + #{r_perm >= r}) / (replicates + 1)``.
    """
    va = np.asarray(getattr(a, "values", a), dtype=float)
    vb = np.asarray(getattr(b, "values", b), dtype=float)
    if va.shape != vb.shape or va.ndim != 2 or va.shape[0] != va.shape[1]:
        raise ValueError(f"dimension mismatch: {va.shape} vs {vb.shape}")
    if hasattr(a, "labels") and hasattr(b, "labels") and a.labels != b.labels:
        raise ValueError("matrices have different label order")
    if va.shape[0] < 3:
        raise ValueError("need at least 3x3 matrices")
    if replicates < 99:
        raise ValueError("need at least 99 replicates")

    d = va.shape[0]
    xa = _upper(va)
    xa = xa - xa.mean()
    xa /= np.linalg.norm(xa)
    xb = _upper(vb)
    if np.ptp(xa) == 0 or np.ptp(xb) == 0:
        raise ValueError("constant off-diagonal entries: correlation undefined")
    r_obs = float(np.dot(xa, (xb - xb.mean()) / np.linalg.norm(xb - xb.mean())))

    rng = substream(seed, "mantel")
    perms = rng.permuted(np.tile(np.arange(d), (replicates, 1)), axis=1)
    iu, ju = np.triu_indices(d, k=1)
    yb = vb[perms[:, iu], perms[:, ju]]
    yb = yb - yb.mean(axis=1, keepdims=True)
    r_perm = (yb @ xa) / np.linalg.norm(yb, axis=1)
    # permutations that leave the statistic unchanged should tie, not lose to rounding
    exceed = int(np.count_nonzero(r_perm >= r_obs - 1e-12))
    return MantelResult(
        r=max(-1.0, min(1.0, r_obs)),
        p_value=(1 + exceed) / (replicates + 1),
        replicates=int(replicates),
        seed=int(seed),
    )


def write_matrix_csv(matrix, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(matrix.labels)
        for row in matrix.values:
            w.writerow([repr(float(v)) for v in row])


def read_matrix_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty matrix file")
    labels = tuple(rows[0])
    values = np.array([[float(v) for v in r] for r in rows[1:]])
    return CorrelationMatrix(labels, values)
