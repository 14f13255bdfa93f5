"""Multinomial logistic early-warning classifier of user polarization.

Classes are indexed as in :data:`echo_metrics.CLASSES`
(conspiracy, not polarized, science). The model for ``J`` classes with
baseline ``J0`` is::

    eta_j = alpha_j + x @ beta_j    (j != J0),   eta_J0 = 0
    pi_j  = exp(eta_j) / sum_k exp(eta_k)

Parameters are fitted by Newton's method on the ridge-penalised
log-likelihood.
"""

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from . import CLASSES
from ._runtime import map_ordered, substream

log = logging.getLogger(__name__)

DEFAULT_RIDGE = 1e-6
MAX_NEWTON = 200
GRAD_TOL = 1e-8
MEASURES = ("precision", "recall", "accuracy")


@dataclass(frozen=True, eq=False)
class MultinomialModel:
    n_classes: int
    baseline: int
    alphas: np.ndarray  # (J-1,)
    betas: np.ndarray  # (J-1, p)
    ridge: float = DEFAULT_RIDGE
    feature_spec: str = "rho_n"
    converged: bool = True
    grad_norm: float = 0.0
    iterations: int = 0
    trace: tuple = ()  # penalised log-likelihood after each accepted step

    @property
    def n_features(self):
        return self.betas.shape[1]

    def to_dict(self):
        return {
            "baseline": self.baseline,
            "classes": list(CLASSES[:self.n_classes]) if self.n_classes == len(CLASSES) else self.n_classes,
            "alphas": [float(a) for a in self.alphas],
            "betas": [[float(b) for b in row] for row in self.betas],
            "feature_spec": self.feature_spec,
            "ridge": self.ridge,
        }


@dataclass(frozen=True, eq=False)
class ConfusionStats:
    tp: np.ndarray
    tn: np.ndarray
    fp: np.ndarray
    fn: np.ndarray

    @property
    def n_classes(self):
        return len(self.tp)

    @staticmethod
    def _ratio(num, den):
        # 0/0 (class never predicted, or absent) is reported as 0
        out = np.zeros(len(num))
        ok = den > 0
        out[ok] = num[ok] / den[ok]
        return out

    @property
    def precision(self):
        return self._ratio(self.tp, self.tp + self.fp)

    @property
    def recall(self):
        return self._ratio(self.tp, self.tp + self.fn)

    @property
    def accuracy(self):
        return (self.tp + self.tn) / (self.tp + self.tn + self.fp + self.fn)

    def table(self):
        """(J, 3) array of precision, recall, accuracy."""
        return np.column_stack([self.precision, self.recall, self.accuracy])

    def to_dict(self, names=CLASSES):
        out = {}
        for i in range(self.n_classes):
            out[names[i]] = {
                "precision": float(self.precision[i]),
                "recall": float(self.recall[i]),
                "accuracy": float(self.accuracy[i]),
                "tp": int(self.tp[i]), "tn": int(self.tn[i]),
                "fp": int(self.fp[i]), "fn": int(self.fn[i]),
            }
        return out


@dataclass(frozen=True, eq=False)
class CvSummary:
    mean: np.ndarray  # (J, 3)
    sd: np.ndarray
    iterations: int
    train_size: int
    test_size: int
    seed: int
    resamples: int = 0
    per_iteration: np.ndarray = field(default=None, repr=False)

    def to_dict(self, names=CLASSES):
        cells = {}
        for i in range(self.mean.shape[0]):
            cells[names[i]] = {
                m: {"mean": float(self.mean[i, k]), "sd": float(self.sd[i, k])}
                for k, m in enumerate(MEASURES)
            }
        return {
            "iterations": self.iterations, "train_size": self.train_size,
            "test_size": self.test_size, "seed": self.seed,
            "resamples": self.resamples, "classes": cells,
        }


# -- likelihood ---------------------------------------------------------------

def _design(features):
    x = np.asarray(features, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite feature")
    return np.hstack([np.ones((x.shape[0], 1)), x])


def _one_hot(labels, n_classes):
    y = np.asarray(labels, dtype=int)
    if y.min() < 0 or y.max() >= n_classes:
        raise ValueError("label out of range")
    out = np.zeros((y.size, n_classes))
    out[np.arange(y.size), y] = 1.0
    return out


def _unpack(w, n_classes, n_cols):
    return np.asarray(w, dtype=float).reshape(n_classes - 1, n_cols)


def _probs(coef, X, baseline):
    eta = X @ coef.T  # (n, J-1)
    eta = np.insert(eta, baseline, 0.0, axis=1)
    eta -= eta.max(axis=1, keepdims=True)
    p = np.exp(eta)
    return p / p.sum(axis=1, keepdims=True)


def penalized_loglik(w, X, Y, baseline, ridge):
    """Multinomial log-likelihood minus ``ridge * |w|^2 / 2``.

    ``w`` is the flat parameter vector: for each non-baseline class in
    order, its intercept then its slopes. ``X`` includes the intercept
    column.
    """
    J = Y.shape[1]
    coef = _unpack(w, J, X.shape[1])
    eta = np.insert(X @ coef.T, baseline, 0.0, axis=1)
    mx = eta.max(axis=1, keepdims=True)
    lse = (mx[:, 0] + np.log(np.exp(eta - mx).sum(axis=1)))
    return float(np.sum(Y * eta) - lse.sum() - 0.5 * ridge * np.dot(w, w))


def gradient(w, X, Y, baseline, ridge):
    J = Y.shape[1]
    coef = _unpack(w, J, X.shape[1])
    P = _probs(coef, X, baseline)
    keep = [j for j in range(J) if j != baseline]
    R = (Y - P)[:, keep]
    return (R.T @ X).ravel() - ridge * np.asarray(w, dtype=float)


def hessian(w, X, Y, baseline, ridge):
    J = Y.shape[1]
    coef = _unpack(w, J, X.shape[1])
    P = _probs(coef, X, baseline)
    keep = [j for j in range(J) if j != baseline]
    Pk = P[:, keep]
    # W[i, a, b] = p_a (delta_ab - p_b)
    W = -np.einsum("ia,ib->iab", Pk, Pk)
    idx = np.arange(len(keep))
    W[:, idx, idx] += Pk
    H = np.einsum("iab,ic,id->acbd", W, X, X)
    m = len(keep) * X.shape[1]
    return -H.reshape(m, m) - ridge * np.eye(m)


# -- fitting ------------------------------------------------------------------

def fit_multinomial(features, labels, n_classes=len(CLASSES), baseline=None,
                    ridge=DEFAULT_RIDGE, max_iter=MAX_NEWTON, tol=GRAD_TOL):
    """Fit a multinomial logit by damped Newton ascent.

    Step halving keeps the penalised log-likelihood non-decreasing. If the
    Hessian is singular the fit falls back to 500 gradient-ascent steps.
    Failing to reach ``tol`` is not an error: the best iterate is
    returned with ``converged=False``.
    """
    if baseline is None:
        baseline = n_classes - 1
    if not 0 <= baseline < n_classes:
        raise ValueError("baseline out of range")
    if ridge < 0:
        raise ValueError("ridge must be >= 0")
    X = _design(features)
    Y = _one_hot(labels, n_classes)
    if X.shape[0] != Y.shape[0]:
        raise ValueError("features and labels differ in length")
    missing = np.flatnonzero(Y.sum(axis=0) == 0)
    if missing.size:
        raise ValueError(f"no examples of class(es) {missing.tolist()}")

    w = np.zeros((n_classes - 1) * X.shape[1])
    f = penalized_loglik(w, X, Y, baseline, ridge)
    g = gradient(w, X, Y, baseline, ridge)
    trace = [f]
    it = 0
    while it < max_iter and np.linalg.norm(g) > tol:
        it += 1
        try:
            step = np.linalg.solve(hessian(w, X, Y, baseline, ridge), -g)
            if not np.all(np.isfinite(step)):
                raise np.linalg.LinAlgError("non-finite Newton step")
        except np.linalg.LinAlgError:
            w, f, g = _gradient_ascent(w, f, X, Y, baseline, ridge)
            trace.append(f)
            break
        # below this predicted gain, f cannot resolve the change: take the full step
        roundoff = 0.5 * float(g @ step) < 1e-13 * max(1.0, abs(f))
        t = 1.0
        while True:
            w_new = w + t * step
            f_new = penalized_loglik(w_new, X, Y, baseline, ridge)
            if f_new >= f or roundoff or t < 1e-10:
                break
            t /= 2
        if f_new < f and not roundoff:
            break
        w, f = w_new, f_new
        trace.append(f_new)
        g = gradient(w, X, Y, baseline, ridge)

    gnorm = float(np.linalg.norm(g))
    converged = gnorm <= tol
    if not converged:
        log.warning("multinomial fit stopped after %d iterations, |grad| = %.3g", it, gnorm)
    coef = _unpack(w, n_classes, X.shape[1])
    return MultinomialModel(
        n_classes=n_classes, baseline=baseline,
        alphas=coef[:, 0].copy(), betas=coef[:, 1:].copy(),
        ridge=ridge, converged=converged, grad_norm=gnorm, iterations=it,
        trace=tuple(trace),
    )


def _gradient_ascent(w, f, X, Y, baseline, ridge, steps=500):
    lr = 1.0 / max(1.0, X.shape[0])
    for _ in range(steps):
        g = gradient(w, X, Y, baseline, ridge)
        w_new = w + lr * g
        f_new = penalized_loglik(w_new, X, Y, baseline, ridge)
        if f_new >= f:
            w, f = w_new, f_new
        else:
            lr /= 2
    return w, f, gradient(w, X, Y, baseline, ridge)


def model_params(model):
    return np.column_stack([model.alphas, model.betas]).ravel()


def predict(model, features):
    """Class probabilities; one row per input (a single vector gives one row)."""
    x = np.asarray(features, dtype=float)
    if x.ndim == 1:
        if x.size % model.n_features:
            raise ValueError(f"expected {model.n_features} features per row")
        x = x.reshape(-1, model.n_features)
    if x.ndim != 2 or x.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} features, got shape {x.shape}")
    X = _design(x)
    coef = np.column_stack([model.alphas, model.betas])
    return _probs(coef, X, model.baseline)


def predict_class(model, features):
    # argmax picks the lowest index on ties
    return np.argmax(predict(model, features), axis=1)


# -- evaluation ---------------------------------------------------------------

def confusion_stats(y_true, y_pred, n_classes=len(CLASSES)):
    y_true = np.asarray(y_true, dtype=int)
    y_pred = np.asarray(y_pred, dtype=int)
    if y_true.size == 0 or y_true.shape != y_pred.shape:
        raise ValueError("need equal-length, non-empty label arrays")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    tp = np.diag(cm).copy()
    fp = cm.sum(axis=0) - tp
    fn = cm.sum(axis=1) - tp
    tn = y_true.size - tp - fp - fn
    return ConfusionStats(tp=tp, tn=tn, fp=fp, fn=fn)


def evaluate(model, features, labels):
    return confusion_stats(labels, predict_class(model, features), model.n_classes)


# -- protocols ----------------------------------------------------------------

def build_cohort(records, n, per_class=400, seed=0, min_history=100):
    """Sample ``per_class`` users of each final class; feature is rho after n comments.

    Only users with at least ``max(n, min_history)`` comments qualify.
    Sampling depends on ``seed`` only, not on ``n``, as long as ``n`` does
    not exceed ``min_history``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    need = max(n, min_history)
    pool = {c: [] for c in CLASSES}
    for r in records:
        if len(r.trajectory) >= need:
            pool[r.label].append(r)
    feats, labels = [], []
    for k, cls in enumerate(CLASSES):
        users = pool[cls]
        if len(users) < per_class:
            raise ValueError(f"class {cls}: {len(users)} eligible users, need {per_class}")
        rng = substream(seed, "cohort", cls)
        pick = np.sort(rng.choice(len(users), size=per_class, replace=False))
        feats.extend(users[i].trajectory[n - 1] for i in pick)
        labels.extend([k] * per_class)
    return np.asarray(feats, dtype=float)[:, None], np.asarray(labels, dtype=int)


def n_sweep(records, n_values, per_class=400, seed=0, ridge=DEFAULT_RIDGE):
    """In-sample precision/recall/accuracy per class for each n.

    Returns a list of rows ``(n, class, precision, recall, accuracy)``.
    """
    def one(n):
        x, y = build_cohort(records, n, per_class, seed)
        table = evaluate(fit_multinomial(x, y, ridge=ridge), x, y).table()
        return [(n, CLASSES[i], *map(float, table[i])) for i in range(len(CLASSES))]

    rows = []
    for chunk in map_ordered(one, list(n_values)):
        rows.extend(chunk)
    return rows


def _split(y, train_size, test_size, n_classes, rng):
    for attempt in range(1000):
        perm = rng.permutation(y.size)
        tr, te = perm[:train_size], perm[train_size:train_size + test_size]
        if (np.bincount(y[tr], minlength=n_classes) > 0).all() and \
                (np.bincount(y[te], minlength=n_classes) > 0).all():
            return tr, te, attempt
    raise ValueError("could not draw a split containing every class")


def monte_carlo_cv(features, labels, train_size=1000, test_size=200, iterations=1000,
                   ridge=DEFAULT_RIDGE, seed=0, n_classes=len(CLASSES)):
    """Repeated random train/test splits; mean and sd of each measure.

    Iteration ``i`` draws its split from the stream ``(seed, "cv", i)``.
    Splits missing a class in either part are redrawn and counted.
    """
    x = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=int)
    if train_size + test_size > y.size:
        raise ValueError("train_size + test_size exceeds the data")
    if iterations < 2:
        raise ValueError("need at least 2 iterations")

    def one(i):
        tr, te, redraws = _split(y, train_size, test_size, n_classes,
                                 substream(seed, "cv", i))
        model = fit_multinomial(x[tr], y[tr], n_classes=n_classes, ridge=ridge)
        return evaluate(model, x[te], y[te]).table(), redraws

    out = map_ordered(one, range(iterations))
    stats = np.stack([t for t, _ in out])
    return CvSummary(
        mean=stats.mean(axis=0), sd=stats.std(axis=0, ddof=1),
        iterations=iterations, train_size=train_size, test_size=test_size,
        seed=seed, resamples=sum(r for _, r in out), per_iteration=stats,
    )


def transfer(train, test, ridge=DEFAULT_RIDGE):
    """Fit on all of cohort ``train`` and evaluate on all of ``test``.

    Each cohort is a ``(features, labels)`` pair built at the same n.
    """
    model = fit_multinomial(*train, ridge=ridge)
    return model, evaluate(model, *test)


def write_model_json(model, path, n=None):
    d = model.to_dict()
    if n is not None:
        d["feature_spec"] = f"rho_{n}"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(d, fh, indent=2, sort_keys=True)
        fh.write("\n")


def parse_n_values(text):
    """Parse ``"1..100"``, ``"1,5,10"`` or ``"1..100:5"`` (with step)."""
    vals = []
    for part in str(text).split(","):
        part = part.strip()
        if ".." in part:
            rng_part, _, step = part.partition(":")
            lo, hi = (int(v) for v in rng_part.split(".."))
            vals.extend(range(lo, hi + 1, int(step) if step else 1))
        elif part:
            vals.append(int(part))
    if not vals or min(vals) < 1:
        raise ValueError(f"bad n specification {text!r}")
    return vals
