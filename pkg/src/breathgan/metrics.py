"""Synthetic-data quality and classifier performance metrics.

Quality side: TSTR / TRTS (train on one dataset, score accuracy on the
other, averaged over the four front-end classifiers), their harmonic mean,
and the unbiased MMD estimator with an RBF kernel whose width is tuned by
gradient ascent on the MMD t-statistic over a training half, then scored on
a held-out half.

Performance side: confusion-matrix rates, Cohen's kappa, mean/standard-error
aggregation over experiment iterations, and the one-tailed Welch two-sample
t-test (upper-tail p-value by numeric integration of the t density).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .data import Window, windows_to_matrix

MMD_VARIANCE_FLOOR = 1e-8
KERNEL_ASCENT_STEPS = 100
KERNEL_ASCENT_STEP_SIZE = 0.05


@dataclass
class ConfusionMatrix:
    """Binary confusion counts with apneic as the positive class."""

    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass
class QualityReport:
    """Bundle of synthetic-vs-real quality scores."""

    tstr: float
    trts: float
    t_metric: float
    mmd2: float
    kernel_sigma: float

    def __post_init__(self):
        expected = t_metric(self.tstr, self.trts)
        if abs(self.t_metric - expected) > 1e-9:
            raise ValueError("t_metric is not the harmonic mean of tstr and trts")

    def to_dict(self) -> dict:
        return {
            "tstr": self.tstr,
            "trts": self.trts,
            "t_metric": self.t_metric,
            "mmd2": self.mmd2,
            "kernel_sigma": self.kernel_sigma,
        }


def confusion_stats(cm: ConfusionMatrix) -> dict:
    if cm.total == 0:
        raise ValueError("empty confusion matrix")
    if cm.tp + cm.fn == 0:
        raise ValueError("sensitivity undefined: no positive ground truth")
    if cm.tn + cm.fp == 0:
        raise ValueError("specificity undefined: no negative ground truth")
    return {
        "accuracy": (cm.tp + cm.tn) / cm.total,
        "sensitivity": cm.tp / (cm.tp + cm.fn),
        "specificity": cm.tn / (cm.tn + cm.fp),
    }


def cohen_kappa(cm: ConfusionMatrix) -> float:
    """Chance-corrected agreement (p_o - p_e) / (1 - p_e); 0 when p_e = 1."""
    n = cm.total
    if n == 0:
        raise ValueError("empty confusion matrix")
    p_o = (cm.tp + cm.tn) / n
    pred_pos = (cm.tp + cm.fp) / n
    true_pos = (cm.tp + cm.fn) / n
    p_e = pred_pos * true_pos + (1.0 - pred_pos) * (1.0 - true_pos)
    if p_e == 1.0:
        return 0.0
    return (p_o - p_e) / (1.0 - p_e)


def accuracy_of(clf, windows: list[Window]) -> float:
    from . import classifiers

    preds = classifiers.predict(clf, windows)
    return float(np.mean([p == w.label for p, w in zip(preds, windows)]))


def auroc_of(clf, windows: list[Window]) -> float:
    """Rank-based AUROC of the classifier's apneic score (ties averaged)."""
    from . import classifiers
    from .data import APNEIC

    scores = classifiers.predict_score(clf, windows)
    truth = np.array([w.label == APNEIC for w in windows])
    n_pos, n_neg = truth.sum(), (~truth).sum()
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUROC undefined on single-class evaluation set")
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores))
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    pos_rank_sum = ranks[truth].sum()
    return float((pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def _cross_score(train_windows, eval_windows, classifier_specs, metric) -> float:
    from . import classifiers

    scorer = {"accuracy": accuracy_of, "auroc": auroc_of}[metric]
    scores = []
    for spec in classifier_specs:
        clf = classifiers.fit(spec, train_windows)
        scores.append(scorer(clf, eval_windows))
    return float(np.mean(scores))


def tstr(synth_train, real_eval, classifier_specs, metric: str = "accuracy") -> float:
    """Train on synthetic, score on real; mean over the classifier set."""
    return _cross_score(synth_train, real_eval, classifier_specs, metric)


def trts(real_train, synth_eval, classifier_specs, metric: str = "accuracy") -> float:
    """Train on real, score on synthetic; mean over the classifier set."""
    return _cross_score(real_train, synth_eval, classifier_specs, metric)


def t_metric(tstr_value: float, trts_value: float) -> float:
    """Harmonic mean of TSTR and TRTS; collapses to 0 when either side is 0."""
    if not (0.0 <= tstr_value <= 1.0 and 0.0 <= trts_value <= 1.0):
        raise ValueError("tstr/trts must lie in [0, 1]")
    if tstr_value + trts_value == 0.0:
        return 0.0
    return 2.0 * tstr_value * trts_value / (tstr_value + trts_value)


def _as_matrix(x) -> np.ndarray:
    if isinstance(x, np.ndarray):
        return np.atleast_2d(x.astype(np.float64))
    return windows_to_matrix(x)


def _sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d2 = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * a @ b.T
    return np.maximum(d2, 0.0)


def mmd2_unbiased(x, y, sigma: float) -> float:
    """Unbiased squared-MMD U-statistic with k(a,b) = exp(-|a-b|^2 / (2 sigma^2)).

    Off-diagonal within-set kernel means plus twice the negated cross mean.
    Sums use math.fsum, so the value is identical under argument swap.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    xm, ym = _as_matrix(x), _as_matrix(y)
    m, n = len(xm), len(ym)
    if m < 2 or n < 2:
        raise ValueError("each sample needs at least two points")
    s2 = 2.0 * sigma * sigma
    kxx = np.exp(-_sq_dists(xm, xm) / s2)
    kyy = np.exp(-_sq_dists(ym, ym) / s2)
    kxy = np.exp(-_sq_dists(xm, ym) / s2)
    term_x = math.fsum(kxx[~np.eye(m, dtype=bool)]) / (m * (m - 1))
    term_y = math.fsum(kyy[~np.eye(n, dtype=bool)]) / (n * (n - 1))
    cross = math.fsum(kxy.ravel()) / (m * n)
    return term_x + term_y - 2.0 * cross


def median_heuristic_sigma(x, y) -> float:
    """Median pairwise distance of the pooled sample (positive fallback 1.0)."""
    pooled = np.vstack([_as_matrix(x), _as_matrix(y)])
    d2 = _sq_dists(pooled, pooled)
    upper = d2[np.triu_indices(len(pooled), k=1)]
    med = float(np.sqrt(np.median(upper))) if len(upper) else 0.0
    return med if med > 0 else 1.0


def _t_stat_and_grad(dxx, dyy, dxy, log_sigma) -> tuple[float, float, float]:
    """MMD t-statistic, its d/dlog(sigma), and the raw mmd2 at this width.

    Uses the paired h-statistic H = Kxx + Kyy - Kxy - Kxy^T (equal sample
    sizes); the variance estimate is the first-order U-statistic term
    4/m * var(row means of H), floored at MMD_VARIANCE_FLOOR.
    """
    m = dxx.shape[0]
    sigma2 = math.exp(2.0 * log_sigma)
    kxx = np.exp(-dxx / (2.0 * sigma2))
    kyy = np.exp(-dyy / (2.0 * sigma2))
    kxy = np.exp(-dxy / (2.0 * sigma2))
    h = kxx + kyy - kxy - kxy.T
    np.fill_diagonal(h, 0.0)
    dh = (kxx * dxx + kyy * dyy - kxy * dxy - (kxy * dxy).T) / sigma2
    np.fill_diagonal(dh, 0.0)

    u = h.sum() / (m * (m - 1))
    du = dh.sum() / (m * (m - 1))
    rows = h.sum(axis=1) / (m - 1)
    drows = dh.sum(axis=1) / (m - 1)
    zeta1 = float(np.mean((rows - u) ** 2))
    dzeta1 = float(np.mean(2.0 * (rows - u) * (drows - du)))
    var = 4.0 * zeta1 / m
    if var <= MMD_VARIANCE_FLOOR:
        denom = math.sqrt(MMD_VARIANCE_FLOOR)
        return u / denom, du / denom, u
    t = u / math.sqrt(var)
    dt = du / math.sqrt(var) - 0.5 * u * (4.0 * dzeta1 / m) / var ** 1.5
    return t, dt, u


def mmd_t_statistic(x, y, sigma: float) -> float:
    """t-statistic (mmd2 over its estimated standard deviation) at a width.

    Samples are truncated to a common size for the paired estimator.
    """
    xm, ym = _as_matrix(x), _as_matrix(y)
    m = min(len(xm), len(ym))
    if m < 2:
        raise ValueError("each sample needs at least two points")
    xm, ym = xm[:m], ym[:m]
    t, _, _ = _t_stat_and_grad(
        _sq_dists(xm, xm), _sq_dists(ym, ym), _sq_dists(xm, ym), math.log(sigma))
    return t


def optimize_kernel(x_train, y_train, init_sigma: float | None = None) -> float:
    """Gradient ascent on log(sigma) of the MMD t-statistic.

    Runs KERNEL_ASCENT_STEPS updates of size KERNEL_ASCENT_STEP_SIZE and
    returns the width with the best training t-statistic seen (the initial
    width included).  A non-finite objective falls back to the median
    heuristic with a warning.
    """
    xm, ym = _as_matrix(x_train), _as_matrix(y_train)
    m = min(len(xm), len(ym))
    if m < 2:
        raise ValueError("each training half needs at least two points")
    xm, ym = xm[:m], ym[:m]
    if init_sigma is None:
        init_sigma = median_heuristic_sigma(xm, ym)
    if init_sigma <= 0:
        raise ValueError("init sigma must be positive")
    dxx, dyy, dxy = _sq_dists(xm, xm), _sq_dists(ym, ym), _sq_dists(xm, ym)

    log_sigma = math.log(init_sigma)
    best_t = -math.inf
    best_log_sigma = log_sigma
    for _ in range(KERNEL_ASCENT_STEPS + 1):
        t, dt, _ = _t_stat_and_grad(dxx, dyy, dxy, log_sigma)
        if not math.isfinite(t):
            break
        if t > best_t:
            best_t = t
            best_log_sigma = log_sigma
        step = KERNEL_ASCENT_STEP_SIZE * dt
        log_sigma += float(np.clip(step, -0.5, 0.5))
    if not math.isfinite(best_t):
        fallback = median_heuristic_sigma(x_train, y_train)
        warnings.warn(
            "kernel optimization hit a non-finite objective; "
            f"falling back to the median-heuristic width {fallback:.6g}")
        return fallback
    return math.exp(best_log_sigma)


def mmd_with_optimized_kernel(real, synth, seed: int) -> tuple[float, float, float]:
    """Split both samples into halves, tune sigma on the training halves and
    report (held-out mmd2, sigma, held-out t-statistic)."""
    xm, ym = _as_matrix(real), _as_matrix(synth)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed])))
    xi = rng.permutation(len(xm))
    yi = rng.permutation(len(ym))
    xa, xb = xm[xi[: len(xm) // 2]], xm[xi[len(xm) // 2 :]]
    ya, yb = ym[yi[: len(ym) // 2]], ym[yi[len(ym) // 2 :]]
    sigma = optimize_kernel(xa, ya)
    return mmd2_unbiased(xb, yb, sigma), sigma, mmd_t_statistic(xb, yb, sigma)


def evaluate_quality(
    real_windows: list[Window],
    synth_windows: list[Window],
    classifier_specs,
    seed: int = 0,
    metric: str = "accuracy",
) -> QualityReport:
    """Full quality bundle: TSTR, TRTS, their harmonic mean, held-out MMD."""
    tstr_value = tstr(synth_windows, real_windows, classifier_specs, metric)
    trts_value = trts(real_windows, synth_windows, classifier_specs, metric)
    mmd2, sigma, _ = mmd_with_optimized_kernel(real_windows, synth_windows, seed)
    return QualityReport(
        tstr=tstr_value,
        trts=trts_value,
        t_metric=t_metric(tstr_value, trts_value),
        mmd2=mmd2,
        kernel_sigma=sigma,
    )


def _t_density(x: float, dof: float) -> float:
    log_norm = (
        math.lgamma((dof + 1.0) / 2.0)
        - math.lgamma(dof / 2.0)
        - 0.5 * math.log(dof * math.pi)
    )
    return math.exp(log_norm - (dof + 1.0) / 2.0 * math.log1p(x * x / dof))


def t_test_one_tailed(sample_a, sample_b) -> float:
    """Welch two-sample t-test of H1: mean(a) > mean(b).

    The upper-tail p-value is obtained by numerically integrating the
    t density with Welch-Satterthwaite degrees of freedom.
    """
    a = np.asarray(sample_a, dtype=np.float64)
    b = np.asarray(sample_b, dtype=np.float64)
    if len(a) < 2 or len(b) < 2:
        raise ValueError("each sample needs at least two values")
    va, vb = a.var(ddof=1), b.var(ddof=1)
    if va == 0.0 and vb == 0.0:
        raise ValueError("zero variance in both samples")
    na, nb = len(a), len(b)
    se2 = va / na + vb / nb
    t = (a.mean() - b.mean()) / math.sqrt(se2)
    dof = se2 ** 2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    p, _ = quad(_t_density, t, np.inf, args=(dof,))
    return float(min(max(p, 0.0), 1.0))


def aggregate(values) -> tuple[float, float]:
    """Mean and standard error (sample stddev over sqrt(n); 0 when n = 1)."""
    v = np.asarray(values, dtype=np.float64)
    if len(v) < 1:
        raise ValueError("aggregate requires at least one value")
    if len(v) == 1:
        return float(v[0]), 0.0
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(len(v)))
