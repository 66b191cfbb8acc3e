"""Agreement statistics between paired measurement methods.

- icc_2_1: two-way random-effects, absolute-agreement, single-measure
  intraclass correlation from the classic ANOVA decomposition.
- bland_altman: bias and 95% limits of agreement of paired differences.
- mae: mean absolute error of the pairs.
- trr: test-retest reliability across repetition columns.
- classify_icc: the conventional poor/moderate/good/excellent labels.

Matrix convention: rows are subjects (here, pooled participant-repetition
measurements), columns are raters/methods. Rows containing NaN are
dropped before any computation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

LOA_FACTOR = 1.96

ICC_LABELS = (
    (0.9, "excellent"),
    (0.75, "good"),
    (0.5, "moderate"),
)


@dataclass(frozen=True)
class BlandAltman:
    bias: float
    loa_low: float
    loa_high: float
    sd_diff: float
    n: int


@dataclass(frozen=True)
class AgreementReport:
    """One comparison row: a metric on a task, one method against truth."""

    metric: str
    task: str
    ptm_method: str
    unit: str
    n_pairs: int
    mae: float
    bias: float
    loa_low: float
    loa_high: float
    icc: float
    icc_label: str
    trr: float | None = None
    n_unmatched: int = 0


def _clean_matrix(matrix) -> np.ndarray:
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2:
        raise ValueError("ratings must form a 2D matrix")
    keep = ~np.isnan(m).any(axis=1)
    m = m[keep]
    if m.shape[0] < 2:
        raise ValueError(
            f"need at least 2 complete rows, have {m.shape[0]}"
        )
    if m.shape[1] < 2:
        raise ValueError("need at least 2 rater columns")
    return m


def icc_2_1(matrix) -> float:
    """ICC(2,1): two-way random effects, absolute agreement, single rater.

    Mean squares come from the two-way ANOVA decomposition:
    rows (subjects), columns (raters), residual. The coefficient is

        (MSR - MSE) / (MSR + (k-1)*MSE + (k/n)*(MSC - MSE))

    for n subjects and k raters. Identical columns short-circuit to
    exactly 1.0 (the ANOVA route reproduces that value only up to float
    cancellation). A constant matrix is perfect agreement by definition;
    any other zero-denominator case is rejected.

    Raises
    ------
    ValueError
        If fewer than 2 complete rows or 2 columns remain, or the
        denominator degenerates on non-identical data.
    """
    m = _clean_matrix(matrix)
    n, k = m.shape
    if all(np.array_equal(m[:, 0], m[:, j]) for j in range(1, k)):
        return 1.0

    grand = m.mean()
    row_means = m.mean(axis=1)
    col_means = m.mean(axis=0)
    ss_rows = k * float(np.sum((row_means - grand) ** 2))
    ss_cols = n * float(np.sum((col_means - grand) ** 2))
    ss_total = float(np.sum((m - grand) ** 2))
    ss_err = ss_total - ss_rows - ss_cols

    msr = ss_rows / (n - 1)
    msc = ss_cols / (k - 1)
    mse = ss_err / ((n - 1) * (k - 1))

    denom = msr + (k - 1) * mse + (k / n) * (msc - mse)
    if abs(denom) < 1e-300:
        raise ValueError("zero variance in non-identical ratings; ICC undefined")
    return float((msr - mse) / denom)


def icc_3_1(matrix) -> float:
    """ICC(3,1): two-way mixed effects, consistency, single rater."""
    m = _clean_matrix(matrix)
    n, k = m.shape
    if all(np.array_equal(m[:, 0], m[:, j]) for j in range(1, k)):
        return 1.0
    grand = m.mean()
    row_means = m.mean(axis=1)
    col_means = m.mean(axis=0)
    ss_rows = k * float(np.sum((row_means - grand) ** 2))
    ss_cols = n * float(np.sum((col_means - grand) ** 2))
    ss_total = float(np.sum((m - grand) ** 2))
    mse = (ss_total - ss_rows - ss_cols) / ((n - 1) * (k - 1))
    msr = ss_rows / (n - 1)
    denom = msr + (k - 1) * mse
    if abs(denom) < 1e-300:
        raise ValueError("zero variance in non-identical ratings; ICC undefined")
    return float((msr - mse) / denom)


def bland_altman(pairs) -> BlandAltman:
    """Bias and 95% limits of agreement of (measured, truth) pairs.

    Differences are measured minus truth; limits are bias +/- 1.96 times
    the sample standard deviation (ddof=1) of the differences.

    Raises
    ------
    ValueError
        With fewer than 2 pairs.
    """
    p = np.asarray(pairs, dtype=float)
    if p.ndim != 2 or p.shape[1] != 2:
        raise ValueError("pairs must have shape (n, 2)")
    if p.shape[0] < 2:
        raise ValueError("Bland-Altman needs at least 2 pairs")
    d = p[:, 0] - p[:, 1]
    bias = float(np.mean(d))
    sd = float(np.std(d, ddof=1))
    return BlandAltman(bias=bias,
                       loa_low=bias - LOA_FACTOR * sd,
                       loa_high=bias + LOA_FACTOR * sd,
                       sd_diff=sd,
                       n=p.shape[0])


def mae(pairs) -> float:
    """Mean absolute error of (measured, truth) pairs."""
    p = np.asarray(pairs, dtype=float)
    if p.ndim != 2 or p.shape[1] != 2:
        raise ValueError("pairs must have shape (n, 2)")
    if p.shape[0] < 1:
        raise ValueError("mae needs at least 1 pair")
    return float(np.mean(np.abs(p[:, 0] - p[:, 1])))


def trr(rep_matrix, estimator: str = "icc2_1") -> float:
    """Test-retest reliability across repetitions of one method.

    Rows are participants, columns are repetition indices. The default
    estimator treats repetitions as raters in ICC(2,1); 'icc3_1' is
    available where repetition means are considered fixed.
    """
    if estimator == "icc2_1":
        return icc_2_1(rep_matrix)
    if estimator == "icc3_1":
        return icc_3_1(rep_matrix)
    raise ValueError(f"unknown TRR estimator {estimator!r}")


def classify_icc(value: float) -> str:
    """Conventional interpretation bands for ICC values."""
    for threshold, label in ICC_LABELS:
        if value >= threshold:
            return label
    return "poor"


def build_report(metric: str, task: str, ptm_method: str, unit: str,
                 pairs, rep_matrix=None, n_unmatched: int = 0) -> AgreementReport:
    """Assemble the full agreement row for one (metric, task, method).

    ``pairs`` holds pooled (measured, truth) values; ``rep_matrix`` the
    measured values arranged participants x repetitions for test-retest
    reliability (skipped when participants or repetitions are too few).
    """
    ba = bland_altman(pairs)
    p = np.asarray(pairs, dtype=float)
    icc = icc_2_1(p)
    reliability = None
    if rep_matrix is not None:
        try:
            reliability = trr(rep_matrix)
        except ValueError as exc:
            log.info("TRR unavailable for %s/%s: %s", task, metric, exc)
    return AgreementReport(
        metric=metric, task=task, ptm_method=ptm_method, unit=unit,
        n_pairs=ba.n, mae=mae(p), bias=ba.bias,
        loa_low=ba.loa_low, loa_high=ba.loa_high,
        icc=icc, icc_label=classify_icc(icc),
        trr=reliability, n_unmatched=n_unmatched,
    )
