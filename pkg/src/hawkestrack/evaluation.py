"""Experiment metrics: regret and variation curves, paired percentile bands,
edge-recovery ROC, and diagonal significance counts; plus the CSV emission
used by the command-line harness (deterministic byte-for-byte given inputs).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .kernels import DynamicsArrays


def regret_curve(learner_losses, comparator_losses) -> np.ndarray:
    """Cumulative excess loss of the learner over the comparator."""
    a = np.asarray(learner_losses, dtype=np.float64)
    b = np.asarray(comparator_losses, dtype=np.float64)
    if a.shape != b.shape:
        raise DataError("loss traces must have equal length")
    return np.cumsum(a - b)


def variation_curve(
    comparator_rates: np.ndarray, dyn: DynamicsArrays, W: np.ndarray, mu_bar
) -> np.ndarray:
    """Cumulative sum of ||lam_{t+1} - Phi_t(lam_t, W)||_2, the comparator's
    deviation from the dynamics (the quantity regret bounds scale with)."""
    rates = np.asarray(comparator_rates, dtype=np.float64)
    mu = np.asarray(mu_bar, dtype=np.float64)
    if rates.shape != (dyn.n_bins, dyn.p):
        raise DataError("comparator rates must be (n_bins, p)")
    if dyn.n_bins < 2:
        return np.zeros(max(dyn.n_bins - 1, 0))
    Y = dyn.y_dense()
    if dyn.kind == "const":
        a = np.full((dyn.n_bins, dyn.p), dyn.alpha_delta)
    else:
        a = dyn.a_rows
    phi = a * rates + Y @ np.asarray(W, dtype=np.float64).T + (1.0 - a) * mu
    dev = np.linalg.norm(rates[1:] - phi[:-1], axis=1)
    return np.cumsum(dev)


def paired_percentiles(diffs: np.ndarray, percentiles=(5, 25, 50, 75, 95)) -> np.ndarray:
    """Per-time percentiles across trials of (comparator - learner) traces.

    diffs: (n_trials, n_bins), NaNs (unfilled moving-average prefixes) ignored.
    Returns (len(percentiles), n_bins).
    """
    diffs = np.asarray(diffs, dtype=np.float64)
    if diffs.ndim != 2:
        raise DataError("diffs must be (n_trials, n_bins)")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=RuntimeWarning)
        return np.nanpercentile(diffs, percentiles, axis=0)


@dataclass(frozen=True)
class RocCurve:
    thresholds: np.ndarray
    tpr: np.ndarray
    fpr: np.ndarray
    auc: float
    mode: str


def _rank_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Mann-Whitney AUC with midranks for ties."""
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(scores.size, dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < scores.size:
        j = i
        while j < scores.size and sorted_scores[j] == sorted_scores[i]:
            j += 1
        ranks[order[i:j]] = 0.5 * (i + 1 + j)
        i = j
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("ROC needs both positive and negative entries")
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def roc(W_hat, W_true, mode: str = "full", floor: float = 1e-6) -> RocCurve:
    """Edge-recovery ROC: sweep thresholds over the estimate's entries.

    mode 'full': positives are entries of W_true with magnitude > floor.
    mode 'top10': positives are the largest decile of W_true entries; all
    other entries count as negatives.  Diagonal included (self-excitation is
    part of the model).
    """
    scores = np.asarray(W_hat, dtype=np.float64).ravel()
    truth = np.asarray(W_true, dtype=np.float64).ravel()
    if scores.shape != truth.shape:
        raise DataError("estimate and truth must have the same shape")
    if mode == "full":
        labels = np.abs(truth) > floor
    elif mode == "top10":
        m = max(1, int(round(0.1 * truth.size)))
        cutoff = np.sort(np.abs(truth))[::-1][m - 1]
        labels = np.abs(truth) >= cutoff
    else:
        raise DataError(f"unknown ROC mode {mode!r}")
    auc = _rank_auc(scores, labels)
    thresholds = np.concatenate([[np.inf], np.unique(scores)[::-1]])
    pos = labels.sum()
    neg = labels.size - pos
    tpr = np.empty(thresholds.size)
    fpr = np.empty(thresholds.size)
    for i, thr in enumerate(thresholds):
        above = scores >= thr if np.isfinite(thr) else np.zeros_like(labels)
        tpr[i] = (above & labels).sum() / pos
        fpr[i] = (above & ~labels).sum() / neg
    return RocCurve(thresholds=thresholds, tpr=tpr, fpr=fpr, auc=auc, mode=mode)


def significance_count(W_hat, threshold: float, ordering=None) -> tuple[int, int]:
    """(above-diagonal, below-diagonal) counts of entries > threshold after
    reordering actors; W[i,j] with i > j (j influences a slower actor) counts
    as below.  Diagonal entries belong to neither."""
    W = np.asarray(W_hat, dtype=np.float64)
    if ordering is not None:
        perm = np.asarray(ordering, dtype=np.int64)
        W = W[np.ix_(perm, perm)]
    sig = W > threshold
    above = int(np.triu(sig, k=1).sum())
    below = int(np.tril(sig, k=-1).sum())
    return above, below


# CSV emission -------------------------------------------------------------


def write_matrix_csv(path, M) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    with open(path, "w") as fh:
        for row in M:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_matrix_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


def write_columns_csv(path, header: list[str], columns: list[np.ndarray]) -> None:
    cols = [np.asarray(c) for c in columns]
    n = cols[0].shape[0]
    if any(c.shape[0] != n for c in cols):
        raise DataError("columns must share a length")
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(n):
            cells = []
            for c in cols:
                v = c[i]
                if isinstance(v, (np.floating, float)):
                    fv = float(v)
                    cells.append("" if np.isnan(fv) else repr(fv))
                else:
                    cells.append(str(v))
            fh.write(",".join(cells) + "\n")


def write_loss_trace(path, losses, moving_avg=None) -> None:
    """Loss trace CSV: t,instantaneous,cumulative,moving_avg."""
    losses = np.asarray(losses, dtype=np.float64)
    t = np.arange(1, losses.size + 1)
    cum = np.cumsum(losses)
    ma = np.full(losses.size, np.nan) if moving_avg is None else np.asarray(moving_avg)
    write_columns_csv(path, ["t", "instantaneous", "cumulative", "moving_avg"], [t, losses, cum, ma])


def read_loss_trace(path) -> dict[str, np.ndarray]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    cols = {name: np.array([float(r[i]) if r[i] else np.nan for r in rows]) for i, name in enumerate(header)}
    return cols


def write_roc_csv(path, curve: RocCurve) -> None:
    write_columns_csv(path, ["threshold", "tpr", "fpr"], [curve.thresholds, curve.tpr, curve.fpr])
