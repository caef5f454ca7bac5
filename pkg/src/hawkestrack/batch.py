"""Offline comparator: minimize the time-averaged discretized loss over W with
elementwise l1 regularization by proximal gradient (BB step + backtracking).

The rate model is the direct-calculation one, lam_t(W) = mu_bar + W K_t with
the eta = 0 translation recursion, so batch output is directly comparable to
what the online learners estimate.  Each objective/gradient evaluation is a
full dense pass over the data, which is what makes the online-vs-batch
wall-clock comparison meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._loops import k_path
from .errors import ConfigError, DataError, NumericalError
from .events import BinnedCounts
from .kernels import InfluenceKernel, build_dynamics
from .netlearn import _require_separable


@dataclass
class BatchProblem:
    binned: BinnedCounts
    kernel: InfluenceKernel
    mu_bar: np.ndarray
    gamma: float = 1e-3
    max_outer: int = 60
    tol: float = 1e-7
    step0: float = 1.0

    def __post_init__(self):
        _require_separable(self.kernel)
        self.mu_bar = np.broadcast_to(
            np.asarray(self.mu_bar, dtype=np.float64), (self.binned.p,)
        ).copy()
        if np.any(self.mu_bar <= 0):
            raise ConfigError("batch fit needs mu_bar > 0")
        if self.gamma < 0 or self.max_outer < 1:
            raise ConfigError("bad batch options")


def direct_k_matrix(binned: BinnedCounts, kernel: InfluenceKernel) -> np.ndarray:
    """K_t rows (n_bins, p) of the eta = 0 recursion K_t = a^d K_{t-1} + y_{t-1}."""
    dyn = build_dynamics(kernel, binned)
    full = k_path(
        binned.n_bins,
        binned.p,
        dyn.y_ptr,
        dyn.y_actors,
        dyn.y_weights,
        np.zeros(binned.n_bins),
        dyn.alpha_delta,
    )
    return full[: binned.n_bins]


def _event_index(binned: BinnedCounts) -> tuple[np.ndarray, np.ndarray]:
    bins = np.repeat(np.arange(binned.n_bins, dtype=np.int64), np.diff(binned.bin_ptr))
    return binned.actors, bins


@dataclass
class BatchFit:
    W: np.ndarray
    objective_trace: np.ndarray
    grad: np.ndarray
    n_iter: int
    backtracks: int


def batch_fit(problem: BatchProblem, K: np.ndarray | None = None) -> BatchFit:
    """Proximal gradient on F(W) = mean_t l_t(mu + W K_t) + gamma ||W||_1 over
    W >= 0.  Deterministic; raises on divergence with the trace attached."""
    binned = problem.binned
    p, n_bins = binned.p, binned.n_bins
    if n_bins == 0:
        raise DataError("cannot fit on an empty stream")
    if K is None:
        K = direct_k_matrix(binned, problem.kernel)
    mu = problem.mu_bar
    delta = binned.delta
    ev_actors, ev_bins = _event_index(binned)
    gamma = problem.gamma

    def smooth_value(W):
        lam = mu[:, None] + W @ K.T  # (p, n_bins) dense full-data pass
        if np.any(lam <= 0):
            return np.inf, lam
        val = delta * lam.sum() - np.log(delta * lam[ev_actors, ev_bins]).sum()
        return val / n_bins, lam

    def smooth_grad(lam):
        R = np.full((p, n_bins), delta)
        np.subtract.at(R, (ev_actors, ev_bins), 1.0 / lam[ev_actors, ev_bins])
        return (R @ K) / n_bins

    W = np.zeros((p, p))
    f0, lam = smooth_value(W)
    grad = smooth_grad(lam)
    trace = [f0 + gamma * np.abs(W).sum()]
    step = problem.step0
    W_prev = None
    grad_prev = None
    backtracks = 0
    it = 0
    for it in range(1, problem.max_outer + 1):
        if W_prev is not None:
            dW = W - W_prev
            dG = grad - grad_prev
            denom = float((dW * dG).sum())
            if denom > 0:
                step = float((dW * dW).sum()) / denom
            step = float(np.clip(step, 1e-12, 1e12))
        accepted = False
        for _ in range(60):
            W_new = np.maximum(W - step * grad - step * gamma, 0.0)
            f_new, lam_new = smooth_value(W_new)
            D = W_new - W
            if f_new <= f0 + (grad * D).sum() + (D * D).sum() / (2.0 * step) + 1e-12:
                accepted = True
                break
            step *= 0.5
            backtracks += 1
        if not accepted:
            raise NumericalError(
                f"batch line search exhausted at iteration {it}; trace={trace}"
            )
        W_prev, grad_prev = W, grad
        W, f0, lam = W_new, f_new, lam_new
        grad = smooth_grad(lam)
        obj = f0 + gamma * np.abs(W).sum()
        if obj > trace[-1] + 1e-10 * max(1.0, abs(trace[-1])):
            raise NumericalError(f"batch objective increased at iteration {it}; trace={trace}")
        trace.append(obj)
        rel = abs(trace[-2] - trace[-1]) / max(1.0, abs(trace[-2]))
        if rel < problem.tol:
            break
    return BatchFit(
        W=W, objective_trace=np.asarray(trace), grad=grad, n_iter=it, backtracks=backtracks
    )


def batch_loss_of(
    W, binned: BinnedCounts, kernel: InfluenceKernel, mu_bar, K: np.ndarray | None = None
) -> float:
    """Total discretized loss of the whole dataset under direct-calculation
    rates with the given W (the score used to compare network estimates)."""
    if K is None:
        K = direct_k_matrix(binned, kernel)
    mu = np.broadcast_to(np.asarray(mu_bar, dtype=np.float64), (binned.p,))
    lam = mu[:, None] + np.asarray(W, dtype=np.float64) @ K.T
    if np.any(lam <= 0):
        raise NumericalError("nonpositive rate in batch loss")
    ev_actors, ev_bins = _event_index(binned)
    return float(binned.delta * lam.sum() - np.log(lam[ev_actors, ev_bins]).sum())


def batch_loss_curve(
    snapshots: list[tuple[int, np.ndarray]], binned: BinnedCounts, kernel, mu_bar
) -> tuple[np.ndarray, np.ndarray]:
    """Score a sequence of (bin, W) snapshots on the full dataset."""
    K = direct_k_matrix(binned, kernel)
    bins = np.array([b for b, _ in snapshots], dtype=np.int64)
    vals = np.array(
        [batch_loss_of(Wb[:, : binned.p], binned, kernel, mu_bar, K=K) for _, Wb in snapshots]
    )
    return bins, vals


def optimality_residual(W, grad, gamma: float) -> float:
    """Max KKT violation for min smooth + gamma||W||_1 over W >= 0:
    active coords need grad + gamma ~ 0; zero coords need grad >= -gamma."""
    W = np.asarray(W)
    grad = np.asarray(grad)
    active = W > 0
    res_active = np.abs(grad[active] + gamma) if np.any(active) else np.zeros(0)
    res_zero = np.maximum(0.0, -(grad[~active] + gamma))
    return float(max(res_active.max() if res_active.size else 0.0, res_zero.max() if res_zero.size else 0.0))
