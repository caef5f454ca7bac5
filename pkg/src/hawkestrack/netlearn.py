"""Simultaneous rate tracking and network learning (exponential dynamics).

The translation state K carries what a different W would have produced:
lam^{W1}_t = lam^{W2}_t + (W1 - W2) K_t with K_{t+1} = (1-eta_t) alpha^delta
K_t + y_t.  That identity turns the per-bin loss into a convex function of W
whose rank-one gradient drives a projected descent on the network estimate,
all in O(p^2) per bin.  An online-gradient-descent baseline on the direct-
calculation rate (the eta = 0 special case) is included for comparison.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ._loops import k_path, run_learner, run_ogd
from .errors import ConfigError, DataError
from .events import BinnedCounts, check_x_max
from .kernels import DelayedExponentialKernel, ExponentialKernel, InfluenceKernel, build_dynamics
from .loss import instantaneous_loss
from .projections import FeasibleSet
from .tracker import eta_schedule

MU_FLOOR = 1e-12


def _require_separable(kernel: InfluenceKernel) -> float:
    if not isinstance(kernel, (ExponentialKernel, DelayedExponentialKernel)):
        raise ConfigError(
            "network learning needs W-independent dynamics: exponential or "
            "delayed-exponential kernels only"
        )
    return kernel.alpha


def translate(lam_for_w2, W1, W2, K_t) -> np.ndarray:
    """Rate the run with W1 would have produced, from the W2 run's rate."""
    lam = np.asarray(lam_for_w2, dtype=np.float64)
    W1 = np.asarray(W1, dtype=np.float64)
    W2 = np.asarray(W2, dtype=np.float64)
    K_t = np.asarray(K_t, dtype=np.float64)
    if W1.shape != W2.shape or W1.shape[1] != K_t.shape[0] or W1.shape[0] != lam.shape[0]:
        raise DataError("dimension mismatch in translation")
    return lam + (W1 - W2) @ K_t


def surrogate_loss(W, lam0, K_t, x_t, delta: float) -> float:
    """Loss of the virtual known-W run: l_t(lam0 + W K_t)."""
    lam = np.asarray(lam0, dtype=np.float64) + np.asarray(W, dtype=np.float64) @ np.asarray(K_t)
    return instantaneous_loss(lam, x_t, delta)


def surrogate_grad(W, lam0, K_t, x_t, delta: float) -> np.ndarray:
    """Gradient in W of the virtual-run loss: (delta 1 - x/lam) K_t^T."""
    lam0 = np.asarray(lam0, dtype=np.float64)
    K_t = np.asarray(K_t, dtype=np.float64)
    x_t = np.asarray(x_t, dtype=np.float64)
    lam = lam0 + np.asarray(W, dtype=np.float64) @ K_t
    if np.any(lam <= 0):
        raise DataError("virtual rate must stay positive")
    return np.outer(delta - x_t / lam, K_t)


def k_path_for(binned: BinnedCounts, kernel: InfluenceKernel, eta: np.ndarray) -> np.ndarray:
    """K_1..K_{n_bins+1} (rows) for the given step sizes; K_1 = 0."""
    alpha = _require_separable(kernel)
    dyn = build_dynamics(kernel, binned)
    eta = np.asarray(eta, dtype=np.float64)
    if eta.shape != (binned.n_bins,):
        raise ConfigError("eta must have one value per bin")
    return k_path(
        binned.n_bins, binned.p, dyn.y_ptr, dyn.y_actors, dyn.y_weights, eta, dyn.alpha_delta
    )


@dataclass
class LearnResult:
    losses: np.ndarray
    W: np.ndarray
    snapshots: list[tuple[int, np.ndarray]]
    K: np.ndarray
    lam_next: np.ndarray
    clamp_hits: int
    delta: float
    rates: np.ndarray | None = None
    mu_learned: np.ndarray | None = None
    x_max_violations: int = 0

    @property
    def cumulative_loss(self) -> float:
        return float(self.losses.sum())

    @property
    def network(self) -> np.ndarray:
        """The p x p network block (drops the learned-baseline column)."""
        p = self.W.shape[0]
        return self.W[:, :p]


def run_learning(
    binned: BinnedCounts,
    kernel: InfluenceKernel,
    mu_bar,
    W0: np.ndarray | None = None,
    eta0: float = 10.0,
    rho0: float = 0.01,
    schedule: str = "constant",
    feasible: FeasibleSet | None = None,
    gamma: float = 0.0,
    lam_min: float = 1e-8,
    lam_max: float = 1e6,
    learn_mu: bool = False,
    pin_mu: bool = False,
    snapshot_every: int = 0,
    record_rates: bool = False,
    x_max: float | None = None,
    eta: np.ndarray | None = None,
    rho: np.ndarray | None = None,
) -> LearnResult:
    """One online pass learning W (and optionally the baseline) from counts."""
    alpha = _require_separable(kernel)
    mu_bar = np.asarray(mu_bar, dtype=np.float64)
    p, n_bins = binned.p, binned.n_bins
    if mu_bar.shape != (p,):
        raise DataError("mu_bar must have length p")
    q = p + 1 if learn_mu else p
    if W0 is None:
        W0 = np.zeros((p, q))
        if learn_mu:
            W0[:, p] = np.maximum(mu_bar, MU_FLOOR)
    W0 = np.ascontiguousarray(W0, dtype=np.float64)
    if W0.shape != (p, q):
        raise DataError(f"W0 must be {p} x {q}")
    feasible = feasible or FeasibleSet(variant="box")
    if eta is None:
        eta = eta_schedule(eta0, schedule, n_bins)
    else:
        eta = np.asarray(eta, dtype=np.float64)
    if rho is None:
        rho = eta_schedule(rho0, schedule, n_bins) if rho0 else np.zeros(n_bins)
    else:
        rho = np.asarray(rho, dtype=np.float64)
    if eta.shape != (n_bins,) or rho.shape != (n_bins,):
        raise ConfigError("eta/rho must have one value per bin")
    if eta.size and (eta.min() < 0 or eta.max() > 1):
        raise ConfigError("eta values must lie in [0,1]")

    declared_x_max = lam_max if x_max is None else x_max
    violations = check_x_max(binned, declared_x_max)
    if violations:
        warnings.warn(
            f"{violations} bin counts exceed delta * x_max; the interior-update "
            "assumption (x_max < lambda_max) is violated",
            stacklevel=2,
        )

    dyn = build_dynamics(kernel, binned)
    set_kind, set_c, w_lo, w_hi, zero_mask = feasible.loop_params(p)
    losses, W, snaps, snap_bins, K, lam_next, clamp_hits, rates = run_learner(
        n_bins,
        binned.bin_ptr,
        binned.actors,
        dyn.y_ptr,
        dyn.y_actors,
        dyn.y_weights,
        W0,
        mu_bar,
        dyn.alpha_delta,
        eta,
        rho,
        binned.delta,
        float(lam_min),
        float(lam_max),
        float(gamma),
        set_kind,
        set_c,
        w_lo,
        w_hi,
        zero_mask,
        learn_mu,
        pin_mu,
        MU_FLOOR,
        int(snapshot_every),
        record_rates,
    )
    return LearnResult(
        losses=losses,
        W=W,
        snapshots=[(int(b), snaps[i].copy()) for i, b in enumerate(snap_bins)],
        K=K,
        lam_next=lam_next,
        clamp_hits=int(clamp_hits),
        delta=binned.delta,
        rates=rates if record_rates else None,
        mu_learned=W[:, p].copy() if learn_mu else None,
        x_max_violations=violations,
    )


@dataclass
class OgdResult:
    losses: np.ndarray
    W: np.ndarray
    snapshots: list[tuple[int, np.ndarray]]
    K: np.ndarray
    delta: float

    @property
    def cumulative_loss(self) -> float:
        return float(self.losses.sum())

    @property
    def network(self) -> np.ndarray:
        return self.W


def run_ogd_learning(
    binned: BinnedCounts,
    kernel: InfluenceKernel,
    mu_bar,
    W0: np.ndarray | None = None,
    rho0: float = 0.01,
    schedule: str = "constant",
    feasible: FeasibleSet | None = None,
    gamma: float = 0.0,
    lam_min: float = 1e-8,
    lam_max: float = 1e6,
    snapshot_every: int = 0,
    rho: np.ndarray | None = None,
) -> OgdResult:
    """Online gradient descent on W with the direct-calculation rate
    mu_bar + W K_t (the eta = 0 degenerate form of the full learner)."""
    _require_separable(kernel)
    mu_bar = np.asarray(mu_bar, dtype=np.float64)
    p, n_bins = binned.p, binned.n_bins
    W0 = np.zeros((p, p)) if W0 is None else np.ascontiguousarray(W0, dtype=np.float64)
    if W0.shape != (p, p):
        raise DataError(f"W0 must be {p} x {p}")
    feasible = feasible or FeasibleSet(variant="box")
    if rho is None:
        rho = eta_schedule(rho0, schedule, n_bins) if rho0 else np.zeros(n_bins)
    else:
        rho = np.asarray(rho, dtype=np.float64)
    if rho.shape != (n_bins,):
        raise ConfigError("rho must have one value per bin")
    dyn = build_dynamics(kernel, binned)
    set_kind, set_c, w_lo, w_hi, zero_mask = feasible.loop_params(p)
    losses, W, snaps, snap_bins, K = run_ogd(
        n_bins,
        binned.bin_ptr,
        binned.actors,
        dyn.y_ptr,
        dyn.y_actors,
        dyn.y_weights,
        W0,
        mu_bar,
        dyn.alpha_delta,
        rho,
        binned.delta,
        float(lam_min),
        float(lam_max),
        float(gamma),
        set_kind,
        set_c,
        w_lo,
        w_hi,
        zero_mask,
        int(snapshot_every),
    )
    return OgdResult(
        losses=losses,
        W=W,
        snapshots=[(int(b), snaps[i].copy()) for i, b in enumerate(snap_bins)],
        K=K,
        delta=binned.delta,
    )


def ogd_step(
    W_hat,
    K,
    x_t,
    y_t,
    mu_bar,
    alpha_delta: float,
    delta: float,
    rho_t: float,
    feasible: FeasibleSet | None = None,
    gamma: float = 0.0,
):
    """One online-gradient-descent step on the network with the direct rate
    mu_bar + W K; returns (W_new, K_new).  The full-run loop must match."""
    W_hat = np.asarray(W_hat, dtype=np.float64)
    K = np.asarray(K, dtype=np.float64)
    x_t = np.asarray(x_t, dtype=np.float64)
    y_t = np.asarray(y_t, dtype=np.float64)
    lam = np.asarray(mu_bar, dtype=np.float64) + W_hat @ K
    grad = np.outer(delta - x_t / lam, K)
    W_new = W_hat - rho_t * grad
    if gamma > 0:
        thr = rho_t * gamma
        W_new = np.sign(W_new) * np.maximum(np.abs(W_new) - thr, 0.0)
    W_new = (feasible or FeasibleSet(variant="box")).project(W_new)
    K_new = alpha_delta * K + y_t
    return W_new, K_new


class NetworkLearner:
    """Reference one-bin-at-a-time learner (the fast path must match it)."""

    def __init__(self, mu_bar, alpha, delta, eta, rho, feasible=None, gamma=0.0,
                 lam_min=1e-8, lam_max=1e6, W0=None):
        self.mu_bar = np.asarray(mu_bar, dtype=np.float64)
        p = self.mu_bar.shape[0]
        self.alpha_delta = float(alpha**delta)
        self.delta = float(delta)
        self.eta = np.asarray(eta, dtype=np.float64)
        self.rho = np.asarray(rho, dtype=np.float64)
        self.feasible = feasible or FeasibleSet(variant="box")
        self.gamma = float(gamma)
        self.lam_min, self.lam_max = float(lam_min), float(lam_max)
        self.W = np.zeros((p, p)) if W0 is None else np.array(W0, dtype=np.float64)
        self.K = np.zeros(p)
        self.lam = np.clip(self.mu_bar, lam_min, lam_max)
        self.t = 1

    def learn_step(self, x_t, y_t):
        """One bin: loss, innovation, W gradient step + projection, K update,
        dynamics with the translation correction; returns the incurred loss."""
        x_t = np.asarray(x_t, dtype=np.float64)
        y_t = np.asarray(y_t, dtype=np.float64)
        i = self.t - 1
        eta_t, rho_t = self.eta[i], self.rho[i]
        loss = instantaneous_loss(self.lam, x_t, self.delta)
        lam_tilde = (1.0 - eta_t) * self.lam + eta_t * x_t / self.delta
        grad = np.outer(self.delta - x_t / self.lam, self.K)
        W_new = self.W - rho_t * grad
        if self.gamma > 0:
            thr = rho_t * self.gamma
            W_new = np.sign(W_new) * np.maximum(np.abs(W_new) - thr, 0.0)
        W_new = self.feasible.project(W_new)
        self.K = (1.0 - eta_t) * self.alpha_delta * self.K + y_t
        lam = (
            self.alpha_delta * lam_tilde
            + self.W @ y_t
            + (1.0 - self.alpha_delta) * self.mu_bar
            + (W_new - self.W) @ self.K
        )
        self.lam = np.clip(lam, self.lam_min, self.lam_max)
        self.W = W_new
        self.t += 1
        return loss
