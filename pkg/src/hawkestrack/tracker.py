"""Online intensity tracking with a known network.

Per bin: incur the loss at the current estimate, pull it toward the observed
counts (a mirror-descent step with closed form (1-eta) lam + eta x/delta),
then push it through the Hawkes dynamics.  With eta = 0 this degenerates to
direct calculation of the discretized rate from the assumed parameters.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ._loops import run_tracker_const_a, run_tracker_var_a
from .errors import ConfigError, DataError
from .events import BinnedCounts
from .kernels import (
    DynamicsArrays,
    DynamicsStep,
    InfluenceKernel,
    apply_dynamics,
    build_dynamics,
    contractivity_certified,
)
from .loss import instantaneous_loss


def eta_schedule(eta0: float, kind: str, n_bins: int) -> np.ndarray:
    """Per-bin step sizes: 'constant' eta0/sqrt(n_bins) or 'sqrt_t' eta0/sqrt(t).

    The innovation is a convex combination, so every eta_t must lie in [0,1].
    """
    if eta0 < 0:
        raise ConfigError("step-size scale must be nonnegative")
    if kind == "constant":
        vals = np.full(n_bins, eta0 / np.sqrt(n_bins) if n_bins else 0.0)
    elif kind == "sqrt_t":
        vals = eta0 / np.sqrt(np.arange(1, n_bins + 1, dtype=np.float64))
    else:
        raise ConfigError(f"unknown step-size schedule {kind!r}")
    if vals.size and vals.max() > 1.0:
        raise ConfigError(
            f"step sizes must lie in [0,1]; schedule {kind!r} with scale {eta0} "
            f"peaks at {vals.max():.4g}"
        )
    return vals


@dataclass
class TrackResult:
    losses: np.ndarray
    rates: np.ndarray | None
    lam_next: np.ndarray
    clamp_hits: int
    delta: float
    eta: np.ndarray

    @property
    def cumulative_loss(self) -> float:
        return float(self.losses.sum())

    @property
    def forecast(self) -> np.ndarray:
        """One-step-ahead intensity for the bin after the last observed one."""
        return self.lam_next


class Tracker:
    """Reference one-bin-at-a-time state machine (the fast path must match)."""

    def __init__(self, mu_bar, delta, lam_min, lam_max, eta):
        self.mu_bar = np.asarray(mu_bar, dtype=np.float64)
        self.delta = float(delta)
        if not 0 <= lam_min < lam_max:
            raise ConfigError("need 0 <= lambda_min < lambda_max")
        self.lam_min, self.lam_max = float(lam_min), float(lam_max)
        self.eta = np.asarray(eta, dtype=np.float64)
        if self.eta.size and (self.eta.min() < 0 or self.eta.max() > 1):
            raise ConfigError("eta values must lie in [0,1]")
        self.lam = np.clip(self.mu_bar, lam_min, lam_max)
        self.t = 1

    def step(self, x_t, dyn_step: DynamicsStep, W: np.ndarray):
        """Incur loss at lam_hat_t, innovate, apply dynamics; returns the loss."""
        x_t = np.asarray(x_t, dtype=np.float64)
        loss = instantaneous_loss(self.lam, x_t, self.delta)
        eta_t = self.eta[self.t - 1]
        lam_tilde = np.clip(
            (1.0 - eta_t) * self.lam + eta_t * x_t / self.delta, self.lam_min, self.lam_max
        )
        self.lam = np.clip(apply_dynamics(dyn_step, lam_tilde, W), self.lam_min, self.lam_max)
        self.t += 1
        return loss


def run_tracking(
    binned: BinnedCounts,
    kernel: InfluenceKernel,
    W: np.ndarray,
    mu_bar,
    eta0: float = 10.0,
    schedule: str = "constant",
    lam_min: float = 1e-8,
    lam_max: float = 1e6,
    record_rates: bool = False,
    eta: np.ndarray | None = None,
    dynamics: DynamicsArrays | None = None,
) -> TrackResult:
    """One pass over the binned stream; O(p) per bin for exponential kernels."""
    W = np.ascontiguousarray(W, dtype=np.float64)
    mu_bar = np.asarray(mu_bar, dtype=np.float64)
    if W.shape != (binned.p, binned.p) or mu_bar.shape != (binned.p,):
        raise DataError("W must be p x p and mu_bar length p")
    if not 0 <= lam_min < lam_max:
        raise ConfigError("need 0 <= lambda_min < lambda_max")
    if eta is None:
        eta = eta_schedule(eta0, schedule, binned.n_bins)
    else:
        eta = np.asarray(eta, dtype=np.float64)
        if eta.shape != (binned.n_bins,):
            raise ConfigError("explicit eta must have one value per bin")
        if eta.size and (eta.min() < 0 or eta.max() > 1):
            raise ConfigError("eta values must lie in [0,1]")
    if dynamics is None:
        dynamics = build_dynamics(kernel, binned, W=W)
    if dynamics.kind == "var" and not contractivity_certified(kernel):
        warnings.warn(
            "kernel is not non-increasing: A_t may exceed 1, contractivity not certified",
            stacklevel=2,
        )
    if dynamics.kind == "const":
        losses, rates, lam_next, clamp_hits = run_tracker_const_a(
            binned.n_bins,
            binned.bin_ptr,
            binned.actors,
            dynamics.y_ptr,
            dynamics.y_actors,
            dynamics.y_weights,
            W,
            mu_bar,
            dynamics.alpha_delta,
            eta,
            binned.delta,
            float(lam_min),
            float(lam_max),
            record_rates,
        )
    else:
        losses, rates, lam_next, clamp_hits = run_tracker_var_a(
            binned.n_bins,
            binned.bin_ptr,
            binned.actors,
            dynamics.y_ptr,
            dynamics.y_actors,
            dynamics.y_weights,
            np.ascontiguousarray(dynamics.a_rows),
            W,
            mu_bar,
            eta,
            binned.delta,
            float(lam_min),
            float(lam_max),
            record_rates,
        )
    return TrackResult(
        losses=losses,
        rates=rates if record_rates else None,
        lam_next=lam_next,
        clamp_hits=int(clamp_hits),
        delta=binned.delta,
        eta=eta,
    )


def direct_calculation(binned, kernel, W, mu_bar, **kwargs) -> TrackResult:
    """The eta = 0 baseline: rates computed from the assumed model only."""
    return run_tracking(binned, kernel, W, mu_bar, eta0=0.0, schedule="constant", **kwargs)


def tune_eta0(
    binned: BinnedCounts,
    kernel: InfluenceKernel,
    W: np.ndarray,
    mu_bar,
    grid=(0.5, 1.0, 2.0, 4.0, 10.0),
    pilot_frac: float = 0.05,
    schedule: str = "constant",
    **kwargs,
) -> float:
    """Step-size selection: run on the first pilot_frac of the data for each
    candidate scale and keep the one with the lowest accumulated loss.  The
    schedule is built against the full horizon, only the prefix is run."""
    if not 0 < pilot_frac <= 1:
        raise ConfigError("pilot fraction must be in (0,1]")
    n_pilot = max(1, int(round(pilot_frac * binned.n_bins)))
    prefix = binned.truncate(n_pilot)
    best, best_loss = None, np.inf
    for eta0 in grid:
        eta_full = eta_schedule(float(eta0), schedule, binned.n_bins)
        res = run_tracking(prefix, kernel, W, mu_bar, eta=eta_full[:n_pilot], **kwargs)
        if res.cumulative_loss < best_loss:
            best, best_loss = float(eta0), res.cumulative_loss
    return best


# Dual (theta = log(delta * lambda)) space helpers used by the divergence and
# update-equivalence checks.


def dual_dynamics(theta, a_diag, b, delta: float) -> np.ndarray:
    """The dynamics lam -> A lam + b mapped through theta = log(delta lam)."""
    theta = np.asarray(theta, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(a_diag) * np.exp(theta) + delta * np.asarray(b))


def dual_update_objective(theta, theta_hat, x, eta: float) -> float:
    """eta <grad l~(theta_hat), theta> + D(theta || theta_hat) with the
    exponential-family Bregman divergence D."""
    theta = np.asarray(theta, dtype=np.float64)
    theta_hat = np.asarray(theta_hat, dtype=np.float64)
    grad = np.exp(theta_hat) - np.asarray(x, dtype=np.float64)
    breg = np.sum(np.exp(theta) - np.exp(theta_hat) - np.exp(theta_hat) * (theta - theta_hat))
    return float(eta * grad @ theta + breg)


def dual_update_closed_form(theta_hat, x, eta: float) -> np.ndarray:
    """Minimizer of the dual objective: exp(theta) = (1-eta) exp(theta_hat) + eta x."""
    return np.log((1.0 - eta) * np.exp(np.asarray(theta_hat, dtype=np.float64)) + eta * np.asarray(x))
