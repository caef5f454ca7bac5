"""Per-bin, cumulative, and continuous-time losses; discretization-gap check.

The per-bin loss of a rate estimate lam against the count vector x is
    l(lam) = <delta lam, 1> - <x, log(delta lam)>,
the negative log-likelihood of independent Poisson(delta*lam) counts up to a
term free of lam.  Summed over bins it matches the discretized process
likelihood up to N_T log(delta).
"""

from __future__ import annotations

import numpy as np

from ._loops import exp_event_stats, run_tracker_const_a
from .errors import ConfigError, DataError, NumericalError
from .events import BinnedCounts, EventStream, discretize
from .kernels import (
    DelayedExponentialKernel,
    ExponentialKernel,
    InfluenceKernel,
    RectangularKernel,
    TabulatedKernel,
    build_dynamics,
)


def instantaneous_loss(lam, x, delta: float) -> float:
    lam = np.asarray(lam, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if lam.shape != x.shape:
        raise DataError("rate and count vectors must have the same shape")
    if np.any(lam <= 0):
        raise NumericalError("instantaneous loss needs strictly positive rates")
    return float(delta * lam.sum() - x @ np.log(delta * lam))


def instantaneous_loss_grad(lam, x, delta: float) -> np.ndarray:
    lam = np.asarray(lam, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    return delta - x / lam


def cumulative_discrete_loss(rates: np.ndarray, binned: BinnedCounts) -> float:
    """Discretized negative log-likelihood: sum_k ( sum_t delta*lam_tk
    - sum_t x_tk log lam_tk ).  Equals sum_t l_t + N_T log(delta)."""
    rates = np.asarray(rates, dtype=np.float64)
    if rates.shape != (binned.n_bins, binned.p):
        raise DataError(
            f"rates shape {rates.shape} does not match ({binned.n_bins}, {binned.p})"
        )
    if np.any(rates <= 0):
        raise NumericalError("discrete loss needs strictly positive rates")
    total = binned.delta * rates.sum()
    if binned.n_events:
        ev_bins = np.repeat(np.arange(binned.n_bins), np.diff(binned.bin_ptr))
        total -= np.log(rates[ev_bins, binned.actors]).sum()
    return float(total)


def kernel_integral_to(kernel: InfluenceKernel, u) -> np.ndarray:
    """Integral of h over [0, u] (vectorized, exact per kernel family)."""
    u = np.asarray(u, dtype=np.float64)
    if isinstance(kernel, ExponentialKernel):
        beta = -np.log(kernel.alpha)
        return np.where(u > 0, (1.0 - kernel.alpha ** np.maximum(u, 0.0)) / beta, 0.0)
    if isinstance(kernel, DelayedExponentialKernel):
        beta = -np.log(kernel.alpha)
        v = np.maximum(u - kernel.delay, 0.0)
        return (1.0 - kernel.alpha**v) / beta
    if isinstance(kernel, RectangularKernel):
        return np.clip(u, 0.0, kernel.width)
    cum = np.concatenate([[0.0], np.cumsum(np.diff(kernel.taus) * (kernel.values[1:] + kernel.values[:-1]) / 2.0)])
    out = np.interp(u, kernel.taus, cum, left=0.0, right=cum[-1])
    return np.where(u > 0, out, 0.0)


def continuous_nll(
    stream: EventStream, W: np.ndarray, mu_bar: np.ndarray, kernel: InfluenceKernel
) -> float:
    """Continuous-time negative log-likelihood
    sum_k int_0^T mu_k - sum_n log mu_{k_n}(tau_n); closed-form integrals."""
    mu_bar = np.asarray(mu_bar, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    T = stream.horizon
    total = mu_bar.sum() * T
    if stream.n_events:
        col_mass = W.sum(axis=0)[stream.actors]
        total += float(col_mass @ kernel_integral_to(kernel, T - stream.times))
        if isinstance(kernel, ExponentialKernel):
            rates, _ = exp_event_stats(stream.times, stream.actors, W, mu_bar, kernel.alpha)
        else:
            rates = _event_rates_brute(stream, W, mu_bar, kernel)
        if np.any(rates <= 0):
            raise NumericalError("conditional intensity vanished at an event")
        total -= np.log(rates).sum()
    return float(total)


def _event_rates_brute(stream, W, mu_bar, kernel) -> np.ndarray:
    rates = np.empty(stream.n_events)
    for n in range(stream.n_events):
        past = stream.times < stream.times[n]  # strict: ties do not excite each other
        hv = np.asarray(kernel.h(stream.times[n] - stream.times[past]))
        k = stream.actors[n]
        rates[n] = mu_bar[k] + W[k, stream.actors[past]] @ hv
    return rates


def exact_discrete_rates(
    binned: BinnedCounts, kernel: InfluenceKernel, W: np.ndarray, mu_bar: np.ndarray
) -> np.ndarray:
    """All bins' discretized rates via the recursion (the eta=0 tracker)."""
    dyn = build_dynamics(kernel, binned, W=W)
    if dyn.kind != "const":
        from .tracker import run_tracking  # var-A path shares the tracker loop

        res = run_tracking(
            binned, kernel, W, mu_bar, eta0=0.0, lam_min=0.0, lam_max=np.inf, record_rates=True
        )
        return res.rates
    losses, rates, _, _ = run_tracker_const_a(
        binned.n_bins,
        binned.bin_ptr,
        binned.actors,
        dyn.y_ptr,
        dyn.y_actors,
        dyn.y_weights,
        np.ascontiguousarray(W, dtype=np.float64),
        np.asarray(mu_bar, dtype=np.float64),
        dyn.alpha_delta,
        np.zeros(binned.n_bins),
        binned.delta,
        0.0,
        np.inf,
        True,
    )
    return rates


def discretization_gap(
    stream: EventStream,
    W: np.ndarray,
    mu_bar: np.ndarray,
    alpha: float,
    delta: float,
    x_max: float | None = None,
) -> tuple[float, float]:
    """|continuous NLL - discretized NLL| on the exact rates, and its linear-
    in-delta bound C * N_T * delta with
    C = 3 p W_max / 2 + W_max x_max p / mu_min - log(alpha).

    x_max defaults to the realized max bin count divided by delta.
    """
    mu_bar = np.asarray(mu_bar, dtype=np.float64)
    if np.any(mu_bar <= 0):
        raise ConfigError("gap bound requires mu_min > 0")
    kernel = ExponentialKernel(alpha)
    binned = discretize(stream, delta)
    cont = continuous_nll(stream, W, mu_bar, kernel)
    rates = exact_discrete_rates(binned, kernel, W, mu_bar)
    disc = cumulative_discrete_loss(rates, binned) if binned.n_bins else 0.0
    gap = abs(cont - disc)
    p = stream.p
    w_max = float(np.max(W)) if np.size(W) else 0.0
    if x_max is None:
        x_max = binned.max_bin_count() / delta
    C = 1.5 * p * w_max + w_max * x_max * p / float(mu_bar.min()) - np.log(alpha)
    return gap, float(C * stream.n_events * delta)


def moving_average_loss(losses, window: float, delta: float) -> np.ndarray:
    """Sliding mean of the last window/delta per-bin losses; NaN before the
    window fills.  window/delta must be a whole number of bins >= 1."""
    losses = np.asarray(losses, dtype=np.float64)
    if window < delta:
        raise ConfigError("moving-average window must be >= delta")
    w_f = window / delta
    w = int(round(w_f))
    if abs(w_f - w) > 1e-9 * max(1.0, w_f):
        raise ConfigError("moving-average window must be an integer number of bins")
    out = np.full(losses.shape[0], np.nan)
    if losses.shape[0] >= w:
        csum = np.concatenate([[0.0], np.cumsum(losses)])
        out[w - 1 :] = (csum[w:] - csum[:-w]) / w
    return out


def dual_bregman(theta1, theta2) -> float:
    """Bregman divergence induced by Z(theta) = <1, exp(theta)>."""
    theta1 = np.asarray(theta1, dtype=np.float64)
    theta2 = np.asarray(theta2, dtype=np.float64)
    e1, e2 = np.exp(theta1), np.exp(theta2)
    return float(np.sum(e1 - e2 - e2 * (theta1 - theta2)))
