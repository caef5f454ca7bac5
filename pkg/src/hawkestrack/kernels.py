"""Influence functions h(tau) and the per-bin affine dynamics they induce.

Every kernel yields a one-bin-ahead update  lam_{t+1} = A_t lam_t + W y_t + c_t
with c_t = (I - A_t) mu_bar.  For exponential-family kernels A_t = alpha^delta I
is constant and independent of W (this independence is what makes simultaneous
network learning possible); rectangular/tabulated kernels get per-bin diagonal
A_t computed from a trailing window of events.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError
from .events import BinnedCounts, EventStream, bin_index


@dataclass(frozen=True)
class ExponentialKernel:
    """h(tau) = alpha^tau for tau > 0, alpha in (0,1)."""

    alpha: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("exponential kernel requires alpha in (0,1)")

    def h(self, tau):
        tau = np.asarray(tau, dtype=np.float64)
        return np.where(tau > 0, self.alpha ** np.maximum(tau, 0.0), 0.0)

    def integral(self) -> float:
        return -1.0 / np.log(self.alpha)

    support = np.inf
    nonincreasing = True


@dataclass(frozen=True)
class DelayedExponentialKernel:
    """h(tau) = alpha^(tau-D) for tau > D; requires D >= delta at use time."""

    alpha: float
    delay: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("delayed exponential kernel requires alpha in (0,1)")
        if self.delay <= 0:
            raise ConfigError("delay D must be positive")

    def h(self, tau):
        tau = np.asarray(tau, dtype=np.float64)
        return np.where(tau > self.delay, self.alpha ** np.maximum(tau - self.delay, 0.0), 0.0)

    def integral(self) -> float:
        return -1.0 / np.log(self.alpha)

    support = np.inf
    nonincreasing = True  # after the initial impulse at D


@dataclass(frozen=True)
class RectangularKernel:
    """h(tau) = 1 on 0 < tau < B; requires B > delta at use time."""

    width: float

    def __post_init__(self):
        if self.width <= 0:
            raise ConfigError("rectangular width B must be positive")

    def h(self, tau):
        tau = np.asarray(tau, dtype=np.float64)
        return np.where((tau > 0) & (tau < self.width), 1.0, 0.0)

    def integral(self) -> float:
        return self.width

    @property
    def support(self) -> float:
        return self.width

    nonincreasing = True


@dataclass(frozen=True)
class TabulatedKernel:
    """Piecewise-linear h >= 0 on a grid over (0, B]; zero outside."""

    taus: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        taus = np.asarray(self.taus, dtype=np.float64)
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "values", values)
        if taus.ndim != 1 or taus.shape != values.shape or taus.size < 2:
            raise ConfigError("tabulated kernel needs matching 1-d grids of length >= 2")
        if np.any(np.diff(taus) <= 0) or taus[0] < 0:
            raise ConfigError("tabulated grid must be strictly increasing and nonnegative")
        if np.any(values < 0):
            raise ConfigError("tabulated kernel values must be nonnegative")

    def h(self, tau):
        tau = np.asarray(tau, dtype=np.float64)
        out = np.interp(tau, self.taus, self.values, left=0.0, right=0.0)
        return np.where((tau > 0) & (tau <= self.taus[-1]), out, 0.0)

    def integral(self) -> float:
        return float(np.trapezoid(self.values, self.taus))

    @property
    def support(self) -> float:
        return float(self.taus[-1])

    @property
    def nonincreasing(self) -> bool:
        return bool(np.all(np.diff(self.values) <= 0))


InfluenceKernel = ExponentialKernel | DelayedExponentialKernel | RectangularKernel | TabulatedKernel


def kernel_from_string(text: str, grid_loader=None) -> InfluenceKernel:
    """Parse 'exponential a' | 'delayed_exponential a D' | 'rectangular B' |
    'tabulated <gridfile>' (gridfile: CSV rows tau,h)."""
    parts = text.split()
    if not parts:
        raise ConfigError("empty kernel spec")
    name, args = parts[0].lower(), parts[1:]
    try:
        if name == "exponential" and len(args) == 1:
            return ExponentialKernel(alpha=float(args[0]))
        if name == "delayed_exponential" and len(args) == 2:
            return DelayedExponentialKernel(alpha=float(args[0]), delay=float(args[1]))
        if name == "rectangular" and len(args) == 1:
            return RectangularKernel(width=float(args[0]))
        if name == "tabulated" and len(args) == 1:
            raw = (grid_loader or _load_grid)(args[0])
            return TabulatedKernel(taus=raw[:, 0], values=raw[:, 1])
    except ConfigError:
        raise
    except (ValueError, OSError) as exc:
        raise ConfigError(f"bad kernel spec {text!r}: {exc}") from None
    raise ConfigError(f"unknown kernel spec {text!r}")


def _load_grid(path: str) -> np.ndarray:
    arr = np.loadtxt(path, delimiter=",", ndmin=2)
    if arr.shape[1] != 2:
        raise ConfigError(f"kernel grid {path} must have two columns tau,h")
    return arr


@dataclass(frozen=True)
class DynamicsStep:
    """One bin's affine update pieces: diagonal A_t, excitation y_t, offset c_t."""

    a_diag: np.ndarray
    y: np.ndarray
    c: np.ndarray


def apply_dynamics(step: DynamicsStep, lam: np.ndarray, W: np.ndarray) -> np.ndarray:
    """A_t lam + W y_t + c_t (no clamping; the tracker clamps)."""
    lam = np.asarray(lam, dtype=np.float64)
    if lam.shape[0] != step.a_diag.shape[0] or W.shape != (lam.shape[0], step.y.shape[0]):
        raise DataError("dimension mismatch between step, lambda, and W")
    return step.a_diag * lam + W @ step.y + step.c


def y_bin_and_weight(kernel: InfluenceKernel, times, delta: float):
    """Map each event to the bin whose update its excitation first enters, with
    weight h evaluated at the end of the following bin.

    Non-delayed kernels: bin ceil(tau/delta), weight h(delta*(t+1) - tau).
    Delayed exponential: bin floor((tau+D)/delta) (first bin end past tau+D),
    same weight formula; the delay makes the discretization push redundant.
    """
    times = np.asarray(times, dtype=np.float64)
    if isinstance(kernel, DelayedExponentialKernel):
        if kernel.delay < delta - 1e-12:
            raise ConfigError("delayed exponential requires D >= delta")
        tb = np.floor((times + kernel.delay) / delta).astype(np.int64)
        tb = np.maximum(tb, 1)
    else:
        tb = bin_index(times, delta)
    weights = np.asarray(kernel.h(delta * (tb + 1) - times), dtype=np.float64)
    return tb, weights


def emit_y(kernel: InfluenceKernel, events, delta: float, p: int, t: int | None = None) -> np.ndarray:
    """y_t from one bin's events [(actor, tau), ...]; empty bin gives zeros."""
    y = np.zeros(p, dtype=np.float64)
    if not len(events):
        return y
    actors = np.array([a for a, _ in events], dtype=np.int64)
    times = np.array([ta for _, ta in events], dtype=np.float64)
    tb, w = y_bin_and_weight(kernel, times, delta)
    if t is not None and np.any(tb != t):
        raise DataError(f"events do not all belong to bin {t}")
    np.add.at(y, actors, w)
    return y


def emit_A(
    kernel: InfluenceKernel,
    window_events,
    W: np.ndarray,
    t: int,
    delta: float,
) -> np.ndarray:
    """Diagonal of A_t for bin t.

    Exponential family: alpha^delta * ones (constant, W-independent).
    Rectangular/tabulated: the per-actor ratio of still-active influence mass
    at delta*(t+1) to the mass at delta*t, over events with bin <= t-1; empty
    denominator falls back to 1 (rectangular) or 1/2 (general).
    """
    p = W.shape[0]
    if isinstance(kernel, (ExponentialKernel, DelayedExponentialKernel)):
        return np.full(p, kernel.alpha**delta)
    if not len(window_events):
        fallback = 1.0 if isinstance(kernel, RectangularKernel) else 0.5
        return np.full(p, fallback)
    actors = np.array([a for a, _ in window_events], dtype=np.int64)
    times = np.array([ta for _, ta in window_events], dtype=np.float64)
    past = bin_index(times, delta) <= t - 1
    actors, times = actors[past], times[past]
    den_h = np.asarray(kernel.h(delta * t - times), dtype=np.float64)
    num_h = np.asarray(kernel.h(delta * (t + 1) - times), dtype=np.float64)
    num_h = np.where(den_h > 0, num_h, 0.0)  # a_{t,n}=1 convention: dead stays dead
    den = W[:, actors] @ den_h
    num = W[:, actors] @ num_h
    fallback = 1.0 if isinstance(kernel, RectangularKernel) else 0.5
    with np.errstate(invalid="ignore", divide="ignore"):
        a = np.where(den > 0, num / np.where(den > 0, den, 1.0), fallback)
    return a


def exact_rate(
    kernel: InfluenceKernel, W: np.ndarray, mu_bar: np.ndarray, binned: BinnedCounts, t: int
) -> np.ndarray:
    """Direct calculation of the discretized rate at bin t (brute force over
    all past events; the recursion must reproduce this)."""
    if not 1 <= t <= binned.n_bins + 1:
        raise DataError(f"bin {t} outside 1..{binned.n_bins + 1}")
    hi = binned.bin_ptr[min(t - 1, binned.n_bins)]
    actors = binned.actors[:hi]
    times = binned.times[:hi]
    lags = binned.delta * t - times
    w = np.asarray(kernel.h(lags), dtype=np.float64)
    lam = np.asarray(mu_bar, dtype=np.float64).copy()
    if actors.size:
        lam = lam + W[:, actors] @ w
    return lam


@dataclass(frozen=True)
class DynamicsArrays:
    """Precomputed per-bin dynamics for a whole run.

    kind "const": A_t = alpha_delta * I for every bin.
    kind "var":   A_t = Diag(a_rows[t-1]).
    Excitation events are stored CSR-style by the bin whose update they enter:
    bin t's slice of (y_actors, y_weights) is [y_ptr[t-1], y_ptr[t]).
    """

    kind: str
    n_bins: int
    p: int
    alpha_delta: float
    y_ptr: np.ndarray
    y_actors: np.ndarray
    y_weights: np.ndarray
    a_rows: np.ndarray | None = None

    def y_dense(self) -> np.ndarray:
        out = np.zeros((self.n_bins, self.p), dtype=np.float64)
        bins = np.repeat(np.arange(self.n_bins), np.diff(self.y_ptr))
        np.add.at(out, (bins, self.y_actors), self.y_weights)
        return out

    def step(self, t: int, mu_bar: np.ndarray) -> DynamicsStep:
        """Materialize bin t's DynamicsStep (1-based)."""
        if self.kind == "const":
            a = np.full(self.p, self.alpha_delta)
        else:
            a = self.a_rows[t - 1]
        y = np.zeros(self.p)
        lo, hi = self.y_ptr[t - 1], self.y_ptr[t]
        np.add.at(y, self.y_actors[lo:hi], self.y_weights[lo:hi])
        return DynamicsStep(a_diag=a, y=y, c=(1.0 - a) * np.asarray(mu_bar, dtype=np.float64))


def _rect_a_rows(kernel: RectangularKernel, binned: BinnedCounts, W: np.ndarray) -> np.ndarray:
    """Per-bin A_t for rectangular kernels via per-actor prefix counts."""
    p, n_bins, delta, B = binned.p, binned.n_bins, binned.delta, kernel.width
    tgrid = np.arange(1, n_bins + 1, dtype=np.float64)
    n_mat = np.zeros((n_bins, p))
    d_mat = np.zeros((n_bins, p))
    bins_all = bin_index(binned.times, delta) if binned.n_events else np.zeros(0, dtype=np.int64)
    for j in range(p):
        sel = binned.actors == j
        tj = np.sort(binned.times[sel])
        bj = np.sort(bins_all[sel])
        pref_bin = np.searchsorted(bj, tgrid - 1, side="right")
        cut_den = np.searchsorted(tj, delta * tgrid - B, side="right")
        cut_num = np.searchsorted(tj, delta * (tgrid + 1) - B, side="right")
        d_mat[:, j] = pref_bin - np.minimum(pref_bin, cut_den)
        n_mat[:, j] = pref_bin - np.minimum(pref_bin, cut_num)
    den = d_mat @ W.T
    num = n_mat @ W.T
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), 1.0)


def _tabulated_a_rows(kernel: TabulatedKernel, binned: BinnedCounts, W: np.ndarray) -> np.ndarray:
    """Per-bin A_t for general tabulated kernels (trailing-window scan)."""
    p, n_bins, delta = binned.p, binned.n_bins, binned.delta
    a_rows = np.full((n_bins, p), 0.5)
    for t in range(1, n_bins + 1):
        hi = binned.bin_ptr[t - 1]  # events with bin <= t-1 (arrays sorted by bin)
        acts, tms = binned.actors[:hi], binned.times[:hi]
        if not acts.size:
            continue
        den_h = np.asarray(kernel.h(delta * t - tms))
        num_h = np.where(den_h > 0, np.asarray(kernel.h(delta * (t + 1) - tms)), 0.0)
        den = W[:, acts] @ den_h
        num = W[:, acts] @ num_h
        a_rows[t - 1] = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.5)
    return a_rows


def build_dynamics(
    kernel: InfluenceKernel, binned: BinnedCounts, W: np.ndarray | None = None
) -> DynamicsArrays:
    """Precompute the whole run's dynamics pieces from binned events.

    Rectangular/tabulated kernels need W (their A_t is W-weighted); the
    exponential family does not.
    """
    tb, weights = y_bin_and_weight(kernel, binned.times, binned.delta)
    keep = (tb >= 1) & (tb <= binned.n_bins) & (weights > 0)
    tb, actors, weights = tb[keep], binned.actors[keep], weights[keep]
    order = np.argsort(tb, kind="stable")
    tb, actors, weights = tb[order], actors[order], weights[order]
    y_ptr = np.searchsorted(tb, np.arange(1, binned.n_bins + 2), side="left").astype(np.int64)

    if isinstance(kernel, (ExponentialKernel, DelayedExponentialKernel)):
        return DynamicsArrays(
            kind="const",
            n_bins=binned.n_bins,
            p=binned.p,
            alpha_delta=float(kernel.alpha**binned.delta),
            y_ptr=y_ptr,
            y_actors=actors,
            y_weights=weights,
        )
    if W is None:
        raise ConfigError("rectangular/tabulated dynamics require W to build A_t")
    if isinstance(kernel, RectangularKernel):
        if kernel.width <= binned.delta:
            raise ConfigError("rectangular kernel requires B > delta")
        a_rows = _rect_a_rows(kernel, binned, W)
    else:
        a_rows = _tabulated_a_rows(kernel, binned, W)
    return DynamicsArrays(
        kind="var",
        n_bins=binned.n_bins,
        p=binned.p,
        alpha_delta=float("nan"),
        y_ptr=y_ptr,
        y_actors=actors,
        y_weights=weights,
        a_rows=a_rows,
    )


def contractivity_certified(kernel: InfluenceKernel) -> bool:
    """Whether the A_t in [0,1] hypothesis is guaranteed for this kernel."""
    return bool(kernel.nonincreasing)
