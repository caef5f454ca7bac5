"""Event streams, validation, and discretization into per-bin counts.

Time conventions (used everywhere downstream):
- bins are 1-based; bin t covers the half-open interval (delta*(t-1), delta*t]
- an event at exactly delta*t closes bin t; an event at time 0 is assigned
  to bin 1 (time 0 is a sentinel, not a bin of its own)
- the horizon T is padded up to a whole number of bins
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

from .errors import ConfigError, DataError


class Event(NamedTuple):
    actor: int
    time: float


@dataclass(frozen=True)
class EventStream:
    """Ordered (actor, time) records over p actors on [0, horizon]."""

    times: np.ndarray
    actors: np.ndarray
    p: int
    horizon: float

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        actors = np.asarray(self.actors, dtype=np.int64)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "actors", actors)
        if times.shape != actors.shape or times.ndim != 1:
            raise DataError("times and actors must be 1-d arrays of equal length")
        if self.p < 1:
            raise DataError("actor count p must be >= 1")
        if times.size:
            if times[0] < 0:
                raise DataError("event times must be nonnegative")
            if np.any(np.diff(times) < 0):
                raise DataError("event times must be nondecreasing")
            if actors.min() < 0 or actors.max() >= self.p:
                raise DataError("actor ids must lie in [0, p)")
            if times[-1] > self.horizon:
                raise DataError("event times must not exceed the horizon")
        if self.horizon < 0:
            raise DataError("horizon must be nonnegative")

    @classmethod
    def from_events(cls, events, p, horizon=None) -> "EventStream":
        """Build from (actor, time) pairs; sorts stably by time."""
        actors = np.array([int(a) for a, _ in events], dtype=np.int64)
        times = np.array([float(t) for _, t in events], dtype=np.float64)
        order = np.argsort(times, kind="stable")
        times, actors = times[order], actors[order]
        if horizon is None:
            horizon = float(times[-1]) if times.size else 0.0
        return cls(times=times, actors=actors, p=int(p), horizon=float(horizon))

    @property
    def n_events(self) -> int:
        return int(self.times.size)

    def __len__(self) -> int:
        return self.n_events

    def __iter__(self) -> Iterator[Event]:
        for a, t in zip(self.actors, self.times):
            yield Event(int(a), float(t))


def _as_lines(source) -> list[str]:
    if isinstance(source, (str, Path)):
        with open(source, "rb") as fh:
            data = fh.read()
    elif isinstance(source, bytes):
        data = source
    elif hasattr(source, "read"):
        data = source.read()
        if isinstance(data, str):
            data = data.encode()
    else:
        raise DataError(f"unsupported event source: {type(source).__name__}")
    return data.decode("utf-8").splitlines()


def ingest(source, fmt: str = "csv", p: int | None = None, horizon: float | None = None) -> EventStream:
    """Parse a CSV (header ``time,actor``) or JSONL (``{"t":..,"k":..}``) byte
    stream into a validated, stably time-sorted EventStream.

    p is inferred as max(actor)+1 unless given; rejects negative times,
    out-of-range actors, and unparseable records with their line number.
    """
    fmt = fmt.lower()
    if fmt not in {"csv", "jsonl"}:
        raise ConfigError(f"unknown event format: {fmt!r}")
    lines = _as_lines(source)

    times: list[float] = []
    actors: list[int] = []
    if fmt == "csv":
        body_start = None
        for i, line in enumerate(lines):
            if line.strip():
                if line.strip().replace(" ", "") != "time,actor":
                    raise DataError(f"line {i + 1}: expected header 'time,actor'")
                body_start = i + 1
                break
        rows = [] if body_start is None else list(enumerate(lines[body_start:], start=body_start + 1))
        for lineno, line in rows:
            if not line.strip():
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise DataError(f"line {lineno}: expected 'time,actor', got {line!r}")
            try:
                t = float(parts[0])
                k = int(parts[1])
            except ValueError:
                raise DataError(f"line {lineno}: unparseable record {line!r}") from None
            times.append(t)
            actors.append(k)
    else:
        for lineno, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                t = float(obj["t"])
                k = int(obj["k"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                raise DataError(f"line {lineno}: unparseable record {line!r}") from None
            times.append(t)
            actors.append(k)

    t_arr = np.asarray(times, dtype=np.float64)
    k_arr = np.asarray(actors, dtype=np.int64)
    for lineno_0, t in enumerate(t_arr):
        if t < 0:
            raise DataError(f"record {lineno_0 + 1}: negative time {t}")
    if p is None:
        p = int(k_arr.max()) + 1 if k_arr.size else 1
    bad = np.nonzero((k_arr < 0) | (k_arr >= p))[0]
    if bad.size:
        raise DataError(f"record {bad[0] + 1}: actor {k_arr[bad[0]]} out of range for p={p}")

    order = np.argsort(t_arr, kind="stable")
    t_arr, k_arr = t_arr[order], k_arr[order]
    if horizon is None:
        horizon = float(t_arr[-1]) if t_arr.size else 0.0
    return EventStream(times=t_arr, actors=k_arr, p=p, horizon=float(horizon))


def write_csv(stream: EventStream, dest) -> None:
    """Serialize as ``time,actor`` rows; full float precision (round-trips)."""
    own = isinstance(dest, (str, Path))
    fh = open(dest, "w") if own else dest
    try:
        fh.write("time,actor\n")
        for a, t in zip(stream.actors, stream.times):
            fh.write(f"{float(t)!r},{int(a)}\n")
    finally:
        if own:
            fh.close()


def write_jsonl(stream: EventStream, dest) -> None:
    own = isinstance(dest, (str, Path))
    fh = open(dest, "w") if own else dest
    try:
        for a, t in zip(stream.actors, stream.times):
            fh.write('{"t": %r, "k": %d}\n' % (float(t), int(a)))
    finally:
        if own:
            fh.close()


def to_csv_bytes(stream: EventStream) -> bytes:
    buf = io.StringIO()
    write_csv(stream, buf)
    return buf.getvalue().encode()


def bin_index(times, delta: float) -> np.ndarray:
    """1-based bin of each time: ceil(t/delta), with time 0 mapped to bin 1."""
    if delta <= 0:
        raise ConfigError("delta must be positive")
    idx = np.ceil(np.asarray(times, dtype=np.float64) / delta).astype(np.int64)
    return np.maximum(idx, 1)


@dataclass(frozen=True)
class BinnedCounts:
    """Per-bin event data: counts plus the exact in-bin times.

    Events are stored grouped by bin (stable within a bin): bin t's slice is
    ``[bin_ptr[t-1], bin_ptr[t])`` of ``actors``/``times``.
    """

    delta: float
    p: int
    n_bins: int
    bin_ptr: np.ndarray
    actors: np.ndarray
    times: np.ndarray

    @property
    def n_events(self) -> int:
        return int(self.actors.size)

    def bin_slice(self, t: int) -> tuple[np.ndarray, np.ndarray]:
        """(actors, times) of bin t (1-based)."""
        if not 1 <= t <= self.n_bins:
            raise DataError(f"bin {t} outside 1..{self.n_bins}")
        lo, hi = self.bin_ptr[t - 1], self.bin_ptr[t]
        return self.actors[lo:hi], self.times[lo:hi]

    def counts_at(self, t: int) -> np.ndarray:
        """Count vector x_t (length p) for bin t."""
        actors, _ = self.bin_slice(t)
        return np.bincount(actors, minlength=self.p).astype(np.float64)

    def counts_dense(self) -> np.ndarray:
        """Full (n_bins, p) count matrix; use sparingly for large runs."""
        out = np.zeros((self.n_bins, self.p), dtype=np.float64)
        bins = np.repeat(np.arange(self.n_bins), np.diff(self.bin_ptr))
        np.add.at(out, (bins, self.actors), 1.0)
        return out

    def max_bin_count(self) -> int:
        """Largest per-actor count in any single bin."""
        if not self.n_events:
            return 0
        bins = np.repeat(np.arange(self.n_bins, dtype=np.int64), np.diff(self.bin_ptr))
        _, counts = np.unique(bins * self.p + self.actors, return_counts=True)
        return int(counts.max())

    def n_nonempty_bins(self) -> int:
        return int(np.count_nonzero(np.diff(self.bin_ptr)))

    def truncate(self, n_bins: int) -> "BinnedCounts":
        """Prefix view over the first n_bins bins (used by pilot tuning)."""
        if not 0 <= n_bins <= self.n_bins:
            raise DataError(f"cannot truncate to {n_bins} of {self.n_bins} bins")
        hi = self.bin_ptr[n_bins]
        return BinnedCounts(
            delta=self.delta,
            p=self.p,
            n_bins=n_bins,
            bin_ptr=self.bin_ptr[: n_bins + 1].copy(),
            actors=self.actors[:hi],
            times=self.times[:hi],
        )


def discretize(stream: EventStream, delta: float) -> BinnedCounts:
    """Bin a stream at width delta; event at tau lands in bin ceil(tau/delta).

    The exact event times are retained per bin (updates downstream use tau_n,
    not its bin edge). The horizon is padded up to a whole number of bins.
    """
    if delta <= 0:
        raise ConfigError("delta must be positive")
    if stream.horizon > 0:
        ratio = stream.horizon / delta
        # treat horizons that are whole multiples of delta (up to fp noise) exactly
        if abs(ratio - round(ratio)) <= 1e-9 * max(1.0, abs(ratio)):
            n_bins = int(round(ratio))
        else:
            n_bins = int(math.ceil(ratio))
    else:
        n_bins = 0
    bins = bin_index(stream.times, delta) if stream.n_events else np.zeros(0, dtype=np.int64)
    if stream.n_events:
        n_bins = max(n_bins, int(bins.max()))
        order = np.argsort(bins, kind="stable")
        bins_sorted = bins[order]
        actors = stream.actors[order]
        times = stream.times[order]
        bin_ptr = np.searchsorted(bins_sorted, np.arange(1, n_bins + 2), side="left").astype(np.int64)
    else:
        actors = np.zeros(0, dtype=np.int64)
        times = np.zeros(0, dtype=np.float64)
        bin_ptr = np.zeros(n_bins + 1, dtype=np.int64)
    return BinnedCounts(
        delta=float(delta), p=stream.p, n_bins=n_bins, bin_ptr=bin_ptr, actors=actors, times=times
    )


def check_x_max(binned: BinnedCounts, x_max: float) -> int:
    """Number of (bin, actor) cells whose count exceeds delta * x_max."""
    if not binned.n_events:
        return 0
    cap = binned.delta * x_max
    bins = np.repeat(np.arange(binned.n_bins, dtype=np.int64), np.diff(binned.bin_ptr))
    _, counts = np.unique(bins * binned.p + binned.actors, return_counts=True)
    return int(np.count_nonzero(counts > cap))
