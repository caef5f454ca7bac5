"""Euclidean projections onto the feasible sets used for network estimates.

All sets live inside the nonnegative orthant.  Box/l1/support projections are
exact; the nuclear-ball + orthant intersection has no closed form and uses
Dykstra's alternating scheme.  The standalone projection runs until converged
(degenerate instances need >1e5 sweeps); the per-bin learner loop instead uses
a 500-sweep approximate projection to keep the O(p^3)-per-bin cost budget.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._loops import (
    SET_BOX,
    SET_L1,
    SET_NUCLEAR,
    SET_SUPPORT,
    _dykstra_nuclear_nonneg,
    _proj_l1_nonneg_flat,
)
from .errors import ConfigError, DataError

DYKSTRA_MAX_ITER = 200_000
DYKSTRA_TOL = 1e-14


def project_box(point, lo, hi) -> np.ndarray:
    point = np.asarray(point, dtype=np.float64)
    if np.any(np.asarray(lo) > np.asarray(hi)):
        raise ConfigError("box projection requires lo <= hi")
    return np.clip(point, lo, hi)


def project_l1_nonneg(point, c: float) -> np.ndarray:
    """Project onto {W >= 0 elementwise, ||W||_1 <= c} (sort-based threshold)."""
    if c < 0:
        raise ConfigError("l1 radius must be nonnegative")
    point = np.asarray(point, dtype=np.float64)
    flat = np.maximum(point, 0.0).ravel().copy()
    _proj_l1_nonneg_flat(flat, float(c))
    return flat.reshape(point.shape)


def project_nuclear_nonneg(
    point, c: float, max_iter: int = DYKSTRA_MAX_ITER, tol: float = DYKSTRA_TOL
) -> np.ndarray:
    """Project onto {W >= 0, ||W||_* <= c} by Dykstra alternation."""
    if c < 0:
        raise ConfigError("nuclear radius must be nonnegative")
    point = np.ascontiguousarray(point, dtype=np.float64)
    if point.ndim != 2:
        raise DataError("nuclear projection expects a matrix")
    return _dykstra_nuclear_nonneg(point, float(c), max_iter, tol)


def project_support(point, zero_mask, lo=0.0, hi=np.inf) -> np.ndarray:
    """Zero the masked (known-zero) entries, clamp the rest to the box."""
    point = np.asarray(point, dtype=np.float64)
    zero_mask = np.asarray(zero_mask, dtype=bool)
    if zero_mask.shape != point.shape:
        raise DataError("support mask shape mismatch")
    out = np.clip(point, lo, hi)
    out[zero_mask] = 0.0
    return out


@dataclass(frozen=True)
class FeasibleSet:
    """Constraint family for the network estimate, always within W >= 0.

    variant: 'box' (lo/hi), 'l1' (radius c), 'nuclear' (radius c),
    'support' (zero_mask + box).
    """

    variant: str
    c: float = np.inf
    lo: float = 0.0
    hi: float = np.inf
    zero_mask: np.ndarray | None = None

    def __post_init__(self):
        if self.variant not in {"box", "l1", "nuclear", "support"}:
            raise ConfigError(f"unknown feasible set variant {self.variant!r}")
        if self.variant in {"l1", "nuclear"} and not self.c >= 0:
            raise ConfigError("feasible-set radius must be nonnegative")
        if self.lo < 0:
            raise ConfigError("feasible sets live in the nonnegative orthant")
        if self.variant == "support" and self.zero_mask is None:
            raise ConfigError("support set needs a zero mask")

    def project(self, point) -> np.ndarray:
        if self.variant == "box":
            return project_box(point, self.lo, self.hi)
        if self.variant == "l1":
            return project_l1_nonneg(point, self.c)
        if self.variant == "nuclear":
            return project_nuclear_nonneg(point, self.c)
        return project_support(point, self.zero_mask, self.lo, self.hi)

    def contains(self, point, tol: float = 1e-8) -> bool:
        point = np.asarray(point, dtype=np.float64)
        if np.any(point < -tol):
            return False
        if self.variant == "box":
            return bool(np.all(point >= self.lo - tol) and np.all(point <= self.hi + tol))
        if self.variant == "l1":
            return bool(np.abs(point).sum() <= self.c + tol)
        if self.variant == "nuclear":
            return bool(np.linalg.svd(point, compute_uv=False).sum() <= self.c + tol)
        ok_zero = np.all(np.abs(point[self.zero_mask]) <= tol)
        rest = point[~self.zero_mask]
        return bool(ok_zero and np.all(rest >= self.lo - tol) and np.all(rest <= self.hi + tol))

    def loop_params(self, p: int):
        """(set_kind, c, lo, hi, zero_mask) tuple for the compiled loops."""
        kind = {"box": SET_BOX, "l1": SET_L1, "support": SET_SUPPORT, "nuclear": SET_NUCLEAR}[
            self.variant
        ]
        mask = (
            np.ascontiguousarray(self.zero_mask, dtype=np.bool_)
            if self.zero_mask is not None
            else np.zeros((1, 1), dtype=np.bool_)
        )
        return kind, float(self.c), float(self.lo), float(self.hi), mask


def feasible_from_string(text: str, mask_loader=None) -> FeasibleSet:
    """Parse 'box:wmax' | 'l1:c' | 'nuclear:c' | 'support:maskfile'."""
    name, _, arg = text.partition(":")
    name = name.strip().lower()
    arg = arg.strip()
    try:
        if name == "box":
            return FeasibleSet(variant="box", hi=float(arg) if arg else np.inf)
        if name == "l1":
            return FeasibleSet(variant="l1", c=float(arg))
        if name == "nuclear":
            return FeasibleSet(variant="nuclear", c=float(arg))
        if name == "support":
            mask = (mask_loader or _load_mask)(arg)
            return FeasibleSet(variant="support", zero_mask=mask)
    except ConfigError:
        raise
    except (ValueError, OSError) as exc:
        raise ConfigError(f"bad feasible set {text!r}: {exc}") from None
    raise ConfigError(f"unknown feasible set {text!r}")


def _load_mask(path: str) -> np.ndarray:
    # file marks the allowed support (nonzero entries); zeros are forced zero
    arr = np.loadtxt(path, delimiter=",", ndmin=2)
    return arr == 0
