"""Online tracking of multivariate Hawkes intensities and influence networks."""

from ._accel import using_numba
from .events import BinnedCounts, Event, EventStream, discretize, ingest
from .kernels import (
    DelayedExponentialKernel,
    ExponentialKernel,
    RectangularKernel,
    TabulatedKernel,
)
from .netlearn import run_learning, run_ogd_learning
from .projections import FeasibleSet
from .simulate import GeneratorConfig, simulate_hawkes
from .tracker import direct_calculation, run_tracking

__version__ = "0.1.0"

__all__ = [
    "BinnedCounts",
    "DelayedExponentialKernel",
    "Event",
    "EventStream",
    "ExponentialKernel",
    "FeasibleSet",
    "GeneratorConfig",
    "RectangularKernel",
    "TabulatedKernel",
    "direct_calculation",
    "discretize",
    "ingest",
    "run_learning",
    "run_ogd_learning",
    "run_tracking",
    "simulate_hawkes",
    "using_numba",
    "__version__",
]
