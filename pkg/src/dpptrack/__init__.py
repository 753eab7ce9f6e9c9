"""dpptrack: second-order determinantal PHD filtering with a Poisson PHD
baseline, a repulsive-target scenario simulator, an exact small-instance
posterior oracle, and a Monte Carlo experiment harness.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    ConfigError,
    DegenerateGeometry,
    DegenerateIntensity,
    DegenerateVariance,
    ScheduleError,
    SizeError,
    SpectrumError,
    UnknownPreset,
)
