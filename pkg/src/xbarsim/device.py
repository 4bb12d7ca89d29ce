"""ReRAM cell conductance models in normalized units (g_max = 1, v_read = 1)."""

import enum
import math
from dataclasses import asdict, dataclass

import numpy as np


class ProgrammingScheme(str, enum.Enum):
    PROPORTIONAL = "proportional"
    OFFSET_COMPENSATED = "offset_compensated"


@dataclass(frozen=True)
class DeviceParams:
    """Cell parameters.

    ``r_ratio`` may be ``math.inf`` for an ideal off state (``g_hrs = 0``).
    ``sigma`` is the standard deviation of the log-normal exponent.
    """

    g_max: float = 1.0
    r_ratio: float = 300.0
    bits_per_cell: int = 2
    sigma: float = 0.0
    v_read: float = 1.0

    def __post_init__(self):
        if not self.g_max > 0:
            raise ValueError(f"g_max must be positive, got {self.g_max}")
        if not self.r_ratio > 1:
            raise ValueError(f"r_ratio must exceed 1, got {self.r_ratio}")
        if not (isinstance(self.bits_per_cell, (int, np.integer)) and 1 <= self.bits_per_cell <= 6):
            raise ValueError(f"bits_per_cell must be an integer in [1, 6], got {self.bits_per_cell}")
        if not (self.sigma >= 0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be a finite non-negative number, got {self.sigma}")
        if not self.v_read > 0:
            raise ValueError(f"v_read must be positive, got {self.v_read}")

    @property
    def levels(self):
        return 2**self.bits_per_cell

    @property
    def g_hrs(self):
        return self.g_max / self.r_ratio

    @property
    def delta(self):
        """Conductance step between offset-compensated levels."""
        return (self.g_max - self.g_hrs) / (self.levels - 1)

    def unit_conductance(self, scheme):
        """Conductance of one MAC unit (the ADC step divided by v_read)."""
        if ProgrammingScheme(scheme) is ProgrammingScheme.OFFSET_COMPENSATED:
            return self.delta
        return self.g_max / (self.levels - 1)

    def replace(self, **changes):
        return DeviceParams(**{**asdict(self), **changes})

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, doc):
        keys = ("g_max", "r_ratio", "bits_per_cell", "sigma", "v_read")
        unknown = set(doc) - set(keys)
        if unknown:
            raise ValueError(f"unknown device keys: {sorted(unknown)}")
        return cls(**{k: doc[k] for k in keys if k in doc})


def target_conductance(level, params, scheme):
    """Nominal programmed conductance for digit ``level`` (scalar or array)."""
    v = np.asarray(level)
    if np.any(v < 0) or np.any(v > params.levels - 1):
        raise ValueError(f"level outside [0, {params.levels - 1}]")
    v = v.astype(np.float64)
    if ProgrammingScheme(scheme) is ProgrammingScheme.OFFSET_COMPENSATED:
        g = params.g_hrs + v * params.delta
    else:
        g = np.maximum(params.g_hrs, v * (params.g_max / (params.levels - 1)))
    return g if g.ndim else float(g)


def sample_conductance(nominal, sigma, rng):
    """Draw ``G0 * exp(theta)`` with ``theta ~ N(0, sigma^2)``.

    ``sigma == 0`` returns the nominal value without consuming randomness.
    """
    g0 = np.asarray(nominal, dtype=np.float64)
    if np.any(g0 < 0):
        raise ValueError("nominal conductance must be non-negative")
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        return g0.copy() if g0.ndim else float(g0)
    g = g0 * np.exp(rng.normal(0.0, sigma, size=g0.shape))
    return g if g.ndim else float(g)


def cell_current(g, v_read=1.0):
    g = np.asarray(g, dtype=np.float64)
    if np.any(g < 0):
        raise ValueError("conductance must be non-negative")
    i = g * v_read
    return i if i.ndim else float(i)
