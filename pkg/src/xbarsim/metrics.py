"""Error metrics, ADC-bound cycle model, normalized energy model and trial aggregation."""

import math
from dataclasses import dataclass

import numpy as np

from .xbar import adc_resolution


@dataclass(frozen=True)
class ErrorStats:
    rmse: float
    max_abs: float
    code_error_rate: float


def mac_error_stats(simulated, exact):
    sim = np.asarray(simulated, dtype=np.float64)
    ref = np.asarray(exact, dtype=np.float64)
    if sim.shape != ref.shape:
        raise ValueError(f"shape mismatch: {sim.shape} vs {ref.shape}")
    diff = sim - ref
    if diff.size == 0:
        return ErrorStats(0.0, 0.0, 0.0)
    return ErrorStats(
        float(np.sqrt(np.mean(diff**2))),
        float(np.abs(diff).max()),
        float(np.count_nonzero(diff) / diff.size),
    )


@dataclass(frozen=True)
class PerfModel:
    """Latency of one weight tile: SAR ADC conversions dominate, one bit per cycle."""

    rows: int = 128
    naw: int = 128
    input_bits: int = 8
    bits_per_cell: int = 2
    planes: int = 4
    adc_bits: int = None

    def __post_init__(self):
        if self.adc_bits is None:
            object.__setattr__(self, "adc_bits", adc_resolution(self.naw, self.bits_per_cell))
        for name in ("rows", "naw", "input_bits", "planes", "adc_bits"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")

    @property
    def conv_cycles_per_sample(self):
        return self.adc_bits


def cycles(p):
    """Per-plane cycles; planes are converted in parallel."""
    return p.input_bits * math.ceil(p.rows / p.naw) * p.conv_cycles_per_sample


def total_cycles(p):
    return cycles(p) * p.planes


def speedup(baseline, candidate, include_plane_overhead=False):
    if baseline.rows != candidate.rows or baseline.input_bits != candidate.input_bits:
        raise ValueError("speedup compares models with the same rows and input_bits")
    cand = cycles(candidate)
    if include_plane_overhead:
        cand = cand * candidate.planes / baseline.planes
    return cycles(baseline) / cand


@dataclass(frozen=True)
class EnergyModel:
    """ADC energy per conversion is ``k_adc * adc_base**B``; crossbar energy is
    ``sum(G * v_read^2 * t_int)`` over every active cell of every analog step.

    Units are normalized to one ``g_max`` cell read for one step.
    """

    k_adc: float = 1e-3
    adc_base: float = 2.0
    t_int: float = 1.0


@dataclass(frozen=True)
class EnergyReport:
    e_xbar: float
    e_adc: float
    e_total: float
    ratio_vs_baseline: float = float("nan")


def energy(model, stats, baseline=None):
    """Energy of the steps recorded in ``stats`` (a :class:`~xbarsim.xbar.MacStats`).

    ``baseline`` may be another ``MacStats`` or an ``EnergyReport`` for the
    same workload; ``ratio_vs_baseline`` is ``e_total / baseline.e_total``.
    """
    e_xbar = stats.xbar_energy * model.t_int
    e_adc = sum(n * model.k_adc * model.adc_base**b for b, n in stats.conversions.items())
    ratio = float("nan")
    if baseline is not None:
        if not isinstance(baseline, EnergyReport):
            if (
                baseline.workload is not None
                and stats.workload is not None
                and baseline.workload != stats.workload
            ):
                raise ValueError(f"workload mismatch: {stats.workload} vs {baseline.workload}")
            baseline = energy(model, baseline)
        ratio = (e_xbar + e_adc) / baseline.e_total if baseline.e_total else float("inf")
    return EnergyReport(float(e_xbar), float(e_adc), float(e_xbar + e_adc), ratio)


def mean_std(values):
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        return float("nan"), float("nan")
    return float(v.mean()), float(v.std(ddof=1)) if v.size > 1 else 0.0


def bootstrap_ci(values, confidence=0.95, n_boot=2000, seed=0, statistic=np.mean):
    """Percentile bootstrap interval of ``statistic`` over trials."""
    v = np.asarray(values, dtype=np.float64)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, v.size, size=(n_boot, v.size))
    stats = statistic(v[idx], axis=1)
    alpha = (1 - confidence) / 2
    lo, hi = np.quantile(stats, [alpha, 1 - alpha])
    return float(lo), float(hi)
