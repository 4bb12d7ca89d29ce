"""Multi-level-cell ReRAM crossbar MAC simulator with bias-controlled redundant
weight mapping and offset-compensated programming."""

from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .device import DeviceParams, ProgrammingScheme, sample_conductance, target_conductance
from .encode import EncodedPlanes, EncodingKind, area_cells, decode_planes, encode, effective_weights
from .estimators import CrossbarLinear, CrossbarMLPClassifier
from .harness import ResultRow, emit_csv, load_csv, report, run_sweep
from .metrics import EnergyModel, PerfModel, cycles, energy, mac_error_stats, speedup
from .quant import ActivationVector, QuantizedMatrix, apply_bias, quantize, slice_digits
from .schemes import PRESETS, SchemeStack
from .xbar import (AdcConfig, Compensation, MacConfig, MacStats, SubtractDomain, exact_matvec,
                   matvec, program_matrix)

__version__ = "0.1.0"
