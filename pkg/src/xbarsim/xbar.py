"""Bit-serial crossbar MAC: programming, bitline accumulation, ADC and shift-and-add.

Every plane of an encoded weight matrix lives in its own array, tiled into
blocks of at most ``TILE`` x ``TILE`` cells. Each tile carries one extra
column of level-0 (HRS) cells that is subtracted from the data columns when
compensation is enabled, and optionally a column of level-1 cells that
counts active inputs for bias removal.
"""

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_activations, check_levels
from .device import ProgrammingScheme, sample_conductance, target_conductance

TILE = 128

# Half-code ties round up. The nudge keeps exact ties (e.g. N * g_hrs / q = k + 0.5
# at r = 7) from flipping on float summation noise.
_TIE_EPS = 1e-9


class Compensation(str, enum.Enum):
    NONE = "none"
    IAC_SUBTRACT = "iac_subtract"
    VECOM_SUBTRACT = "vecom_subtract"


class SubtractDomain(str, enum.Enum):
    ANALOG = "analog"  # HRS column current removed before the ADC
    DIGITAL = "digital"  # HRS column digitized on its own and its code removed


def adc_resolution(naw, bits_per_cell):
    return math.ceil(math.log2(naw)) + bits_per_cell


@dataclass(frozen=True)
class AdcConfig:
    resolution_bits: int
    lsb_current: float

    def __post_init__(self):
        if self.resolution_bits < 1:
            raise ValueError("ADC resolution must be at least 1 bit")
        if not self.lsb_current > 0:
            raise ValueError("ADC LSB current must be positive")

    @property
    def saturation_codes(self):
        return 2**self.resolution_bits

    @property
    def max_code(self):
        return self.saturation_codes - 1

    @classmethod
    def for_mac(cls, naw, params, scheme):
        """One code per MAC unit, ``ceil(log2(naw)) + bits_per_cell`` bits."""
        return cls(
            adc_resolution(naw, params.bits_per_cell),
            params.unit_conductance(scheme) * params.v_read,
        )


@dataclass(frozen=True)
class MacConfig:
    naw: int = 128
    compensation: Compensation = Compensation.NONE
    analog_bias: bool = False
    subtract: SubtractDomain = SubtractDomain.ANALOG

    def __post_init__(self):
        if not (isinstance(self.naw, (int, np.integer)) and 1 <= self.naw <= TILE):
            raise ValueError(f"naw must be an integer in [1, {TILE}], got {self.naw!r}")
        object.__setattr__(self, "compensation", Compensation(self.compensation))
        object.__setattr__(self, "subtract", SubtractDomain(self.subtract))


@dataclass(frozen=True, eq=False)
class CrossbarInstance:
    conductances: np.ndarray
    params: object
    scheme: ProgrammingScheme
    extra_hrs_column: np.ndarray = None
    bias_column: np.ndarray = None
    levels: np.ndarray = None

    @property
    def rows(self):
        return self.conductances.shape[0]

    @property
    def cols(self):
        return self.conductances.shape[1]


@dataclass
class MacStats:
    """Counters accumulated over analog steps; ``merge`` is associative."""

    conversions: dict = field(default_factory=dict)
    xbar_energy: float = 0.0
    saturations: int = 0
    analog_steps: int = 0
    workload: tuple = None

    def add_conversions(self, bits, count):
        self.conversions[bits] = self.conversions.get(bits, 0) + int(count)

    def merge(self, other):
        out = MacStats(dict(self.conversions), self.xbar_energy + other.xbar_energy,
                       self.saturations + other.saturations,
                       self.analog_steps + other.analog_steps, self.workload or other.workload)
        for bits, count in other.conversions.items():
            out.add_conversions(bits, count)
        return out

    @property
    def total_conversions(self):
        return sum(self.conversions.values())


def _readonly(arr):
    if arr is not None:
        arr = np.asarray(arr, dtype=np.float64)
        arr.setflags(write=False)
    return arr


def program_plane(plane, params, scheme, rng, hrs_column=True, bias_column=False):
    """Program one digit plane with write-and-verify to nominal plus log-normal error."""
    plane = check_levels(plane, params.levels)
    if plane.shape[0] > TILE or plane.shape[1] > TILE:
        raise ValueError(f"plane {plane.shape} exceeds the {TILE}x{TILE} tile")
    rows = plane.shape[0]
    g = sample_conductance(target_conductance(plane, params, scheme), params.sigma, rng)
    hrs = bias = None
    if hrs_column:
        nominal = np.full(rows, target_conductance(0, params, scheme))
        hrs = sample_conductance(nominal, params.sigma, rng)
    if bias_column:
        nominal = np.full(rows, target_conductance(1, params, scheme))
        bias = sample_conductance(nominal, params.sigma, rng)
    return CrossbarInstance(
        _readonly(g), params, ProgrammingScheme(scheme), _readonly(hrs), _readonly(bias),
        levels=plane,
    )


@dataclass(frozen=True)
class BitlineCurrents:
    data: np.ndarray
    hrs: np.ndarray = None
    bias: np.ndarray = None


def bitline_currents(x, active_rows):
    """Column currents for a 0/1 wordline pattern (vector or batch of vectors)."""
    active = np.asarray(active_rows)
    single = active.ndim == 1
    active = np.atleast_2d(active).astype(np.float64)
    if active.shape[1] != x.rows:
        raise ValueError(f"active_rows has length {active.shape[1]}, expected {x.rows}")
    if np.any((active != 0) & (active != 1)):
        raise ValueError("active_rows must be binary")
    v = x.params.v_read
    data = (active @ x.conductances) * v
    hrs = None if x.extra_hrs_column is None else (active @ x.extra_hrs_column) * v
    bias = None if x.bias_column is None else (active @ x.bias_column) * v
    if single:
        data = data[0]
        hrs = None if hrs is None else hrs[0]
        bias = None if bias is None else bias[0]
    return BitlineCurrents(data, hrs, bias)


def adc_convert(current, adc, stats=None):
    """Quantize currents to codes in ``[0, 2^B - 1]``; saturations are counted."""
    i = np.asarray(current, dtype=np.float64)
    if np.any(i < 0):
        raise ValueError("ADC input current must be non-negative")
    raw = np.floor(i / adc.lsb_current + 0.5 + _TIE_EPS).astype(np.int64)
    saturated = raw > adc.max_code
    if stats is not None:
        stats.saturations += int(saturated.sum())
        stats.add_conversions(adc.resolution_bits, i.size)
    codes = np.minimum(raw, adc.max_code)
    return codes if codes.ndim else int(codes)


def _grouped(arr, naw, axis):
    """Split ``axis`` into ``(groups, naw)`` with zero padding at the end."""
    n = arr.shape[axis]
    groups = -(-n // naw)
    pad = groups * naw - n
    if pad:
        widths = [(0, 0)] * arr.ndim
        widths[axis] = (0, pad)
        arr = np.pad(arr, widths)
    shape = arr.shape[:axis] + (groups, naw) + arr.shape[axis + 1:]
    return arr.reshape(shape), groups


def group_codes(x, input_bits, mac, adc=None, stats=None, trace=None, trace_key=None):
    """Per-group digital outputs, shape ``(groups, samples, cols)``.

    Rows are activated in contiguous blocks of ``mac.naw`` and every column of
    a block is converted by the same ADC. Unless compensation is ``NONE`` the
    HRS column is removed from each data column, either as a current before
    conversion (``SubtractDomain.ANALOG``) or as a separately digitized code.

    Returns ``(codes, bias_codes, hrs_codes)``; the latter two are ``None``
    when the corresponding column is not converted on its own.
    """
    bits = np.atleast_2d(np.asarray(input_bits))
    if bits.shape[1] != x.rows:
        raise ValueError(f"input has {bits.shape[1]} rows, crossbar has {x.rows}")
    if adc is None:
        adc = AdcConfig.for_mac(mac.naw, x.params, x.scheme)
    compensate = mac.compensation is not Compensation.NONE
    if compensate and x.extra_hrs_column is None:
        raise ValueError("compensation requires an extra HRS column")
    v = x.params.v_read
    n = bits.shape[0]

    b, groups = _grouped(bits.astype(np.float64), mac.naw, axis=1)  # (n, G, naw)
    b = b.transpose(1, 0, 2)  # (G, n, naw)
    g, _ = _grouped(np.asarray(x.conductances), mac.naw, axis=0)  # (G, naw, cols)
    data_i = np.matmul(b, g) * v
    energy = data_i.sum()
    hrs_i = hrs_c = bias_i = bias_c = None
    if compensate:
        hcol, _ = _grouped(np.asarray(x.extra_hrs_column), mac.naw, axis=0)
        hrs_i = np.einsum("gnk,gk->gn", b, hcol) * v
        energy += hrs_i.sum()
    analog = compensate and mac.subtract is SubtractDomain.ANALOG
    if analog:
        codes = adc_convert(np.maximum(data_i - hrs_i[:, :, None], 0.0), adc, stats)
    else:
        codes = adc_convert(data_i, adc, stats)
        if compensate:
            hrs_c = adc_convert(hrs_i, adc, stats)
            codes = codes - hrs_c[:, :, None]
    if mac.analog_bias and x.bias_column is not None:
        bcol, _ = _grouped(np.asarray(x.bias_column), mac.naw, axis=0)
        bias_i = np.einsum("gnk,gk->gn", b, bcol) * v
        energy += bias_i.sum()
        bias_c = adc_convert(np.maximum(bias_i - hrs_i, 0.0) if analog else bias_i, adc, stats)
    if stats is not None:
        stats.xbar_energy += float(energy) * v
        stats.analog_steps += groups * n
    if trace is not None:
        _record(trace, trace_key or {}, data_i, codes, hrs_i, hrs_c, bias_i, bias_c)
    return codes, bias_c, hrs_c


def _record(trace, key, data_i, codes, hrs_i, hrs_c, bias_i, bias_c):
    groups, n, cols = data_i.shape
    for gi in range(groups):
        for s in range(n):
            base = dict(key, group=gi, sample=s)
            for c in range(cols):
                trace.append(dict(base, column=c, kind="data",
                                  current=float(data_i[gi, s, c]), code=int(codes[gi, s, c])))
            if hrs_i is not None:
                code = -1 if hrs_c is None else int(hrs_c[gi, s])
                trace.append(dict(base, column=-1, kind="hrs", current=float(hrs_i[gi, s]), code=code))
            if bias_i is not None:
                trace.append(dict(base, column=-2, kind="bias",
                                  current=float(bias_i[gi, s]), code=int(bias_c[gi, s])))


def mac_plane(x, input_bits, mac, adc=None, stats=None):
    """Integer MAC of one binary input plane against one programmed digit plane."""
    codes, _, _ = group_codes(x, input_bits, mac, adc, stats)
    out = codes.sum(axis=0)
    return out[0] if np.asarray(input_bits).ndim == 1 else out


def offset_deficit_model(plane, input_bits, params, scheme, naw):
    """Analytic shortfall in codes per group after HRS-column subtraction at sigma = 0.

    Each active cell contributes ``(target - g_hrs) / q`` instead of its level;
    for proportional targets that is ``g_hrs / q`` short per unclamped
    non-zero level, and zero short for offset-compensated targets.
    """
    levels = check_levels(plane, params.levels)
    q = params.unit_conductance(scheme)
    target = np.asarray(target_conductance(levels, params, scheme))
    per_cell = levels - (target - params.g_hrs) / q
    bits = np.atleast_2d(np.asarray(input_bits)).astype(np.float64)
    b, _ = _grouped(bits, naw, axis=1)
    pc, _ = _grouped(per_cell, naw, axis=0)
    return np.matmul(b.transpose(1, 0, 2), pc)


@dataclass(frozen=True, eq=False)
class ProgrammedMatrix:
    """An encoded weight matrix programmed as per-plane, per-tile crossbars."""

    encoded: object
    params: object
    scheme: ProgrammingScheme
    tiles: tuple  # tiles[plane] -> tuple of (row_slice, col_slice, CrossbarInstance)

    @property
    def rows(self):
        return self.encoded.shape[0]

    @property
    def cols(self):
        return self.encoded.shape[1]


def _tile_slices(n, size):
    return [slice(s, min(s + size, n)) for s in range(0, n, size)]


def program_matrix(encoded, params, scheme, rng, analog_bias=False, tile=TILE):
    """Program every plane of ``encoded``; order is plane, row tile, column tile."""
    if encoded.planes.levels != params.levels:
        raise ValueError(
            f"planes use {encoded.planes.levels} levels but the device has {params.levels}"
        )
    rows, cols = encoded.shape
    tiles = []
    for k, plane in enumerate(encoded.planes.planes):
        plane_tiles = []
        for rs in _tile_slices(rows, tile):
            for ci, cs in enumerate(_tile_slices(cols, tile)):
                bias_col = analog_bias and k == 0 and ci == 0
                x = program_plane(plane[rs, cs], params, scheme, rng, bias_column=bias_col)
                plane_tiles.append((rs, cs, x))
        tiles.append(tuple(plane_tiles))
    return ProgrammedMatrix(encoded, params, ProgrammingScheme(scheme), tuple(tiles))


def matvec(pm, a, mac, input_bits=8, stats=None, trace=None):
    """Signed MAC ``W^T a`` through the analog pipeline.

    ``a`` is a vector or an ``(n_samples, rows)`` batch of unsigned
    activations. Bias is removed digitally as ``bias * sum(a)`` unless
    ``mac.analog_bias`` is set, in which case the level-1 column's count is
    used instead.
    """
    acts = check_activations(a, rows=pm.rows, bit_width=input_bits)
    single = np.asarray(a).ndim == 1
    n = acts.shape[0]
    weights = pm.encoded.plane_weights
    acc = np.zeros((n, pm.cols), dtype=np.int64)
    ones = np.zeros(n, dtype=np.int64)
    adc = AdcConfig.for_mac(mac.naw, pm.params, pm.scheme)
    if stats is not None and stats.workload is None:
        stats.workload = (pm.rows, pm.cols, n, input_bits)
    for bit in range(input_bits):
        xbits = (acts >> bit) & 1
        for k, plane_tiles in enumerate(pm.tiles):
            for ti, (rs, cs, x) in enumerate(plane_tiles):
                key = None if trace is None else {"bit": bit, "plane": k, "tile": ti}
                codes, bias_c, hrs_c = group_codes(x, xbits[:, rs], mac, adc, stats, trace, key)
                acc[:, cs] += (weights[k] << bit) * codes.sum(axis=0)
                if bias_c is not None:
                    count = bias_c if hrs_c is None else bias_c - hrs_c
                    ones += count.sum(axis=0) << bit
    if mac.analog_bias:
        if not any(x.bias_column is not None for t in pm.tiles for _, _, x in t):
            raise ValueError("analog_bias requires programming with analog_bias=True")
        bias_term = pm.encoded.bias * ones
    else:
        bias_term = pm.encoded.bias * acts.sum(axis=1)
    out = acc - bias_term[:, None]
    return out[0] if single else out


def exact_matvec(weights, a):
    """Integer oracle ``W^T a`` in int64."""
    w = np.asarray(weights, dtype=np.int64)
    return np.asarray(a, dtype=np.int64) @ w
