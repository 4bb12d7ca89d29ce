"""Fixed-point weights/activations, biased unsigned weights and MLC digit slicing."""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import (
    check_activations,
    check_bit_width,
    check_int_matrix,
    round_half_away,
    signed_range,
)


def _frozen(arr):
    arr = np.array(arr, dtype=np.int64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class QuantizedMatrix:
    """Integer weight matrix laid out rows = inputs, cols = outputs."""

    values: np.ndarray
    bit_width: int = 8
    signed: bool = True
    scale: float = 1.0

    def __post_init__(self):
        check_bit_width(self.bit_width)
        values = check_int_matrix(self.values)
        lo, hi = signed_range(self.bit_width, self.signed)
        if values.min() < lo or values.max() > hi:
            raise ValueError(
                f"entries exceed the {self.bit_width}-bit "
                f"{'signed' if self.signed else 'unsigned'} range [{lo}, {hi}]"
            )
        object.__setattr__(self, "values", _frozen(values))

    @property
    def shape(self):
        return self.values.shape

    @property
    def rows(self):
        return self.values.shape[0]

    @property
    def cols(self):
        return self.values.shape[1]

    def dequantize(self):
        return self.values * self.scale

    def to_dict(self):
        return {
            "rows": self.rows,
            "cols": self.cols,
            "bit_width": self.bit_width,
            "signed": self.signed,
            "scale": self.scale,
            "data": self.values.ravel().tolist(),
        }

    @classmethod
    def from_dict(cls, doc):
        rows, cols = int(doc["rows"]), int(doc["cols"])
        data = doc["data"]
        if len(data) != rows * cols:
            raise ValueError(f"data has {len(data)} entries, expected {rows}x{cols}")
        if any(not isinstance(v, int) or isinstance(v, bool) for v in data):
            raise ValueError("data must be an integer array")
        return cls(
            np.asarray(data, dtype=np.int64).reshape(rows, cols),
            bit_width=int(doc["bit_width"]),
            signed=bool(doc["signed"]),
            scale=float(doc.get("scale", 1.0)),
        )


@dataclass(frozen=True, eq=False)
class ActivationVector:
    """Unsigned activations; 2-D values hold a batch of samples."""

    values: np.ndarray
    bit_width: int = 8

    def __post_init__(self):
        arr = np.asarray(self.values)
        batch = check_activations(arr, bit_width=self.bit_width)
        object.__setattr__(self, "values", _frozen(batch[0] if arr.ndim == 1 else batch))


@dataclass(frozen=True, eq=False)
class DigitPlaneSet:
    """LSB-first base-L digit planes of a biased weight matrix."""

    planes: tuple
    levels: int
    bias: int = 0
    plane_weights: tuple = ()
    clip_count: int = 0
    bit_width: int = 8
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        planes = tuple(_frozen(p) for p in self.planes)
        if not planes:
            raise ValueError("at least one plane is required")
        shape = planes[0].shape
        for p in planes:
            if p.shape != shape:
                raise ValueError("all planes must share the source matrix shape")
            if p.min() < 0 or p.max() > self.levels - 1:
                raise ValueError(f"digit outside [0, {self.levels - 1}]")
        weights = self.plane_weights or tuple(self.levels**k for k in range(len(planes)))
        if len(weights) != len(planes):
            raise ValueError("one recombination weight per plane is required")
        object.__setattr__(self, "planes", planes)
        object.__setattr__(self, "plane_weights", tuple(int(w) for w in weights))

    @property
    def shape(self):
        return self.planes[0].shape

    @property
    def bits_per_cell(self):
        return int(math.log2(self.levels))

    def recombine(self):
        out = np.zeros(self.shape, dtype=np.int64)
        for w, p in zip(self.plane_weights, self.planes):
            out += w * p
        return out


def quantize(real_matrix, bit_width=8, signed=True):
    """Symmetric uniform quantization with round-half-away-from-zero.

    An all-zero matrix gets ``scale = 1``.
    """
    check_bit_width(bit_width)
    x = np.asarray(real_matrix, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.size == 0:
        raise ValueError("real_matrix must be a non-empty 2-D array")
    if not np.all(np.isfinite(x)):
        raise ValueError("real_matrix contains non-finite entries")
    if not signed and x.min() < 0:
        raise ValueError("unsigned quantization requires non-negative entries")
    lo, hi = signed_range(bit_width, signed)
    peak = np.abs(x).max()
    scale = float(peak / hi) if peak > 0 else 1.0
    q = np.clip(round_half_away(x / scale), lo, hi).astype(np.int64)
    return QuantizedMatrix(q, bit_width=bit_width, signed=signed, scale=scale)


def allowed_biases(bit_width):
    return (2 ** (bit_width - 1), 2 ** (bit_width - 2))


def apply_bias(q, bias, clip_negative=True):
    """Shift signed weights into the unsigned range.

    Returns ``(biased, clip_count)``; entries that stay negative after the
    shift are clipped to zero when ``clip_negative`` is set.
    """
    if not q.signed:
        raise ValueError("apply_bias expects a signed QuantizedMatrix")
    if bias not in allowed_biases(q.bit_width):
        raise ValueError(
            f"bias {bias} not allowed for {q.bit_width}-bit weights; "
            f"use one of {allowed_biases(q.bit_width)}"
        )
    biased = q.values + int(bias)
    negative = biased < 0
    clip_count = int(negative.sum())
    if clip_count and not clip_negative:
        raise ValueError(f"{clip_count} weights fall below -{bias} and clipping is disabled")
    return np.where(negative, 0, biased), clip_count


def digit_count(bit_width, bits_per_cell):
    return -(-bit_width // bits_per_cell)


def slice_digits(biased_matrix, bits_per_cell, bit_width=8, bias=0, clip_count=0):
    """Split unsigned values into LSB-first base-2^bits_per_cell digits.

    Widths not divisible by ``bits_per_cell`` get zero-valued leading digits.
    """
    if not 1 <= bits_per_cell <= 8:
        raise ValueError(f"bits_per_cell must be in [1, 8], got {bits_per_cell}")
    values = check_int_matrix(biased_matrix, name="biased_matrix")
    if values.min() < 0 or values.max() > 2**bit_width - 1:
        raise ValueError(f"biased entries must lie in [0, {2**bit_width - 1}]")
    levels = 2**bits_per_cell
    planes = []
    rest = values.copy()
    for _ in range(digit_count(bit_width, bits_per_cell)):
        planes.append(rest % levels)
        rest //= levels
    return DigitPlaneSet(
        tuple(planes), levels, bias=int(bias), clip_count=int(clip_count), bit_width=bit_width
    )


def bit_planes(a, bit_width=None):
    """LSB-first list of 0/1 arrays; works on a vector or a batch."""
    if isinstance(a, ActivationVector):
        values, bits = a.values, a.bit_width
    else:
        values = np.asarray(a, dtype=np.int64)
        bits = bit_width or 8
    return [(values >> b) & 1 for b in range(bits)]


def save_matrix(q, path):
    with open(path, "w") as fh:
        json.dump(q.to_dict(), fh)


def load_matrix(path):
    with open(path) as fh:
        return QuantizedMatrix.from_dict(json.load(fh))


def save_activations(a, path):
    values = np.atleast_2d(a.values)
    doc = {
        "rows": int(values.shape[0]),
        "cols": int(values.shape[1]),
        "bit_width": a.bit_width,
        "signed": False,
        "data": values.ravel().tolist(),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_activations(path):
    """Activation files use the matrix layout with one sample per row."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("signed"):
        raise ValueError("activation files must be unsigned")
    values = np.asarray(doc["data"], dtype=np.int64).reshape(int(doc["rows"]), int(doc["cols"]))
    return ActivationVector(values, bit_width=int(doc["bit_width"]))
