"""Weight-to-plane mapping schemes and crossbar area accounting.

Two mappings are supported:

* ``CONVENTIONAL``: bias by ``2^(b-1)`` so every signed weight becomes
  unsigned, then slice into digits.
* ``VECOM``: bias by ``2^(b-2)`` and clip what stays negative, slice, then
  split the second-most-significant 2-bit digit ``v`` into an origin digit
  ``a`` in {0, 1} and a redundant digit ``r`` in {0, 1, 2} with
  ``v = 3a + r``. The origin plane is recombined with three times the
  redundant plane's significance.
"""

import enum
import json
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .quant import DigitPlaneSet, QuantizedMatrix, apply_bias, digit_count, slice_digits


class EncodingError(ValueError):
    """Encoded planes violate their structural invariants."""


class EncodingKind(str, enum.Enum):
    CONVENTIONAL = "conventional"
    VECOM = "vecom"


@dataclass(frozen=True)
class EncodingScheme:
    kind: EncodingKind
    bias: int
    redundant: bool

    @classmethod
    def for_kind(cls, kind, bit_width=8, bits_per_cell=2):
        kind = EncodingKind(kind)
        if kind is EncodingKind.CONVENTIONAL:
            return cls(kind, 2 ** (bit_width - 1), False)
        # the split is only defined for 2-bit digits
        return cls(kind, 2 ** (bit_width - 2), bits_per_cell == 2)


@dataclass(frozen=True, eq=False)
class EncodedPlanes:
    planes: DigitPlaneSet
    scheme: EncodingScheme
    origin_index: int = None
    redundant_index: int = None

    @property
    def bias(self):
        return self.planes.bias

    @property
    def clip_count(self):
        return self.planes.clip_count

    @property
    def plane_weights(self):
        return self.planes.plane_weights

    @property
    def shape(self):
        return self.planes.shape

    def __len__(self):
        return len(self.planes.planes)

    def to_dict(self):
        rows, cols = self.shape
        return {
            "scheme": self.scheme.kind.value,
            "bias": self.bias,
            "redundant": self.scheme.redundant,
            "bit_width": self.planes.bit_width,
            "bits_per_cell": self.planes.bits_per_cell,
            "rows": rows,
            "cols": cols,
            "plane_weights": list(self.plane_weights),
            "clip_count": self.clip_count,
            "origin_index": self.origin_index,
            "redundant_index": self.redundant_index,
            "planes": [p.ravel().tolist() for p in self.planes.planes],
        }

    @classmethod
    def from_dict(cls, doc):
        shape = (int(doc["rows"]), int(doc["cols"]))
        planes = DigitPlaneSet(
            tuple(np.asarray(p, dtype=np.int64).reshape(shape) for p in doc["planes"]),
            2 ** int(doc["bits_per_cell"]),
            bias=int(doc["bias"]),
            plane_weights=tuple(doc["plane_weights"]),
            clip_count=int(doc["clip_count"]),
            bit_width=int(doc["bit_width"]),
        )
        scheme = EncodingScheme(EncodingKind(doc["scheme"]), int(doc["bias"]), bool(doc["redundant"]))
        enc = cls(planes, scheme, doc.get("origin_index"), doc.get("redundant_index"))
        validate_planes(enc)
        return enc


def encode_conventional(q, bits_per_cell=2):
    scheme = EncodingScheme.for_kind(EncodingKind.CONVENTIONAL, q.bit_width, bits_per_cell)
    biased, clipped = apply_bias(q, scheme.bias, clip_negative=False)
    planes = slice_digits(biased, bits_per_cell, q.bit_width, bias=scheme.bias, clip_count=clipped)
    return EncodedPlanes(planes, scheme)


def split_redundant(digits):
    """Decompose 2-bit digits as ``3 * origin + redundant``."""
    digits = np.asarray(digits, dtype=np.int64)
    origin = (digits == 3).astype(np.int64)
    return origin, digits - 3 * origin


def encode_vecom(q, bits_per_cell=2):
    scheme = EncodingScheme.for_kind(EncodingKind.VECOM, q.bit_width, bits_per_cell)
    biased, clipped = apply_bias(q, scheme.bias, clip_negative=True)
    sliced = slice_digits(biased, bits_per_cell, q.bit_width, bias=scheme.bias, clip_count=clipped)
    n = len(sliced.planes)
    if not scheme.redundant or n < 2:
        return EncodedPlanes(sliced, EncodingScheme(scheme.kind, scheme.bias, False))

    split = n - 2
    origin, redun = split_redundant(sliced.planes[split])
    planes = list(sliced.planes)
    weights = list(sliced.plane_weights)
    planes[split] = origin
    weights[split] = 3 * sliced.plane_weights[split]
    planes.append(redun)
    weights.append(sliced.plane_weights[split])
    out = DigitPlaneSet(
        tuple(planes),
        sliced.levels,
        bias=scheme.bias,
        plane_weights=tuple(weights),
        clip_count=clipped,
        bit_width=q.bit_width,
    )
    return EncodedPlanes(out, scheme, origin_index=split, redundant_index=n)


def encode(q, kind, bits_per_cell=2):
    if EncodingKind(kind) is EncodingKind.VECOM:
        return encode_vecom(q, bits_per_cell)
    return encode_conventional(q, bits_per_cell)


def validate_planes(e):
    levels = e.planes.levels
    for k, p in enumerate(e.planes.planes):
        if p.min() < 0 or p.max() > levels - 1:
            raise EncodingError(f"plane {k} holds digits outside [0, {levels - 1}]")
    if e.origin_index is not None:
        if e.planes.planes[e.origin_index].max() > 1:
            raise EncodingError("origin plane must hold only 0/1 digits")
        if e.planes.planes[e.redundant_index].max() > 2:
            raise EncodingError("redundant plane must hold digits in {0, 1, 2}")


def decode_planes(e):
    """Return ``(biased_matrix, bias)``; ``biased - bias`` is the clipped weight."""
    validate_planes(e)
    return e.planes.recombine(), e.bias


def effective_weights(q, kind):
    """Signed weights the crossbar actually stores (clip floor applied for VECOM)."""
    values = q.values if isinstance(q, QuantizedMatrix) else np.asarray(q, dtype=np.int64)
    if EncodingKind(kind) is EncodingKind.VECOM:
        bit_width = q.bit_width if isinstance(q, QuantizedMatrix) else 8
        return np.maximum(values, -(2 ** (bit_width - 2)))
    return values


def plane_count(kind, bit_width=8, bits_per_cell=2):
    n = digit_count(bit_width, bits_per_cell)
    scheme = EncodingScheme.for_kind(kind, bit_width, bits_per_cell)
    return n + 1 if scheme.redundant and n >= 2 else n


@dataclass(frozen=True)
class AreaReport:
    cells: int
    baseline_cells: int
    overhead: float
    overhead_exact: Fraction


def area_cells(scheme, bit_width=8, bits_per_cell=2, rows=128, extra_columns=0, cols=128):
    """Cell count of one ``rows x cols`` weight tile and its overhead.

    The baseline is the conventional mapping at the same precision with no
    extra columns. ``extra_columns`` are added per plane array.
    """
    kind = scheme.kind if isinstance(scheme, EncodingScheme) else EncodingKind(scheme)
    cells = plane_count(kind, bit_width, bits_per_cell) * rows * (cols + extra_columns)
    baseline = plane_count(EncodingKind.CONVENTIONAL, bit_width, bits_per_cell) * rows * cols
    ratio = Fraction(cells, baseline) - 1
    return AreaReport(cells, baseline, float(ratio), ratio)


def save_planes(e, path):
    with open(path, "w") as fh:
        json.dump(e.to_dict(), fh, indent=1)


def load_planes(path):
    with open(path) as fh:
        return EncodedPlanes.from_dict(json.load(fh))
