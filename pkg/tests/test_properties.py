import math

import numpy as np
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import encode_weight, int_matvec
from xbarsim.device import DeviceParams, ProgrammingScheme, target_conductance
from xbarsim.encode import decode_planes, effective_weights, encode
from xbarsim.metrics import PerfModel, cycles, speedup
from xbarsim.quant import QuantizedMatrix, slice_digits
from xbarsim.xbar import Compensation, MacConfig, exact_matvec, matvec, program_matrix

OFFSET = ProgrammingScheme.OFFSET_COMPENSATED
PROP = ProgrammingScheme.PROPORTIONAL

shapes = st.tuples(st.integers(1, 40), st.integers(1, 6))
kinds = st.sampled_from(["conventional", "vecom"])


@st.composite
def int8_matrices(draw):
    shape = draw(shapes)
    return draw(arrays(np.int64, shape, elements=st.integers(-128, 127)))


@given(int8_matrices(), kinds, st.integers(1, 4))
def test_decode_inverts_encode(values, kind, bpc):
    q = QuantizedMatrix(values)
    biased, bias = decode_planes(encode(q, kind, bpc))
    assert np.array_equal(biased - bias, effective_weights(q, kind))


@given(int8_matrices(), kinds)
def test_planes_match_scalar_oracle(values, kind):
    e = encode(QuantizedMatrix(values), kind)
    r, c = values.shape
    i, j = r // 2, c // 2
    digits, weights, bias, _ = encode_weight(int(values[i, j]), kind)
    assert [int(p[i, j]) for p in e.planes.planes] == digits and list(e.plane_weights) == weights


@given(int8_matrices())
def test_clip_count_counts_below_floor(values):
    assert encode(QuantizedMatrix(values), "vecom").clip_count == int((values < -64).sum())


@given(arrays(np.int64, (3, 5), elements=st.integers(0, 255)), st.integers(1, 8))
def test_slice_recombine(values, bpc):
    assert np.array_equal(slice_digits(values, bpc).recombine(), values)


@given(st.integers(1, 6), st.floats(1.5, 1e6), st.sampled_from([OFFSET, PROP]))
def test_targets_monotone_and_bounded(bpc, r, scheme):
    p = DeviceParams(r_ratio=r, bits_per_cell=bpc)
    g = target_conductance(np.arange(p.levels), p, scheme)
    assert np.all(np.diff(g) >= 0)
    assert math.isclose(g[0], p.g_hrs)
    assert math.isclose(g[-1], p.g_max)


@given(int8_matrices(), st.sampled_from([1, 3, 8, 32, 128]), st.sampled_from([4.0, 7.0, 63.0, 1000.0]),
       st.integers(0, 2**32 - 1))
def test_offset_stack_exact_at_zero_sigma(values, naw, r, seed):
    rng = np.random.default_rng(seed)
    q = QuantizedMatrix(values)
    a = rng.integers(0, 256, (2, q.rows))
    pm = program_matrix(encode(q, "vecom"), DeviceParams(r_ratio=r), OFFSET, rng)
    out = matvec(pm, a, MacConfig(naw, Compensation.VECOM_SUBTRACT))
    ref = effective_weights(q, "vecom")
    assert out[0].tolist() == int_matvec(ref.tolist(), a[0].tolist())
    assert np.array_equal(out, exact_matvec(ref, a))


@given(st.integers(1, 512), st.integers(0, 7), st.integers(1, 8))
def test_speedup_identity_and_positive_cycles(rows, k, bits):
    m = PerfModel(rows=rows, naw=2**k, input_bits=bits)
    assert speedup(m, m) == 1.0 and cycles(m) > 0
