import math

import numpy as np
import pytest

from oracles import column_current, iac_deficit_codes, int_matvec
from xbarsim.device import DeviceParams, ProgrammingScheme
from xbarsim.encode import effective_weights, encode
from xbarsim.quant import QuantizedMatrix
from xbarsim.xbar import (
    AdcConfig,
    Compensation,
    MacConfig,
    MacStats,
    SubtractDomain,
    adc_convert,
    adc_resolution,
    bitline_currents,
    exact_matvec,
    group_codes,
    mac_plane,
    matvec,
    offset_deficit_model,
    program_matrix,
    program_plane,
)

OFFSET = ProgrammingScheme.OFFSET_COMPENSATED
PROP = ProgrammingScheme.PROPORTIONAL


def column(levels, r, scheme):
    plane = np.array(levels).reshape(-1, 1)
    return program_plane(plane, DeviceParams(r_ratio=r), scheme, np.random.default_rng(0))


def test_offset_bitline_example():
    x = column([3, 2, 1, 0], 10, OFFSET)
    cur = bitline_currents(x, np.ones(4))
    assert cur.data[0] == pytest.approx(2.2)
    assert cur.hrs == pytest.approx(0.4)
    assert cur.data[0] - cur.hrs == pytest.approx(1.8)


def test_proportional_bitline_undercounts():
    x = column([3, 2, 1, 0], 10, PROP)
    cur = bitline_currents(x, np.ones(4))
    assert cur.data[0] == pytest.approx(2.1)
    assert cur.data[0] - cur.hrs == pytest.approx(1.7)


def test_bitline_matches_loop_oracle(rng):
    p = DeviceParams(r_ratio=30, sigma=0.1)
    x = program_plane(rng.integers(0, 4, (64, 8)), p, OFFSET, rng)
    active = rng.integers(0, 2, 64)
    cur = bitline_currents(x, active)
    for c in range(8):
        assert cur.data[c] == pytest.approx(column_current(x.conductances[:, c], active), rel=1e-12)


def test_no_active_rows():
    x = column([3, 2, 1, 0], 10, OFFSET)
    cur = bitline_currents(x, np.zeros(4))
    assert cur.data[0] == 0 and cur.hrs == 0


def test_bitline_rejects_bad_pattern():
    x = column([3, 2, 1, 0], 10, OFFSET)
    with pytest.raises(ValueError):
        bitline_currents(x, np.ones(3))
    with pytest.raises(ValueError):
        bitline_currents(x, np.array([0, 2, 1, 0]))


def test_adc_examples():
    adc = AdcConfig(4, 0.3)
    stats = MacStats()
    assert adc_convert(1.8, adc, stats) == 6
    assert adc_convert(0.0, adc, stats) == 0
    assert adc_convert(100.0, adc, stats) == 15
    assert stats.saturations == 1 and stats.conversions == {4: 3}
    with pytest.raises(ValueError):
        adc_convert(-0.1, adc)


def test_adc_resolution():
    assert adc_resolution(128, 2) == 9
    assert adc_resolution(8, 2) == 5
    assert adc_resolution(1, 2) == 2
    assert adc_resolution(100, 3) == 10


def test_mac_config_rejects_bad_naw():
    for naw in (0, 129, 2.5):
        with pytest.raises(ValueError):
            MacConfig(naw)


def test_program_plane_sigma_zero():
    p = DeviceParams(r_ratio=10)
    x = program_plane(np.zeros((5, 3), dtype=int), p, OFFSET, np.random.default_rng(0))
    assert np.all(x.conductances == pytest.approx(0.1))
    with pytest.raises(ValueError):
        program_plane(np.zeros((129, 1), dtype=int), p, OFFSET, np.random.default_rng(0))


def test_program_plane_deterministic(rng):
    plane = rng.integers(0, 4, (32, 16))
    p = DeviceParams(sigma=0.1)
    a = program_plane(plane, p, OFFSET, np.random.default_rng(42))
    b = program_plane(plane, p, OFFSET, np.random.default_rng(42))
    assert np.array_equal(a.conductances, b.conductances)
    assert np.array_equal(a.extra_hrs_column, b.extra_hrs_column)


def single_matvec(w, a, kind, r=math.inf, **mac):
    scheme = OFFSET if kind == "vecom" else PROP
    comp = Compensation.VECOM_SUBTRACT if kind == "vecom" else Compensation.NONE
    pm = program_matrix(encode(QuantizedMatrix(np.array(w)), kind), DeviceParams(r_ratio=r), scheme,
                        np.random.default_rng(0), analog_bias=mac.get("analog_bias", False))
    return matvec(pm, np.array(a), MacConfig(compensation=comp, **mac))


def test_matvec_examples():
    assert single_matvec([[14]], [5], "conventional").tolist() == [70]
    assert single_matvec([[-70]], [3], "vecom").tolist() == [-192]


@pytest.mark.parametrize("naw", [1, 2, 4, 8, 16, 32, 64, 128])
@pytest.mark.parametrize("kind", ["conventional", "vecom"])
def test_ideal_equivalence_all_naw(kind, naw):
    rng = np.random.default_rng(naw)
    q = QuantizedMatrix(rng.integers(-128, 128, (128, 16)))
    a = rng.integers(0, 256, (3, 128))
    scheme = OFFSET if kind == "vecom" else PROP
    comp = Compensation.VECOM_SUBTRACT if kind == "vecom" else Compensation.NONE
    pm = program_matrix(encode(q, kind), DeviceParams(r_ratio=1e6), scheme, rng)
    out = matvec(pm, a, MacConfig(naw, comp))
    ref = effective_weights(q, kind)
    for s in range(3):
        assert out[s].tolist() == int_matvec(ref.tolist(), a[s].tolist())


@pytest.mark.parametrize("subtract", list(SubtractDomain))
@pytest.mark.parametrize("r", [4, 7, 30, 1000])
def test_offset_exact_both_subtract_domains(r, subtract, rng):
    q = QuantizedMatrix(rng.integers(-128, 128, (128, 16)))
    a = rng.integers(0, 256, (4, 128))
    pm = program_matrix(encode(q, "vecom"), DeviceParams(r_ratio=r), OFFSET, rng)
    out = matvec(pm, a, MacConfig(128, Compensation.VECOM_SUBTRACT, subtract=subtract))
    assert np.array_equal(out, exact_matvec(effective_weights(q, "vecom"), a))


def test_matvec_tiles_larger_matrices(rng):
    q = QuantizedMatrix(rng.integers(-128, 128, (200, 150)))
    a = rng.integers(0, 256, (2, 200))
    pm = program_matrix(encode(q, "vecom"), DeviceParams(r_ratio=7), OFFSET, rng)
    assert len(pm.tiles[0]) == 4
    out = matvec(pm, a, MacConfig(64, Compensation.VECOM_SUBTRACT))
    assert np.array_equal(out, exact_matvec(effective_weights(q, "vecom"), a))


def test_analog_bias_column_exact(rng):
    q = QuantizedMatrix(rng.integers(-128, 128, (128, 8)))
    a = rng.integers(0, 256, (3, 128))
    pm = program_matrix(encode(q, "vecom"), DeviceParams(r_ratio=30), OFFSET, rng, analog_bias=True)
    out = matvec(pm, a, MacConfig(32, Compensation.VECOM_SUBTRACT, analog_bias=True))
    assert np.array_equal(out, exact_matvec(effective_weights(q, "vecom"), a))


def test_analog_bias_requires_programmed_column(rng):
    q = QuantizedMatrix(rng.integers(-128, 128, (8, 2)))
    pm = program_matrix(encode(q, "vecom"), DeviceParams(), OFFSET, rng)
    with pytest.raises(ValueError):
        matvec(pm, np.ones(8, dtype=int), MacConfig(8, Compensation.VECOM_SUBTRACT, analog_bias=True))


def test_compensation_needs_hrs_column(rng):
    x = program_plane(np.ones((4, 2), dtype=int), DeviceParams(), OFFSET, rng, hrs_column=False)
    with pytest.raises(ValueError):
        mac_plane(x, np.ones(4), MacConfig(4, Compensation.VECOM_SUBTRACT))


def test_iac_strictly_undercounts_with_mid_levels(rng):
    p = DeviceParams(r_ratio=7)
    plane = rng.integers(1, 3, (128, 16))
    bits = np.ones(128)
    x = program_plane(plane, p, PROP, rng)
    got = mac_plane(x, bits, MacConfig(128, Compensation.IAC_SUBTRACT))
    assert np.all(got < plane.sum(axis=0))


def test_deficit_model_matches_count_oracle(rng):
    p = DeviceParams(r_ratio=7)
    plane = rng.integers(0, 4, (128, 4))
    bits = rng.integers(0, 2, (3, 128))
    model = offset_deficit_model(plane, bits, p, PROP, 32)
    for g in range(4):
        rows = slice(32 * g, 32 * (g + 1))
        for s in range(3):
            for c in range(4):
                expect = iac_deficit_codes(plane[rows, c], bits[s, rows], 1.0, 7, 4)
                assert model[g, s, c] == pytest.approx(expect)
    assert np.all(offset_deficit_model(plane, bits, p, OFFSET, 32) == pytest.approx(0.0, abs=1e-9))


def test_group_codes_short_last_group(rng):
    p = DeviceParams(r_ratio=math.inf)
    plane = rng.integers(0, 4, (100, 3))
    x = program_plane(plane, p, PROP, rng)
    codes, _, _ = group_codes(x, np.ones(100), MacConfig(32))
    assert codes.shape == (4, 1, 3)
    assert np.array_equal(codes[3, 0], plane[96:].sum(axis=0))


def test_stats_and_energy_accounting(rng):
    p = DeviceParams(r_ratio=10)
    x = program_plane(np.full((8, 2), 3), p, OFFSET, rng)
    stats = MacStats()
    mac_plane(x, np.ones(8), MacConfig(4, Compensation.VECOM_SUBTRACT), stats=stats)
    assert stats.analog_steps == 2
    assert stats.conversions == {adc_resolution(4, 2): 2 * 2}
    assert stats.xbar_energy == pytest.approx(8 * 2 * 1.0 + 8 * 0.1)


def test_energy_doubles_with_conductance(rng):
    plane = rng.integers(0, 4, (16, 4))
    bits = rng.integers(0, 2, 16)
    e = []
    for g_max in (1.0, 2.0):
        s = MacStats()
        x = program_plane(plane, DeviceParams(g_max=g_max, r_ratio=10), OFFSET, np.random.default_rng(0))
        mac_plane(x, bits, MacConfig(16, Compensation.VECOM_SUBTRACT), stats=s)
        e.append(s.xbar_energy)
    assert e[1] == pytest.approx(2 * e[0])


def test_trace_records(rng):
    q = QuantizedMatrix(rng.integers(-128, 128, (16, 2)))
    pm = program_matrix(encode(q, "vecom"), DeviceParams(), OFFSET, rng)
    trace = []
    matvec(pm, rng.integers(0, 256, 16), MacConfig(8, Compensation.VECOM_SUBTRACT), trace=trace)
    # 8 bits x 5 planes x 2 groups x (2 data + 1 hrs)
    assert len(trace) == 8 * 5 * 2 * 3
    assert {r["kind"] for r in trace} == {"data", "hrs"}


def test_stats_merge_is_associative():
    a = MacStats({5: 2}, 1.0, 1, 3)
    b = MacStats({5: 1, 9: 4}, 2.0, 0, 1)
    c = MacStats({9: 1}, 0.5, 2, 2)
    left, right = a.merge(b).merge(c), a.merge(b.merge(c))
    assert left.conversions == right.conversions == {5: 3, 9: 5}
    assert left.xbar_energy == right.xbar_energy and left.saturations == right.saturations
