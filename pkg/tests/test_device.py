import math

import numpy as np
import pytest

from oracles import offset_target, proportional_target
from xbarsim.device import (
    DeviceParams,
    ProgrammingScheme,
    cell_current,
    sample_conductance,
    target_conductance,
)

OFFSET = ProgrammingScheme.OFFSET_COMPENSATED
PROP = ProgrammingScheme.PROPORTIONAL


def test_targets_hand_values():
    p = DeviceParams(r_ratio=10)
    assert target_conductance(np.arange(4), p, OFFSET) == pytest.approx([0.1, 0.4, 0.7, 1.0])
    assert target_conductance(np.arange(4), p, PROP) == pytest.approx([0.1, 1 / 3, 2 / 3, 1.0])


@pytest.mark.parametrize("r", [7, 30, 300, 1e9, math.inf])
@pytest.mark.parametrize("bpc", [1, 2, 3, 4, 6])
def test_targets_match_oracle(r, bpc):
    p = DeviceParams(r_ratio=r, bits_per_cell=bpc)
    for v in range(p.levels):
        assert target_conductance(v, p, OFFSET) == pytest.approx(offset_target(v, 1.0, r, p.levels))
        assert target_conductance(v, p, PROP) == pytest.approx(proportional_target(v, 1.0, r, p.levels))


def test_ideal_off_state_schemes_agree():
    p = DeviceParams(r_ratio=math.inf)
    levels = np.arange(4)
    assert np.array_equal(target_conductance(levels, p, OFFSET), target_conductance(levels, p, PROP))
    assert target_conductance(0, p, OFFSET) == 0.0


def test_target_rejects_out_of_range_level():
    with pytest.raises(ValueError):
        target_conductance(4, DeviceParams(), OFFSET)


@pytest.mark.parametrize("kwargs", [{"r_ratio": 1.0}, {"bits_per_cell": 7}, {"bits_per_cell": 0},
                                    {"sigma": -0.1}, {"g_max": 0}, {"v_read": 0}])
def test_params_validated(kwargs):
    with pytest.raises(ValueError):
        DeviceParams(**kwargs)


def test_params_dict_round_trip():
    p = DeviceParams(r_ratio=30, sigma=0.04, bits_per_cell=3)
    assert DeviceParams.from_dict(p.to_dict()) == p
    with pytest.raises(ValueError):
        DeviceParams.from_dict({"bogus": 1})


def test_sigma_zero_is_exact_and_consumes_nothing():
    rng = np.random.default_rng(0)
    state = rng.bit_generator.state
    assert sample_conductance(0.4, 0.0, rng) == 0.4
    assert rng.bit_generator.state == state


def test_lognormal_moments():
    g = sample_conductance(np.ones(100_000), 0.2, np.random.default_rng(7))
    assert np.median(g) == pytest.approx(1.0, rel=0.01)
    assert g.mean() == pytest.approx(math.exp(0.02), rel=0.01)


def test_sample_rejects_negative():
    with pytest.raises(ValueError):
        sample_conductance(-1.0, 0.1, np.random.default_rng(0))


def test_cell_current():
    assert cell_current(0.7, 1.0) == pytest.approx(0.7)
    assert cell_current(0.0, 3.0) == 0.0
    assert cell_current(0.7, 0.0) == 0.0
