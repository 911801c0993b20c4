import warnings

import pytest
from hypothesis import given, strategies as st

from offsim.phy import (
    DEFAULT_PHY, BitrateWarning, PhyConfig, check_network, link_bitrate, symbols_per_second,
)
from offsim.profiles import with_changes


def test_default_radio_configuration():
    # 106 RB, 12 subcarriers, 64QAM, 14 symbols x 2000 slots/s, rate 0.754
    assert link_bitrate(PhyConfig(106, 12, 6, 28000, 0.754)) == pytest.approx(161.13e6, abs=0.01e6)
    assert link_bitrate(PhyConfig(106, 12, 6, 28000, 0.754)) == pytest.approx(106 * 12 * 6 * 28000 * 0.754)
    assert link_bitrate(DEFAULT_PHY) == link_bitrate(PhyConfig(106, 12, 6, 28000, 0.754))


def test_trivial_cases():
    assert link_bitrate(PhyConfig(0, 12, 6, 28000, 0.754)) == 0
    assert link_bitrate(PhyConfig(1, 1, 1, 1, 1.0)) == 1


def test_symbols_per_second():
    assert symbols_per_second(0) == 14000
    assert symbols_per_second(1) == 28000
    with pytest.raises(ValueError):
        symbols_per_second(-1)


@pytest.mark.parametrize("kwargs", [dict(n_rb=-1), dict(n_rb=1, n_sub=-1),
                                    dict(n_rb=1, code_rate=0.0), dict(n_rb=1, code_rate=1.5)])
def test_invalid_config(kwargs):
    with pytest.raises(ValueError):
        PhyConfig(**kwargs)


small = st.integers(0, 300)


@given(small, small, st.integers(1, 10), st.integers(0, 100000),
       st.floats(0.01, 1.0), st.sampled_from(["n_rb", "n_sub", "n_bits", "n_sym"]),
       st.integers(2, 9))
def test_linear_in_each_parameter(n_rb, n_sub, n_bits, n_sym, cr, name, k):
    base = PhyConfig(n_rb, n_sub, n_bits, n_sym, cr)
    scaled = PhyConfig(**{**base.__dict__, name: getattr(base, name) * k})
    assert link_bitrate(scaled) == pytest.approx(k * link_bitrate(base), rel=1e-12)


@given(st.integers(1, 300), st.floats(0.01, 0.5), st.floats(1.0, 2.0))
def test_linear_in_code_rate(n_rb, cr, k):
    a = link_bitrate(PhyConfig(n_rb, code_rate=cr))
    b = link_bitrate(PhyConfig(n_rb, code_rate=cr * k))
    assert b == pytest.approx(k * a, rel=1e-12)


def test_fitted_rates_below_peak(paper):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert check_network(paper.network, DEFAULT_PHY)


def test_warns_above_peak(paper):
    fast = with_changes(paper, network={"b_ul": 500.0})
    with pytest.warns(BitrateWarning, match="network.b_ul"):
        assert not check_network(fast.network, DEFAULT_PHY)
