import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from delmu.channel import ChannelGains, link_capacity, sample_channel, water_fill
from delmu.errors import DegenerateChannelError


def draw_matrix(seed, K):
    rng = np.random.default_rng(seed)
    return (rng.standard_normal((K, K)) + 1j * rng.standard_normal((K, K))) / np.sqrt(2.0)


class TestSample:
    def test_scalar_channel(self):
        h = draw_matrix(3, 1)[0, 0]
        g = sample_channel(3, 1)
        assert g.gains.shape == (1,)
        assert g.gains[0] == pytest.approx(abs(h) ** 2, rel=1e-12)

    @pytest.mark.parametrize("K", [2, 4, 8])
    def test_trace_identity(self, K):
        H = draw_matrix(11, K)
        g = sample_channel(11, K)
        assert g.gains.sum() == pytest.approx(np.sum(np.abs(H) ** 2), rel=1e-9)

    def test_deterministic_and_sorted(self):
        a, b = sample_channel(5, 6), sample_channel(5, 6)
        np.testing.assert_array_equal(a.gains, b.gains)
        assert np.all(np.diff(a.gains) <= 0)
        assert np.all(a.gains >= 0)

    def test_bad_antenna_count(self):
        with pytest.raises(ValueError):
            sample_channel(0, 0)

    def test_gains_type_sorts(self):
        g = ChannelGains([1.0, 3.0, 2.0])
        np.testing.assert_array_equal(g.gains, [3.0, 2.0, 1.0])
        assert g.antennas == 3


class TestWaterFill:
    def test_equal_gains_split_evenly(self):
        pa = water_fill([1.0, 1.0], 1.0, 2.0)
        np.testing.assert_allclose(pa.power, [1.0, 1.0], rtol=0, atol=1e-15)
        assert pa.water_level == pytest.approx(2.0, abs=1e-15)

    def test_single_channel_takes_all(self):
        pa = water_fill([4.0], 1.0, 1.0)
        np.testing.assert_allclose(pa.power, [1.0], atol=1e-15)
        assert pa.water_level == pytest.approx(1.25, abs=1e-15)

    def test_two_channel_hand_solution(self):
        # both active: 2 mu - (1/4 + 1) = 1  ->  mu = 1.125
        pa = water_fill([4.0, 1.0], 1.0, 1.0)
        assert abs(pa.power[0] - 0.875) <= 1e-12
        assert abs(pa.power[1] - 0.125) <= 1e-12
        assert abs(pa.water_level - 1.125) <= 1e-12

    def test_weak_channel_switched_off(self):
        # floor of the weak channel (100) sits above mu = 1 + 0.1
        pa = water_fill([10.0, 0.01], 1.0, 1.0)
        assert pa.power[1] == 0.0
        assert pa.power[0] == pytest.approx(1.0)

    def test_zero_gain_gets_no_power(self):
        pa = water_fill([0.0, 2.0, 0.0], 1.0, 3.0)
        np.testing.assert_allclose(pa.power, [0.0, 3.0, 0.0])

    def test_caller_order_preserved(self):
        pa = water_fill([1.0, 4.0], 1.0, 1.0)
        np.testing.assert_allclose(pa.power, [0.125, 0.875], atol=1e-12)

    def test_all_zero_is_degenerate(self):
        with pytest.raises(DegenerateChannelError):
            water_fill([0.0, 0.0], 1.0, 1.0)

    @pytest.mark.parametrize("noise,pmax", [(0.0, 1.0), (1.0, 0.0), (-1.0, 1.0)])
    def test_bad_scalars(self, noise, pmax):
        with pytest.raises(ValueError):
            water_fill([1.0], noise, pmax)

    @given(
        st.lists(st.floats(0.0, 100.0), min_size=1, max_size=12).filter(lambda g: max(g) > 1e-6),
        st.floats(1e-3, 10.0),
        st.floats(1e-3, 100.0),
    )
    def test_kkt(self, gains, noise, pmax):
        lam = np.array(gains)
        pa = water_fill(lam, noise, pmax)
        mu = pa.water_level
        assert abs(pa.power.sum() - pmax) <= 1e-9 * pmax
        assert np.all(pa.power >= 0)
        for lk, pk in zip(lam, pa.power):
            if pk > 0:
                assert abs(pk + noise / lk - mu) < 1e-9 * mu
            elif lk > 0:
                with np.errstate(over="ignore"):
                    assert noise / lk >= mu - 1e-9 * mu


class TestCapacity:
    def test_equal_gains(self):
        assert link_capacity([1.0, 1.0], 1.0, 2.0) == pytest.approx(2.0, abs=1e-15)

    def test_single_channel(self):
        assert link_capacity([4.0], 1.0, 1.0) == pytest.approx(math.log2(5.0), abs=1e-15)

    def test_two_channel(self):
        expected = math.log2(4.5) + math.log2(1.125)
        assert link_capacity([4.0, 1.0], 1.0, 1.0) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(2.3399, abs=1e-4)

    def test_bandwidth_scales(self):
        assert link_capacity([4.0], 1.0, 1.0, 1e6) == pytest.approx(1e6 * math.log2(5.0))

    def test_accepts_gain_object(self):
        g = sample_channel(1, 4)
        assert link_capacity(g, 1.0, 1.0) == link_capacity(g.gains, 1.0, 1.0)

    @given(st.floats(0.01, 50.0), st.floats(1e-3, 10.0), st.floats(1e-2, 10.0))
    def test_parallel_additivity(self, lam, noise, p):
        two = link_capacity([lam, lam], noise, 2 * p)
        one = link_capacity([lam], noise, p)
        assert two == pytest.approx(2 * one, rel=1e-12)

    @given(
        st.lists(st.floats(0.01, 50.0), min_size=1, max_size=8),
        st.floats(0.1, 5.0),
        st.floats(0.1, 10.0),
        st.floats(0.0, 5.0),
        st.integers(0, 7),
        st.floats(0.0, 5.0),
    )
    def test_monotone(self, gains, noise, pmax, dp, k, dl):
        base = link_capacity(gains, noise, pmax)
        assert link_capacity(gains, noise, pmax + dp) >= base - 1e-12 * base
        bumped = list(gains)
        bumped[k % len(gains)] += dl
        assert link_capacity(bumped, noise, pmax) >= base - 1e-12 * base
