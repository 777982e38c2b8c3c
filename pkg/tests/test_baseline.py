import itertools
import math

import numpy as np
import pytest

from delmu.baseline import brute_force_solve, grid_size, greedy_solve
from delmu.data import generate_instances
from delmu.errors import InfeasibleMinimumError, SearchSpaceError
from delmu.model import builtin_topology, check_feasible, node_time_usage
from delmu.utility import DEFAULT_PARAMS, UtilitySpec, flow_utility, total_utility

from helpers import (CHAIN3_PARAMS, FORK4_PARAMS, LINEAR, LOG, SIGMOID, chain3, column, fork4,
                     instance, random_micro_instance, single_link)


def reference_greedy(topo, inst, params, step=1.0):
    """Plain re-evaluation greedy: recompute every candidate's gain and full
    feasibility each round."""
    r = inst.min_rate.astype(float).copy()
    hi = inst.max_demand
    while True:
        best, best_gain = None, -math.inf
        for i, j in np.ndindex(r.shape):
            inc = min(step, hi[i, j] - r[i, j])
            if inc <= 0:
                continue
            trial = r.copy()
            trial[i, j] += inc
            if node_time_usage(topo, trial).violations:
                continue
            gain = flow_utility(params[i], trial[i, j]) - flow_utility(params[i], r[i, j])
            if gain > best_gain:
                best, best_gain = (i, j, inc), gain
        if best is None or best_gain < 0:
            return r
        r[best[0], best[1]] += best[2]


def reference_brute(topo, inst, params, grid):
    axes = []
    for lo, hi in zip(inst.min_rate.ravel(), inst.max_demand.ravel()):
        pts = list(np.arange(lo, hi + 1e-9, grid))
        if pts[-1] < hi - 1e-9:
            pts.append(hi)
        axes.append(pts)
    best, best_u = None, -math.inf
    for pt in itertools.product(*axes):
        r = np.array(pt).reshape(inst.shape)
        if node_time_usage(topo, r).violations:
            continue
        u = total_utility(params, r)
        if u > best_u:
            best, best_u = r, u
    return best, best_u


LINK_1000 = single_link(1000.0)
LIN_SIG = (LINEAR, SIGMOID)
LIN_SIG_INST = instance(column(0, 0), column(1000, 400))


class TestGreedy:
    def test_linear_beats_sigmoid_tail(self):
        r = greedy_solve(LINK_1000, LIN_SIG_INST, LIN_SIG)
        np.testing.assert_array_equal(r, column(1000, 0))

    def test_no_headroom(self):
        topo = builtin_topology(2)
        lo = np.full(topo.shape, 20.0)
        r = greedy_solve(topo, instance(lo, lo), DEFAULT_PARAMS)
        np.testing.assert_array_equal(r, lo)

    def test_single_flow_gets_demand(self):
        topo = single_link(1000.0, slices=1)
        r = greedy_solve(topo, instance([[3.0]], [[412.5]]), (LOG,))
        assert r[0, 0] == 412.5

    def test_ties_go_to_lowest_index(self):
        topo = single_link(10.0)
        # alpha = 0.5 keeps every step gain exactly equal in floating point
        unit = UtilitySpec("linear", 0.5, 0.0)
        r = greedy_solve(topo, instance(column(0, 0), column(10, 10)), (unit, unit))
        np.testing.assert_array_equal(r, column(10, 0))

    def test_infeasible_minimum(self):
        with pytest.raises(InfeasibleMinimumError):
            greedy_solve(single_link(100.0), instance(column(60, 60), column(60, 60)), (LINEAR, LOG))

    def test_bad_step(self):
        with pytest.raises(ValueError):
            greedy_solve(LINK_1000, LIN_SIG_INST, LIN_SIG, step=0.0)

    @pytest.mark.parametrize("topo,params,dmax", [
        (chain3(), CHAIN3_PARAMS, 150), (fork4(), FORK4_PARAMS, 50),
    ], ids=["chain3", "fork4"])
    def test_matches_reference(self, topo, params, dmax):
        rng = np.random.default_rng(4)
        for _ in range(15):
            inst = random_micro_instance(rng, topo.shape, dmax)
            np.testing.assert_allclose(greedy_solve(topo, inst, params),
                                       reference_greedy(topo, inst, params), atol=1e-9)

    @pytest.mark.parametrize("k", [1, 2, 3, 4])
    def test_gains_non_negative_and_bounded(self, k):
        topo = builtin_topology(k)
        for inst in generate_instances(k, 5, seed=9):
            r, gains = greedy_solve(topo, inst, DEFAULT_PARAMS, return_gains=True)
            assert np.all(gains >= 0)
            assert gains.size <= np.sum(np.ceil(inst.max_demand - inst.min_rate))
            assert check_feasible(topo, inst, r).feasible
            zero = total_utility(DEFAULT_PARAMS, inst.min_rate)
            assert total_utility(DEFAULT_PARAMS, r) == pytest.approx(zero + gains.sum(), rel=1e-9)


class TestBruteForce:
    def test_hand_example(self):
        r = brute_force_solve(LINK_1000, LIN_SIG_INST, LIN_SIG, grid=50.0)
        np.testing.assert_array_equal(r, column(600, 400))
        u = total_utility(LIN_SIG, r)
        assert u == pytest.approx(0.798 + 1 / (1 + math.exp(-4.0)), rel=1e-12)
        assert u > total_utility(LIN_SIG, greedy_solve(LINK_1000, LIN_SIG_INST, LIN_SIG))

    def test_single_flow(self):
        topo = single_link(1000.0, slices=1)
        r = brute_force_solve(topo, instance([[0.0]], [[333.0]]), (POLY_,), grid=10.0)
        assert r[0, 0] == 333.0

    def test_infeasible_minimum(self):
        with pytest.raises(InfeasibleMinimumError):
            brute_force_solve(single_link(100.0), instance(column(60, 60), column(60, 60)),
                              (LINEAR, LOG), grid=10.0)

    def test_guard(self):
        topo = builtin_topology(1)
        inst = generate_instances(1, 1, seed=0)[0]
        assert grid_size(inst, 1.0) > 10**7
        with pytest.raises(SearchSpaceError):
            brute_force_solve(topo, inst, DEFAULT_PARAMS, grid=1.0)

    def test_grid_includes_demand(self):
        inst = instance([[0.0, 5.0]], [[25.0, 5.0]])
        assert grid_size(inst, 10.0) == 4

    @pytest.mark.parametrize("topo,params,dmax,grid", [
        (chain3(), CHAIN3_PARAMS, 150, 10.0), (fork4(), FORK4_PARAMS, 50, 5.0),
    ], ids=["chain3", "fork4"])
    def test_matches_reference(self, topo, params, dmax, grid):
        rng = np.random.default_rng(8)
        for _ in range(8):
            inst = random_micro_instance(rng, topo.shape, dmax)
            r = brute_force_solve(topo, inst, params, grid=grid)
            ref, ref_u = reference_brute(topo, inst, params, grid)
            assert total_utility(params, r) == pytest.approx(ref_u, rel=1e-12)
            np.testing.assert_allclose(r, ref)

    @pytest.mark.parametrize("topo,params,dmax", [
        (chain3(), CHAIN3_PARAMS, 150), (fork4(), FORK4_PARAMS, 50),
    ], ids=["chain3", "fork4"])
    def test_dominates_rounded_greedy(self, topo, params, dmax):
        rng = np.random.default_rng(12)
        grid = 10.0
        for _ in range(10):
            inst = random_micro_instance(rng, topo.shape, dmax)
            g = greedy_solve(topo, inst, params)
            lo = inst.min_rate
            rounded = lo + grid * np.floor((g - lo) / grid + 1e-9)
            b = brute_force_solve(topo, inst, params, grid=grid)
            assert check_feasible(topo, inst, b).feasible
            assert total_utility(params, b) >= total_utility(params, rounded) - 1e-12


POLY_ = UtilitySpec("polynomial", 0.03651, 0.5)
