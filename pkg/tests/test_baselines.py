import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import feasible
from semnet.assignment import Instance
from semnet.baselines import (evenly_distributed_ba, max_sinr_ua, solve_baseline,
                              water_filling_ba)
from semnet.numerics import InfeasibleError
from semnet.topology import GenConfig, generate_topology

MHZ = 1e6


def test_max_sinr_picks_strongest():
    x, _, _ = max_sinr_ua(np.array([[10.0, 3.0]]), np.ones((1, 2), bool))
    np.testing.assert_array_equal(x, [[1, 0]])


def test_max_sinr_skips_ineligible():
    x, _, _ = max_sinr_ua(np.array([[10.0, 3.0, 5.0]]), np.array([[False, True, True]]))
    np.testing.assert_array_equal(x, [[0, 0, 1]])


def test_max_sinr_tie_lowest_id():
    x, _, _ = max_sinr_ua(np.array([[4.0, 4.0]]), np.ones((1, 2), bool))
    np.testing.assert_array_equal(x, [[1, 0]])


def test_max_sinr_strands_and_repairs():
    sinr = np.array([[9.0, 1.0], [8.0, 2.0], [1.0, 1.0]])
    elig = np.array([[1, 1], [1, 1], [0, 0]], bool)
    nt = np.array([[0.6, 0.6], [0.6, 0.5], [0.1, 0.1]])
    x, actions, stranded = max_sinr_ua(sinr, elig, nt, np.array([1.0, 1.0]))
    # both pick BS 0; MU 0 (first among equal consumers) moves to BS 1
    np.testing.assert_array_equal(x, [[0, 1], [1, 0], [0, 0]])
    assert stranded == [2]
    assert actions == [{"mu": 0, "from": 0, "to": 1}]


def test_water_filling_inherits_water_level_example():
    n = water_filling_ba(np.array([1.0, 2.0]), np.zeros(2), 3 * MHZ)
    np.testing.assert_allclose(n, [1.25 * MHZ, 1.75 * MHZ])


def test_water_filling_single_member_and_floors():
    np.testing.assert_allclose(water_filling_ba(np.array([0.3]), np.array([1e5]), 2 * MHZ), [2e6])
    with pytest.raises(InfeasibleError):
        water_filling_ba(np.ones(2), np.array([1.5e6, 1e6]), 2 * MHZ)


def test_even_split_examples():
    np.testing.assert_allclose(evenly_distributed_ba(np.zeros(4), 2 * MHZ), [0.5 * MHZ] * 4)
    np.testing.assert_allclose(evenly_distributed_ba(np.array([1e4]), 2 * MHZ), [2 * MHZ])
    n = evenly_distributed_ba(np.array([0.8, 0.1, 0.1, 0.1]) * MHZ, 2 * MHZ)
    np.testing.assert_allclose(n, np.array([0.8, 0.4, 0.4, 0.4]) * MHZ)


def test_even_split_cascading_floors():
    # raising one floor pushes the next over its share too
    n = evenly_distributed_ba(np.array([0.9, 0.55, 0.1, 0.1]), 2.0)
    np.testing.assert_allclose(n, [0.9, 0.55, 0.275, 0.275])


def test_even_split_infeasible():
    with pytest.raises(InfeasibleError):
        evenly_distributed_ba(np.array([1.5, 1.0]), 2.0)


@settings(max_examples=200)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=10), st.floats(0, 5))
def test_even_split_properties(floors, extra):
    nt = np.array(floors)
    total = nt.sum() + extra
    n = evenly_distributed_ba(nt, total)
    assert n.sum() == pytest.approx(total, rel=1e-9, abs=1e-12)
    assert np.all(n >= nt)
    free = n > nt
    if free.sum() > 1:
        assert np.ptp(n[free]) <= 1e-9 * (1 + total)


@pytest.mark.parametrize("ba", ["wf", "even"])
def test_baseline_reference_instance_feasible(ba):
    inst = Instance.build(generate_topology(GenConfig(n_users=200), 5))
    a, rep = solve_baseline(inst, ba)
    assert feasible(a, inst)
    assert rep.method == f"maxsinr_{ba}"
    assert rep.stm == pytest.approx(float(np.where(a.x.astype(bool), inst.message_rate(a.n), 0).sum()))


def test_baseline_ikm_eligibility():
    inst = Instance.build(generate_topology(GenConfig(n_users=50), 1), tau0=0.5)
    a, _ = solve_baseline(inst, "wf", mode="ikm")
    assert feasible(a, inst, "ikm")


def test_baseline_unknown_rule():
    inst = Instance.build(generate_topology(GenConfig(n_users=5), 1))
    with pytest.raises(ValueError):
        solve_baseline(inst, "greedy")
