import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import make_instance
from semnet.ikm import fbar
from semnet.metrics import (brute_force_joint, chance_coverage, grid_size, stm_ikm_mc,
                            stm_pkm)
from semnet.semantics import PHYSICAL, RAW


def test_stm_empty_is_zero():
    inst = make_instance([[1.0, 2.0]], [1e6, 1e6])
    assert stm_pkm(np.zeros((1, 2)), np.zeros((1, 2)), inst) == 0.0


def test_stm_single_link():
    # 1 bit/s/Hz over 10 kHz, one message per bit
    inst = make_instance([[1.0]], [1e6])
    assert stm_pkm([[1]], [[1e4]], inst) == pytest.approx(1e4)


def test_stm_uses_affine_profile():
    inst = make_instance([[2.0]], [1e6], slope=0.5, intercept=-100.0)
    assert stm_pkm([[1]], [[1e4]], inst) == pytest.approx(0.5 * 2e4 - 100.0)


@settings(max_examples=50)
@given(st.lists(st.floats(0.1, 8.0), min_size=4, max_size=4),
       st.lists(st.floats(0.0, 1e6), min_size=4, max_size=4))
def test_stm_additive_over_links(eff, bw):
    eff = np.array(eff).reshape(2, 2)
    n = np.array(bw).reshape(2, 2)
    inst = make_instance(eff, [2e6, 2e6])
    x1 = np.array([[1, 0], [0, 0]])
    x2 = np.array([[0, 0], [0, 1]])
    assert stm_pkm(x1 + x2, n, inst) == pytest.approx(stm_pkm(x1, n, inst) + stm_pkm(x2, n, inst))


def _pair():
    inst = make_instance([[1.0, 0.5], [2.0, 3.0]], [1e6, 1e6], tau=0.5)
    x = np.array([[1, 0], [0, 1]])
    n = np.array([[3e5, 0], [0, 2e5]])
    return inst, x, n


def test_mc_degenerate_at_tau_one():
    inst, x, n = _pair()
    inst = inst.with_tau(1.0)
    res = stm_ikm_mc(x, n, inst, 100, seed=3)
    np.testing.assert_allclose(res["samples"], stm_pkm(x, n, inst))
    assert res["std"] == 0.0


def test_mc_raw_mean_within_clt():
    inst, x, n = _pair()
    rate = np.array([3e5, 6e5])
    res = stm_ikm_mc(x, n, inst, 200_000, RAW, seed=1)
    mean, sd = 0.5 * rate.sum(), 0.5 * np.hypot(*rate)
    assert abs(res["mean"] - mean) < 4 * sd / np.sqrt(200_000)
    assert res["std"] == pytest.approx(sd, rel=0.01)


def test_mc_physical_clipping_raises_mean_at_low_tau():
    inst, x, n = _pair()
    inst = inst.with_tau(0.1)
    raw = stm_ikm_mc(x, n, inst, 100_000, RAW, seed=2)
    phys = stm_ikm_mc(x, n, inst, 100_000, PHYSICAL, seed=2)
    assert phys["mean"] > raw["mean"]


def test_mc_seed_reproducible_and_validated():
    inst, x, n = _pair()
    a = stm_ikm_mc(x, n, inst, 1000, seed=9)
    b = stm_ikm_mc(x, n, inst, 1000, seed=9)
    np.testing.assert_array_equal(a["samples"], b["samples"])
    assert "samples" not in stm_ikm_mc(x, n, inst, 10, keep_samples=False)
    with pytest.raises(ValueError):
        stm_ikm_mc(x, n, inst, 0)
    with pytest.raises(ValueError):
        stm_ikm_mc(x, n, inst, 10, mode="beta")


@pytest.mark.parametrize("alpha, lo, hi", [(0.95, 0.94, 0.96), (0.5, 0.48, 0.52)])
def test_chance_coverage_matches_alpha(alpha, lo, hi):
    inst, x, n = _pair()
    cov = chance_coverage(x, n, inst, alpha, 100_000, seed=4)
    assert lo <= cov <= hi


def test_chance_coverage_degenerate():
    inst, x, n = _pair()
    assert chance_coverage(x, n, inst.with_tau(1.0), 0.95, 100) == 1.0


def test_oracle_single_link_takes_whole_budget():
    inst = make_instance([[1.0]], [2e6])
    x, n, obj = brute_force_joint(inst)
    np.testing.assert_array_equal(x, [[1]])
    np.testing.assert_allclose(n, [[2e6]])
    assert obj == pytest.approx(2e6)


def test_oracle_prefers_better_efficiency_within_bs():
    inst = make_instance([[1.0], [2.0]], [1e6])
    x, n, obj = brute_force_joint(inst, levels=4)
    np.testing.assert_array_equal(x, [[1], [1]])
    # all residual goes to the stronger MU
    np.testing.assert_allclose(n[:, 0], [1e4, 1e6 - 1e4])


def test_oracle_symmetric_instance_splits_users():
    inst = make_instance([[2.0, 2.0], [2.0, 2.0]], [1e6, 1e6])
    x, n, obj = brute_force_joint(inst)
    assert x.sum(axis=0).tolist() == [1, 1]
    assert obj == pytest.approx(4e6)


def test_oracle_leaves_stranded_mu_out():
    inst = make_instance([[1.0], [1.0]], [1e6], eligible=[[True], [False]])
    x, n, _ = brute_force_joint(inst)
    np.testing.assert_array_equal(x, [[1], [0]])


def test_oracle_refuses_large_instances():
    with pytest.raises(ValueError):
        brute_force_joint(make_instance(np.ones((7, 1)), [1e6]))
    with pytest.raises(ValueError):
        brute_force_joint(make_instance(np.ones((2, 4)), [1e6] * 4))
    with pytest.raises(ValueError):
        brute_force_joint(make_instance(np.ones((1, 1)), [1e6]), mode="other")


def test_grid_size_counts_compositions():
    assert grid_size(3, 5) == 21
    assert grid_size(1, 5) == 1


@pytest.mark.parametrize("mode", ["pkm", "ikm"])
def test_oracle_dominates_random_feasible_configurations(mode):
    rng = np.random.default_rng(0)
    eff = rng.uniform(0.5, 4.0, (4, 2))
    inst = make_instance(eff, [5e4, 4e4], tau=rng.uniform(0.3, 1.0, (4, 2)))
    _, _, best = brute_force_joint(inst, mode, levels=5)
    nt = inst.n_threshold
    for choice in itertools.product(range(2), repeat=4):
        x = np.zeros((4, 2), int)
        x[np.arange(4), choice] = 1
        load = (x * nt).sum(axis=0)
        if np.any(load > inst.budgets):
            continue
        for _ in range(20):
            n = np.zeros((4, 2))
            for j in range(2):
                idx = np.flatnonzero(x[:, j])
                if idx.size:
                    w = rng.dirichlet(np.ones(idx.size))
                    n[idx, j] = nt[idx, j] + w * (inst.budgets[j] - load[j])
            val = stm_pkm(x, n, inst) if mode == "pkm" else fbar(x, n, inst, 0.95)
            # gridding can lose a little against a continuous allocation
            assert val <= best + 0.05 * abs(best) + 1e-6
