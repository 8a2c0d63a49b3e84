import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semnet.topology import (BaseStation, ConfigError, GenConfig, MobileUser, Tier, Topology,
                             compute_sinr, dbm_to_mw, generate_topology, path_loss_db)


def make_topology(bs_specs, mu_positions, noise_dbm=-111.45):
    bss = tuple(BaseStation(j, Tier(t), pos, p, 2e6) for j, (t, pos, p) in enumerate(bs_specs))
    users = tuple(MobileUser(i, pos) for i, pos in enumerate(mu_positions))
    return Topology(bss, users, 500.0, noise_dbm)


@pytest.mark.parametrize("tier, d, expected", [
    ("macro", 500.0, 141.9588),
    ("femto", 10.0, 67.0),
    ("macro", 1.0, 34.0),
    ("pico", 100.0, 114.0),
])
def test_path_loss_reference_values(tier, d, expected):
    assert path_loss_db(tier, d) == pytest.approx(expected, abs=1e-4)


def test_path_loss_clamps_short_distances():
    assert path_loss_db("macro", 0.0) == path_loss_db("macro", 1.0) == 34.0
    assert path_loss_db("femto", 0.3) == 37.0


@pytest.mark.parametrize("d", [-1.0, float("nan")])
def test_path_loss_rejects_bad_distance(d):
    with pytest.raises(ValueError):
        path_loss_db("pico", d)


def test_path_loss_vectorised():
    d = np.array([1.0, 10.0, 100.0])
    np.testing.assert_allclose(path_loss_db("macro", d), [34.0, 74.0, 114.0])


def test_generator_reference_counts():
    topo = generate_topology(GenConfig(), seed=1)
    assert topo.n_bs == 16 and topo.n_mu == 200
    tiers = [b.tier for b in topo.base_stations]
    assert tiers == [Tier.MACRO] + [Tier.PICO] * 5 + [Tier.FEMTO] * 10
    assert topo.base_stations[0].position == (0.0, 0.0)
    pos = np.array([u.position for u in topo.users])
    assert np.all(np.hypot(pos[:, 0], pos[:, 1]) <= 500.0)
    assert all(len(u.required_kbs) == 3 for u in topo.users)
    assert all(len(b.kb_set) == 6 for b in topo.base_stations)
    np.testing.assert_array_equal(topo.budgets, 2e6)


def test_generator_single_link():
    topo = generate_topology(GenConfig(n_pico=0, n_femto=0, n_users=1), seed=0)
    ch = compute_sinr(topo)
    assert ch.shape == (1, 1)
    assert ch.sinr[0, 0] > 0


def test_generator_deterministic():
    a = generate_topology(GenConfig(n_users=30), seed=7)
    b = generate_topology(GenConfig(n_users=30), seed=7)
    c = generate_topology(GenConfig(n_users=30), seed=8)
    assert a == b
    assert a.to_csv() == b.to_csv()
    assert a != c
    np.testing.assert_array_equal(compute_sinr(a).sinr, compute_sinr(b).sinr)


@pytest.mark.parametrize("kw", [
    {"n_users": 0},
    {"n_macro": 0, "n_pico": 0, "n_femto": 0},
    {"radius": 0.0},
    {"n_pico": -1},
    {"kb_per_mu": 11},
])
def test_generator_rejects_bad_config(kw):
    with pytest.raises(ConfigError):
        generate_topology(GenConfig(**kw), seed=0)


def test_sinr_single_bs_hand_value():
    # 43 dBm minus 123 dB of path loss gives -80 dBm at the MU
    d = 10 ** ((123.0 - 34.0) / 40.0)
    topo = make_topology([("macro", (0.0, 0.0), 43.0)], [(d, 0.0)])
    ch = compute_sinr(topo)
    assert ch.sinr[0, 0] == pytest.approx(10 ** (31.45 / 10), rel=1e-9)


def test_sinr_symmetry_of_colocated_bss():
    topo = make_topology([("pico", (10.0, 0.0), 35.0), ("pico", (10.0, 0.0), 35.0)],
                         [(0.0, 50.0), (-30.0, 5.0)])
    ch = compute_sinr(topo)
    np.testing.assert_allclose(ch.sinr[:, 0], ch.sinr[:, 1])


def test_extra_interferer_lowers_every_sinr():
    base = [("macro", (0.0, 0.0), 43.0), ("pico", (200.0, 0.0), 35.0)]
    mus = [(50.0, 50.0), (180.0, -20.0), (-300.0, 10.0)]
    before = compute_sinr(make_topology(base, mus)).sinr
    after = compute_sinr(make_topology(base + [("femto", (100.0, 100.0), 20.0)], mus)).sinr
    assert np.all(after[:, :2] < before)


def test_threshold_bandwidth_times_efficiency_is_bit_rate():
    ch = compute_sinr(generate_topology(GenConfig(n_users=50), seed=3))
    np.testing.assert_allclose(ch.n_threshold * ch.spectral_eff, 1e4, rtol=1e-9)
    assert np.all(ch.spectral_eff > 0)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.5, 10.0), st.integers(0, 10_000))
def test_raising_serving_power_helps_own_links_hurts_others(delta_db, seed):
    topo = generate_topology(GenConfig(n_pico=2, n_femto=2, n_users=8), seed)
    before = compute_sinr(topo).sinr
    b0 = topo.base_stations[1]
    boosted = BaseStation(b0.id, b0.tier, b0.position, b0.tx_power_dbm + delta_db, b0.budget_hz,
                          b0.kb_set)
    bss = (topo.base_stations[0], boosted) + topo.base_stations[2:]
    after = compute_sinr(Topology(bss, topo.users, topo.radius, topo.noise_dbm)).sinr
    assert np.all(after[:, 1] > before[:, 1])
    others = np.delete(np.arange(topo.n_bs), 1)
    assert np.all(after[:, others] < before[:, others])


def test_dbm_to_mw():
    np.testing.assert_allclose(dbm_to_mw([0.0, 30.0, -111.45]), [1.0, 1000.0, 10 ** -11.145])


def test_topology_csv_rows():
    topo = generate_topology(GenConfig(n_pico=1, n_femto=1, n_users=3), seed=0)
    lines = topo.to_csv().strip().split("\n")
    assert lines[0].startswith("kind,id,tier")
    assert len(lines) == 1 + 3 + 3


def test_with_budgets_scales():
    topo = generate_topology(GenConfig(n_users=5), seed=0)
    np.testing.assert_allclose(topo.with_budgets(0.5).budgets, 1e6)
