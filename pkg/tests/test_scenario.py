import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edgeview import airlink, scenario as sc
from edgeview.errors import ConfigurationError, InvalidInputError


def uma_los_oracle(d):
    # hand evaluation of the UMa LOS probability for d > 18 m
    return 18.0 / d + math.exp(-d / 63.0) * (1.0 - 18.0 / d)


def test_config_broadcast_and_counts():
    cfg = sc.ScenarioConfig()
    assert cfg.M == [12, 12, 12] and cfg.K == [8, 8, 8]
    assert cfg.Ks == 24 and cfg.Kc == 2


@pytest.mark.parametrize("changes", [
    dict(L=1, Ke=[0], K=[4], M=[4]),
    dict(Ke=[8, 0, 0]),
    dict(N=24),
    dict(N=30),
    dict(layout="quad"),
    dict(edge_band=[1.05, 0.95]),
    dict(scatter_fraction=0.0),
    dict(edge_x_m=10.0),
])
def test_config_rejects(changes):
    with pytest.raises(ConfigurationError):
        sc.ScenarioConfig(**changes)


def test_antenna_condition_warns():
    with pytest.warns(UserWarning, match="identifiability"):
        sc.ScenarioConfig(M=3)


def test_toml_round_trip():
    cfg = sc.preset("fig2-4bs")
    text = cfg.to_toml()
    assert "noise_ref_snr_dB" not in text
    back = sc.ScenarioConfig.from_toml(text)
    assert back == cfg


def test_toml_rejects_unknown_key():
    with pytest.raises(ConfigurationError):
        sc.ScenarioConfig.from_toml("L = 3\nbogus = 1\n")


def test_load_config_ignores_experiment_table(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text(sc.preset("fig3-3bs").to_toml() + "\n[experiment]\ntrials = 3\n")
    assert sc.load_config(path) == sc.preset("fig3-3bs")


def test_presets():
    assert sc.preset("dense-k16").K == [16, 16, 16]
    assert sc.preset("dense-k16").scatter_fraction == 0.8
    with pytest.raises(ConfigurationError):
        sc.preset("nope")


def test_tri_layout_geometry():
    cfg = sc.ScenarioConfig()
    bs = sc.bs_positions(cfg)
    assert np.allclose(np.linalg.norm(bs, axis=1), cfg.cell_radius_m)
    for anchors in sc.edge_points(cfg):
        assert np.allclose(anchors, [[0.0, 0.0]], atol=1e-9)


def test_quad_layout_shared_vertices():
    cfg = sc.preset("fig2-4bs")
    R = cfg.cell_radius_m
    anchors = sc.edge_points(cfg)
    assert sorted(map(tuple, np.round(anchors[0], 6))) == [(-R / 2, 0.0), (R / 2, 0.0)]
    bs = sc.bs_positions(cfg)
    d = np.linalg.norm(bs - np.array([-R / 2, 0.0]), axis=1)
    assert np.allclose(np.sort(d)[:3], R)


def test_center_users_within_disc():
    cfg = sc.ScenarioConfig(seed=4)
    bs = sc.bs_positions(cfg)
    users = sc.place_users(cfg, np.random.default_rng(0))
    for u in users:
        if u.role == "center":
            assert np.linalg.norm(u.position - bs[u.serving_bs]) <= 240.0 + 1e-9


def test_edge_users_in_band():
    cfg = sc.ScenarioConfig(Ke=[2, 2, 1], K=[8, 8, 8])
    bs = sc.bs_positions(cfg)
    for seed in range(20):
        for u in sc.place_users(cfg, np.random.default_rng(seed)):
            if u.role == "edge":
                d = np.linalg.norm(bs - u.position, axis=1)
                assert np.all((d >= 0.95 * 600 - 1e-9) & (d <= 1.05 * 600 + 1e-9))


def test_ordering_edge_first_then_by_cell():
    cfg = sc.ScenarioConfig(Ke=[1, 1, 0])
    users = sc.place_users(cfg, np.random.default_rng(0))
    roles = [u.role for u in users]
    assert roles[:2] == ["edge", "edge"] and set(roles[2:]) == {"center"}
    serving = [u.serving_bs for u in users[2:]]
    assert serving == sorted(serving)
    assert [u.user_id for u in users] == list(range(24))


def test_no_edge_users():
    cfg = sc.ScenarioConfig(Ke=[0, 0, 0])
    assert all(u.role == "center" for u in sc.place_users(cfg, np.random.default_rng(0)))


def test_placement_deterministic():
    cfg = sc.ScenarioConfig()
    a = sc.place_users(cfg, np.random.default_rng(11))
    b = sc.place_users(cfg, np.random.default_rng(11))
    assert all(np.array_equal(u.position, v.position) for u, v in zip(a, b))


def test_edge_x_override():
    cfg = sc.preset("fig2-4bs").replace(edge_x_m=123.0)
    users = sc.place_users(cfg, np.random.default_rng(0))
    assert np.array_equal(users[0].position, [123.0, 0.0])


def test_los_probability_examples():
    assert sc.los_probability(0.0) == 1.0
    assert sc.los_probability(18.0) == 1.0
    assert sc.los_probability(500.0) == pytest.approx(uma_los_oracle(500.0), abs=1e-12)
    assert sc.los_probability(500.0) == pytest.approx(0.036344, abs=1e-6)
    with pytest.raises(InvalidInputError):
        sc.los_probability(-1.0)


@settings(max_examples=50, deadline=None)
@given(a=st.floats(0, 5000), b=st.floats(0, 5000))
def test_los_probability_monotone(a, b):
    lo, hi = sorted((a, b))
    assert sc.los_probability(hi) <= sc.los_probability(lo) + 1e-12


def test_path_loss_examples():
    cfg = sc.ScenarioConfig()
    nlos = sc.path_loss_dB(600.0, False, cfg)
    oracle = 13.54 + 39.08 * math.log10(600.0) + 20 * math.log10(2.0)
    assert nlos == pytest.approx(oracle, abs=1e-9)
    assert nlos == pytest.approx(128.1, abs=0.05)
    diff = nlos - sc.path_loss_dB(300.0, False, cfg)
    assert diff == pytest.approx(39.08 * math.log10(2.0), abs=1e-9)
    assert sc.path_loss_dB(200.0, True, cfg) < sc.path_loss_dB(200.0, False, cfg)


def test_path_loss_los_branches():
    # breakpoint distance 4 * 24 * 0.5 * 2e9 / c
    dbp = 4 * 24 * 0.5 * 2e9 / 299792458.0
    assert sc.breakpoint_distance(2.0, 25.0, 1.5) == pytest.approx(dbp)
    d3 = math.hypot(100.0, 23.5)
    assert sc.path_loss_dB(d3, True) == pytest.approx(28 + 22 * math.log10(d3) + 20 * math.log10(2))
    d3 = math.hypot(1000.0, 23.5)
    far = 28 + 40 * math.log10(d3) + 20 * math.log10(2) - 9 * math.log10(dbp ** 2 + 23.5 ** 2)
    assert sc.path_loss_dB(d3, True) == pytest.approx(far)


def test_path_loss_clamps(caplog):
    with caplog.at_level("WARNING"):
        near = sc.path_loss_dB(24.0, True)
    assert "clamped" in caplog.text
    assert near == pytest.approx(sc.path_loss_dB(math.hypot(10.0, 23.5), True))
    with pytest.raises(InvalidInputError):
        sc.path_loss_dB(0.0, True)


@settings(max_examples=50, deadline=None)
@given(a=st.floats(30, 5000), b=st.floats(30, 5000), los=st.booleans())
def test_path_loss_increasing(a, b, los):
    if abs(a - b) < 1e-6:
        return
    lo, hi = sorted((a, b))
    assert sc.path_loss_dB(hi, los) > sc.path_loss_dB(lo, los)


def test_array_response():
    assert np.allclose(sc.array_response(np.pi / 2, 5), 1.0)
    assert np.allclose(sc.array_response(0.0, 4), [1, -1, 1, -1])
    a = sc.array_response(0.7, 8)
    assert np.allclose(np.abs(a), 1.0)
    assert np.linalg.norm(a) == pytest.approx(math.sqrt(8))


def single_user_config(**kw):
    base = dict(L=2, layout="cluster", M=4, K=2, Ke=[0, 0], N=40, preamble_len=4, Np=1)
    base.update(kw)
    return sc.ScenarioConfig(**base)


def test_single_path_channel_matches_formula():
    cfg = single_user_config()
    users = sc.place_users(cfg, np.random.default_rng(0))
    ch = sc.draw_channels(users, cfg, np.random.default_rng(5))
    # replay the channel stream: LOS draw (serving link only), then the angle
    rng = np.random.default_rng(5)
    rng.uniform()
    phi = rng.uniform(-np.pi, np.pi, 1)[0]
    expected = math.sqrt(ch.alpha[0, 0] / cfg.M[0]) * sc.array_response(phi, 4).conj()
    assert np.allclose(ch.H[0][:, 0], expected)


def test_channel_energy_matches_gain():
    cfg = sc.ScenarioConfig(M=8)
    users = sc.place_users(cfg, np.random.default_rng(0))
    rng = np.random.default_rng(1)
    energy = np.zeros((cfg.L, cfg.Ks))
    alpha = None
    for _ in range(1000):
        ch = sc.draw_channels(users, cfg, rng)
        energy += np.stack([np.sum(np.abs(h) ** 2, axis=0) for h in ch.H])
        if alpha is None:
            alpha = ch.alpha
    # edge users are NLOS everywhere, so their gains do not change per draw
    edge = ch.edge_users
    assert np.allclose(energy[:, edge] / 1000, alpha[:, edge], rtol=0.05)


def test_edge_users_never_los():
    cfg = sc.ScenarioConfig()
    users = sc.place_users(cfg, np.random.default_rng(0))
    ch = sc.draw_channels(users, cfg, np.random.default_rng(2))
    assert not ch.los[:, ch.edge_users].any()
    center = np.flatnonzero(ch.roles == "center")
    for k in center:
        others = [l for l in range(cfg.L) if l != ch.serving[k]]
        assert not ch.los[others, k].any()


def test_channels_deterministic():
    cfg = sc.ScenarioConfig()
    users = sc.place_users(cfg, np.random.default_rng(0))
    a = sc.draw_channels(users, cfg, np.random.default_rng(3))
    b = sc.draw_channels(users, cfg, np.random.default_rng(3))
    assert all(np.array_equal(x, y) for x, y in zip(a.H, b.H))


def test_snr_table_examples():
    cfg = single_user_config()
    users = sc.place_users(cfg, np.random.default_rng(0))
    ch = sc.draw_channels(users, cfg, np.random.default_rng(0))
    e = ch.rx_energy()[0, 0]
    for gamma, r in [(1.0, 0.5), (10 ** 0.3, 10 ** 0.3 / (1 + 10 ** 0.3))]:
        t = sc.snr_table(ch, e / gamma)
        assert t.Gamma[0, 0] == pytest.approx(gamma)
        assert t.r[0, 0] == pytest.approx(r)
    assert sc.snr_table(ch, e / 10 ** 0.3).r[0, 0] == pytest.approx(0.666, abs=1e-3)
    zero = ch.scale_users([0], -400.0)
    assert sc.snr_table(zero, 1.0).r[0, 0] == pytest.approx(0.0, abs=1e-30)
    with pytest.raises(InvalidInputError):
        sc.snr_table(ch, 0.0)


@settings(max_examples=30, deadline=None)
# gamma above ~1e15 rounds r to 1.0 in double precision
@given(seed=st.integers(0, 2**31), s2=st.floats(1e-12, 1e-6))
def test_snr_table_bounds(seed, s2):
    cfg = sc.ScenarioConfig()
    rng = np.random.default_rng(seed)
    ch = sc.snr_table(sc.draw_channels(sc.place_users(cfg, rng), cfg, rng), s2)
    assert np.all(ch.Gamma >= 0)
    assert np.all((ch.r >= 0) & (ch.r < 1))
    assert np.all((ch.eta >= 0) & (ch.eta < cfg.L))


def test_r_strictly_increasing():
    g = np.linspace(0, 100, 1000)
    r = g / (g + 1)
    assert np.all(np.diff(r) > 0)


def test_effective_snr_ordering_default_scenario():
    cfg = sc.ScenarioConfig()
    fails = 0
    for seed in range(200):
        rng = np.random.default_rng(seed)
        ch = sc.draw_channels(sc.place_users(cfg, rng), cfg, rng)
        ch = sc.snr_table(ch, airlink.calibrate_noise(ch, 3.0))
        center = ch.roles == "center"
        fails += ch.eta[ch.edge_users].min() <= ch.eta[center].max()
    assert fails <= 2


def test_phase_transition_ratio():
    r = sc.phase_transition_ratio([100.0, 1000.0], 1e-6, 3.908)
    assert r[0] > r[1]
    assert sc.phase_transition_ratio(1.0, 1.0, 2.0) == pytest.approx(0.5)


def test_shadowing_changes_gains():
    cfg = sc.ScenarioConfig(shadowing=True)
    users = sc.place_users(cfg, np.random.default_rng(0))
    a = sc.draw_channels(users, cfg, np.random.default_rng(1))
    b = sc.draw_channels(users, cfg.replace(shadowing=False), np.random.default_rng(1))
    assert not np.allclose(a.alpha, b.alpha)
