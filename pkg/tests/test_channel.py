import numpy as np
import pytest

from hetnet_rrm.baselines import augment_with_wired_backhaul
from hetnet_rrm.channel import (
    ChannelModel,
    LinkClassParams,
    PathlossParams,
    dbm_to_watts,
    keyed_generator,
    large_scale_gains,
    snr_term,
)
from hetnet_rrm.topology import Flow, Link, Node, NodeKind

from conftest import build_graph, det_model, random_instance, single_link_graph

MACRO, PICO, USER = NodeKind.MACRO, NodeKind.PICO, NodeKind.USER

NO_SHADOW = PathlossParams(
    macro_macro=LinkClassParams(1.6, -20.0, 0.0),
    bs_bs=LinkClassParams(1.75, -18.0, 0.0),
    bs_user=LinkClassParams(1.9, -16.0, 0.0),
)


def test_dbm_to_watts():
    assert dbm_to_watts(0.0) == pytest.approx(1e-3)
    assert dbm_to_watts(30.0) == pytest.approx(1.0)
    assert dbm_to_watts(33.0) == pytest.approx(10 ** 3.3 * 1e-3)


def test_snr_term_formula():
    h2 = np.array([0.0, 1.0, 3.0])
    assert np.allclose(snr_term(h2, 2.0), np.log1p(2.0 * h2))


def test_pathloss_class_selection_and_formula():
    nodes = [
        Node(0, MACRO, (0.0, 0.0)),
        Node(1, MACRO, (200.0, 0.0)),
        Node(2, PICO, (0.0, 50.0)),
        Node(3, USER, (0.0, -80.0)),
    ]
    links = [Link(0, 0, 1), Link(1, 0, 2), Link(2, 0, 3)]
    g = build_graph(nodes, links, [Flow(0, 0, 3)], {0, 1},
                    macro_radius=10.0, pico_radius=5.0)
    gains = large_scale_gains(g, NO_SHADOW, seed=0)
    assert gains[0] == pytest.approx(10 ** (-20 / 20) * 200.0 ** -1.6)
    assert gains[1] == pytest.approx(10 ** (-18 / 20) * 50.0 ** -1.75)
    assert gains[2] == pytest.approx(10 ** (-16 / 20) * 80.0 ** -1.9)


def test_pathloss_minimum_distance_clamp():
    nodes = [Node(0, MACRO, (0.0, 0.0)), Node(1, USER, (0.2, 0.0))]
    g = build_graph(nodes, [Link(0, 0, 1)], [Flow(0, 0, 1)], {0})
    gains = large_scale_gains(g, NO_SHADOW, seed=0)
    assert gains[0] == pytest.approx(10 ** (-16 / 20))  # clamped to 1 m


def test_shadowing_is_seeded_and_stationary():
    g = single_link_graph()
    a = large_scale_gains(g, PathlossParams(), seed=11)
    b = large_scale_gains(g, PathlossParams(), seed=11)
    c = large_scale_gains(g, PathlossParams(), seed=12)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_wired_links_carry_no_gain():
    nodes = [Node(0, MACRO, (0.0, 0.0)), Node(1, PICO, (150.0, 0.0)),
             Node(2, USER, (220.0, 0.0))]
    links = [Link(0, 0, 1, wired_capacity=4.0), Link(1, 1, 2)]
    g = build_graph(nodes, links, [Flow(0, 0, 2)], {0, 1})
    m = ChannelModel(g, 3, 40.0, 33.0, seed=0)
    assert m.tx_powers[0] == 0.0 and m.tx_powers[1] > 0.0
    block = m.rate_block(0, 4)
    assert np.all(block[:, 0, :] == 0.0)


def test_noise_normalization_and_power_overrides():
    nodes = [Node(0, MACRO, (0.0, 0.0)), Node(1, PICO, (100.0, 50.0)),
             Node(2, USER, (30.0, -40.0)), Node(3, USER, (130.0, 60.0))]
    links = [Link(0, 0, 2), Link(1, 1, 3), Link(2, 0, 1)]
    g = build_graph(nodes, links, [Flow(0, 0, 2), Flow(1, 0, 3)], {0})
    m = ChannelModel(g, 2, 40.0, 33.0, seed=0, noise_dbm=-100.0)
    assert m.tx_powers[0] == pytest.approx(dbm_to_watts(40.0) / dbm_to_watts(-100.0))
    assert m.tx_powers[1] == pytest.approx(dbm_to_watts(33.0) / dbm_to_watts(-100.0))
    over = ChannelModel(g, 2, 40.0, 33.0, seed=0, noise_dbm=-100.0,
                        power_overrides={1: 21.0})
    assert over.tx_powers[1] == pytest.approx(dbm_to_watts(21.0) / dbm_to_watts(-100.0))
    assert over.tx_powers[0] == m.tx_powers[0]
    assert over.tx_powers[2] == m.tx_powers[2]


def test_small_scale_fading_is_unit_mean():
    g = single_link_graph()
    m = ChannelModel(g, 10, 40.0, 33.0, seed=5)
    block = m.draw_block(0, 10_000)  # 1e5 exponential draws
    small = block[:, 0, :] / m.large_gains[0] ** 2
    assert small.mean() == pytest.approx(1.0, abs=0.02)
    assert small.min() >= 0.0


def test_draws_replay_by_counter():
    g = random_instance(3)
    m = ChannelModel(g, 4, 40.0, 33.0, seed=9)
    later = m.draw_subframe(5).copy()
    _ = m.draw_subframe(7)
    again = m.draw_subframe(5)
    assert np.array_equal(later, again)
    twin = ChannelModel(g, 4, 40.0, 33.0, seed=9)
    assert np.array_equal(twin.draw_subframe(5), later)
    other = ChannelModel(g, 4, 40.0, 33.0, seed=10)
    assert not np.array_equal(other.draw_subframe(5), later)


def test_keyed_generator_streams_are_independent():
    a = keyed_generator(1, 1, 0).random(4)
    b = keyed_generator(1, 2, 0).random(4)
    c = keyed_generator(1, 1, 1).random(4)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert np.array_equal(a, keyed_generator(1, 1, 0).random(4))


def test_deterministic_mode_freezes_time():
    g = random_instance(4)
    m = det_model(g, num_subbands=3, seed=2)
    b = m.rate_block(0, 5)
    assert np.allclose(b, b[0])
    stat = m.statistical_rates()
    assert np.allclose(b[0], stat)
    wl = list(g.wireless_links)
    assert np.allclose(
        stat[wl], np.log1p(m.tx_powers[wl, None] * m.large_gains[wl, None] ** 2)
    )


def test_statistical_rates_flat_across_subbands():
    g = random_instance(6)
    m = ChannelModel(g, 6, 40.0, 33.0, seed=1)
    stat = m.statistical_rates()
    assert np.allclose(stat, stat[:, :1])


def test_pattern_draws_replay_and_range():
    g = single_link_graph()
    m = ChannelModel(g, 2, 40.0, 33.0, seed=4)
    u = m.pattern_draws(10, 50)
    assert u.shape == (50,)
    assert np.all((0.0 <= u) & (u < 1.0))
    assert np.array_equal(u[5:], m.pattern_draws(15, 45))


def test_wired_augmentation_keeps_wireless_draws():
    for seed in range(8):
        g = random_instance(seed)
        if not any(n.kind is PICO and n.index not in g.backhaul for n in g.nodes):
            continue
        aug = augment_with_wired_backhaul(g, wired_capacity=100.0)
        assert aug.num_links > g.num_links
        base = ChannelModel(g, 4, 40.0, 33.0, seed=seed)
        wired = ChannelModel(aug, 4, 40.0, 33.0, seed=seed)
        rb = base.rate_block(0, 6)
        rw = wired.rate_block(0, 6)
        assert np.array_equal(rb, rw[:, : g.num_links, :])
        assert np.array_equal(base.large_gains, wired.large_gains[: g.num_links])


def test_large_gains_override_validation():
    g = single_link_graph()
    with pytest.raises(ValueError):
        ChannelModel(g, 2, 40.0, 33.0, seed=0, large_gains=np.ones(3))
    with pytest.raises(ValueError):
        ChannelModel(g, 2, 40.0, 33.0, seed=0, large_gains=np.zeros(1))
    with pytest.raises(ValueError):
        ChannelModel(g, 0, 40.0, 33.0, seed=0)
