import numpy as np
import pytest

from hetnet_rrm.topology import (
    Flow,
    Link,
    Node,
    NodeKind,
    TopologyGraph,
    build_incidence,
    interference_from_positions,
    validate,
)

from conftest import build_graph, multicell_graph, single_link_graph

MACRO, PICO, USER = NodeKind.MACRO, NodeKind.PICO, NodeKind.USER


def test_node_kinds():
    assert MACRO.is_base_station and PICO.is_base_station
    assert not USER.is_base_station


def test_link_wired_flag():
    assert not Link(0, 0, 1).is_wired
    assert Link(0, 0, 1, wired_capacity=5.0).is_wired


def test_counts_and_partitions(multicell):
    g = multicell
    assert g.num_nodes == 22 and g.num_links == 18 and g.num_flows == 17
    assert g.bs_nodes == (0, 1, 2, 3, 4)
    assert g.bs_slot == {0: 0, 1: 1, 2: 2, 3: 3, 4: 4}
    assert g.wireless_links == tuple(range(18)) and g.wired_links == ()
    assert g.outgoing_links(0) == (0, 1, 3, 4, 6)
    assert g.outgoing_links(1) == (11, 12, 13, 15)
    assert g.outgoing_links(2) == (2, 7, 17)
    assert g.outgoing_links(3) == (5, 8, 9, 10)
    assert g.outgoing_links(4) == (14, 16)
    # every link belongs to exactly one station's outgoing set
    seen = sorted(l for n in g.bs_nodes for l in g.outgoing_links(n))
    assert seen == list(range(18))


def test_outgoing_rejects_user_nodes(multicell):
    with pytest.raises(ValueError):
        multicell.outgoing_links(5)


def test_wired_base_capacity():
    nodes = [Node(0, MACRO, (0.0, 0.0)), Node(1, PICO, (100.0, 0.0)),
             Node(2, USER, (160.0, 0.0))]
    links = [Link(0, 0, 1, wired_capacity=7.5), Link(1, 1, 2)]
    g = build_graph(nodes, links, [Flow(0, 0, 2)], {0, 1})
    assert np.allclose(g.wired_base_capacity(), [7.5, 0.0])
    assert g.wireless_links == (1,) and g.wired_links == (0,)


def test_incidence_rows_sum_to_zero(multicell):
    inc = build_incidence(multicell)
    assert inc.shape == (22, 18)
    assert np.all(inc.sum(axis=0) == 0)
    assert inc[0, 4] == 1 and inc[3, 4] == -1


def test_interference_geometry():
    nodes = (
        Node(0, MACRO, (0.0, 0.0)),
        Node(1, PICO, (300.0, 0.0)),
        Node(2, PICO, (300.0, 200.0)),
        Node(3, USER, (10.0, 10.0)),
    )
    m = interference_from_positions(nodes, macro_radius=420.0, pico_radius=260.0)
    assert m.shape == (3, 3) and m.dtype == np.bool_
    assert m[0, 1] and m[1, 0]          # 300 m < macro radius
    assert m[1, 2] and m[2, 1]          # 200 m < pico radius
    assert m[0, 2]                      # ~360.5 m < macro radius
    m2 = interference_from_positions(nodes, macro_radius=350.0, pico_radius=100.0)
    assert m2[0, 1] and not m2[1, 2] and not m2[0, 2]
    assert not np.any(np.diag(m))
    assert np.array_equal(m, m.T)


def test_validate_accepts_builders(multicell):
    assert validate(multicell) == []
    assert validate(single_link_graph()) == []


def _raw(nodes, links, flows, backhaul):
    interference = interference_from_positions(tuple(nodes), 420.0, 260.0)
    return TopologyGraph(tuple(nodes), tuple(links), tuple(flows),
                         frozenset(backhaul), interference)


def test_validate_flags_structsingle():
    nodes = [Node(0, MACRO, (0.0, 0.0)), Node(1, USER, (50.0, 0.0))]
    bad = _raw(nodes, [Link(0, 1, 0)], [Flow(0, 0, 1)], {0})
    assert any("transmits from user node" in p for p in validate(bad))
    bad = _raw(nodes, [Link(0, 0, 0)], [Flow(0, 0, 1)], {0})
    assert any("self-loop" in p for p in validate(bad))
    bad = _raw(nodes, [Link(1, 0, 1)], [Flow(0, 0, 1)], {0})
    assert any("indices must be 0..L-1" in p for p in validate(bad))
    bad = _raw(nodes, [Link(0, 0, 1, wired_capacity=0.0)], [Flow(0, 0, 1)], {0})
    assert any("non-positive wired capacity" in p for p in validate(bad))


def test_validate_flags_backhaul_and_flows():
    nodes = [Node(0, MACRO, (0.0, 0.0)), Node(1, PICO, (200.0, 0.0)),
             Node(2, USER, (260.0, 0.0))]
    links = [Link(0, 0, 1), Link(1, 1, 2)]
    bad = _raw(nodes, links, [Flow(0, 0, 2)], set())
    assert any("not backhaul-connected" in p for p in validate(bad))
    bad = _raw(nodes, links, [Flow(0, 0, 2)], {0, 2})
    assert any("backhaul entry 2 is not a base station" in p for p in validate(bad))
    bad = _raw(nodes, links, [Flow(0, 1, 2)], {0})
    assert any("source 1 is not backhaul-connected" in p for p in validate(bad))
    bad = _raw(nodes, links, [Flow(0, 0, 1)], {0})
    assert any("destination 1 is not a user node" in p for p in validate(bad))
    bad = _raw(nodes, [Link(0, 0, 1)], [Flow(0, 0, 2)], {0})
    assert any("unreachable" in p for p in validate(bad))


def test_validate_flags_interference_matrix():
    nodes = (Node(0, MACRO, (0.0, 0.0)), Node(1, USER, (40.0, 0.0)))
    good = interference_from_positions(nodes, 420.0, 260.0)
    g = TopologyGraph(nodes, (Link(0, 0, 1),), (Flow(0, 0, 1),), frozenset({0}),
                      np.zeros((2, 2), dtype=bool))
    assert any("shape" in p for p in validate(g))
    g = TopologyGraph(nodes, (Link(0, 0, 1),), (Flow(0, 0, 1),), frozenset({0}),
                      good.astype(int))
    assert any("must be boolean" in p for p in validate(g))
    asym = np.zeros((1, 1), dtype=bool)
    g = TopologyGraph(nodes, (Link(0, 0, 1),), (Flow(0, 0, 1),), frozenset({0}), asym)
    assert validate(g) == []
