"""Topology parsing, wavelink bookkeeping, and state transitions."""

from __future__ import annotations

import io
from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from stochrwa.topology import (
    LightpathAssignment,
    NetworkState,
    ProvisioningError,
    Topology,
    TopologyError,
    apply_provisioning,
    delta_in,
    delta_out,
    drop_expired,
    load_topology,
)

DATA = Path(__file__).resolve().parents[1] / "src" / "stochrwa" / "data"

TABLE_COUNTS = {
    "abilene": (12, 30),
    "cost239": (11, 50),
    "nsf": (14, 42),
    "atlanta": (15, 44),
    "usa": (24, 88),
    "brazil": (27, 140),
}


@pytest.mark.parametrize("name,expected", sorted(TABLE_COUNTS.items()))
def test_bundled_networks_match_published_sizes(name, expected):
    with open(DATA / f"{name}.edges", "r", encoding="utf-8") as fh:
        topo = load_topology(fh)
    assert (topo.num_nodes, topo.num_arcs) == expected
    assert topo.num_arcs % 2 == 0


def test_single_fiber_network():
    topo = load_topology("nodes 2\nedge 0 1\n")
    assert topo.num_nodes == 2
    assert topo.num_arcs == 2
    assert {(a.tail, a.head) for a in topo.arcs} == {(0, 1), (1, 0)}


def test_multiplicity_creates_parallel_arcs():
    topo = load_topology("nodes 2\nedge 0 1 3\n")
    assert topo.num_arcs == 6


@pytest.mark.parametrize(
    "text,fragment",
    [
        ("nodes 2\nedge 0 2\n", "line 2"),
        ("nodes 2\nedge 1 1\n", "self-loop"),
        ("nodes 2\nedge 0\n", "line 2"),
        ("edge 0 1\n", "before 'nodes'"),
        ("nodes 2\nedge a b\n", "non-integer"),
        ("nodes 2\nfoo 1 2\n", "unrecognized"),
        ("", "missing 'nodes'"),
    ],
)
def test_parse_errors_name_the_line(text, fragment):
    with pytest.raises(TopologyError, match=fragment.replace("(", "\\(")):
        load_topology(text)


def test_delta_sets_two_node(two_node_topology):
    topo = two_node_topology
    assert [a.head for a in delta_out(topo, 0)] == [1]
    assert [a.tail for a in delta_in(topo, 0)] == [1]
    with pytest.raises(TopologyError):
        delta_out(topo, 7)


def test_delta_degree_matches_edge_list_text():
    text = (DATA / "abilene.edges").read_text()
    degree: dict[int, int] = {}
    for line in text.splitlines():
        if line.startswith("edge"):
            _, u, v = line.split()
            degree[int(u)] = degree.get(int(u), 0) + 1
            degree[int(v)] = degree.get(int(v), 0) + 1
    with open(DATA / "abilene.edges", "r", encoding="utf-8") as fh:
        topo = load_topology(fh)
    for v in topo.nodes:
        assert len(delta_out(topo, v)) == degree[v]
        assert len(delta_in(topo, v)) == degree[v]


def test_handshake_identity():
    with open(DATA / "nsf.edges", "r", encoding="utf-8") as fh:
        topo = load_topology(fh)
    assert sum(len(delta_out(topo, v)) for v in topo.nodes) == topo.num_arcs


def test_apply_single_hop(two_node_topology):
    state = NetworkState.empty(two_node_topology)
    arc = two_node_topology.out_arcs(0)[0].id
    new = apply_provisioning(state, [LightpathAssignment(0, 1, 0, (arc,), 5)])
    assert len(new.occupied[0]) == 1
    assert state.occupied[0] == frozenset()  # original untouched
    new.assert_consistent()


def test_conflicting_assignments_rejected(six_ring):
    state = NetworkState.empty(six_ring)
    arc01 = next(a.id for a in six_ring.arcs if (a.tail, a.head) == (0, 1))
    arc12 = next(a.id for a in six_ring.arcs if (a.tail, a.head) == (1, 2))
    lp_a = LightpathAssignment(0, 2, 0, (arc01, arc12), 3)
    lp_b = LightpathAssignment(0, 1, 0, (arc01,), 3)
    with pytest.raises(ProvisioningError, match=rf"arc {arc01}, wavelength 0"):
        apply_provisioning(state, [lp_a, lp_b])


def test_shared_fiber_same_wavelength_is_a_conflict():
    """Two lightpaths riding one fiber on one wavelength must be rejected;
    the same paths on distinct wavelengths are a valid provisioning."""
    with open(DATA / "nsf.edges", "r", encoding="utf-8") as fh:
        topo = load_topology(fh, num_wavelengths=3)

    def arc(u, v):
        return next(a.id for a in topo.arcs if (a.tail, a.head) == (u, v))

    # 5 -> 4 -> 3 and 5 -> 4 -> 6 share fiber (5,4).
    lp1 = LightpathAssignment(5, 3, 0, (arc(5, 4), arc(4, 3)), 9)
    lp2 = LightpathAssignment(5, 6, 0, (arc(5, 4), arc(4, 6)), 9)
    state = NetworkState.empty(topo)
    with pytest.raises(ProvisioningError, match="wavelength conflict"):
        apply_provisioning(state, [lp1, lp2])
    ok = apply_provisioning(
        state, [lp1, LightpathAssignment(5, 6, 1, (arc(5, 4), arc(4, 6)), 9)]
    )
    ok.assert_consistent()


def test_invalid_paths_rejected(six_ring):
    state = NetworkState.empty(six_ring)
    a01 = next(a.id for a in six_ring.arcs if (a.tail, a.head) == (0, 1))
    a21 = next(a.id for a in six_ring.arcs if (a.tail, a.head) == (2, 1))
    with pytest.raises(ProvisioningError, match="breaks"):
        apply_provisioning(state, [LightpathAssignment(0, 2, 0, (a01, a21), 1)])
    with pytest.raises(ProvisioningError, match="ends at"):
        apply_provisioning(state, [LightpathAssignment(0, 2, 0, (a01,), 1)])
    with pytest.raises(ProvisioningError, match="empty path"):
        apply_provisioning(state, [LightpathAssignment(0, 2, 0, (), 1)])


def test_drop_expired_frees_wavelinks(six_ring):
    state = NetworkState.empty(six_ring)
    a01 = next(a.id for a in six_ring.arcs if (a.tail, a.head) == (0, 1))
    a12 = next(a.id for a in six_ring.arcs if (a.tail, a.head) == (1, 2))
    state = apply_provisioning(
        state,
        [
            LightpathAssignment(0, 1, 0, (a01,), 2),
            LightpathAssignment(1, 2, 1, (a12,), 5),
        ],
    )
    assert state.spectrum_usage() == 2
    assert drop_expired(state, 1) is state  # nothing expires
    later = drop_expired(state, 2)
    assert later.spectrum_usage() == 1
    assert [c.destination for c in later.connections] == [2]
    gone = drop_expired(state, 99)
    assert gone.spectrum_usage() == 0
    assert all(not occ for occ in gone.occupied)


@given(st.data())
def test_apply_then_drop_roundtrip(data):
    """Installing connections and dropping them restores occupancy exactly,
    and usage always equals the sum of active path lengths."""
    topo = Topology(4, [(0, 1), (1, 0), (1, 2), (2, 1), (2, 3), (3, 2), (3, 0), (0, 3)], 2)
    state = NetworkState.empty(topo)
    n = data.draw(st.integers(1, 4))
    placed = 0
    for i in range(n):
        w = data.draw(st.integers(0, 1), label=f"wavelength {i}")
        start = data.draw(st.integers(0, 3), label=f"start {i}")
        length = data.draw(st.integers(1, 3), label=f"length {i}")
        path = []
        node = start
        ok = True
        for _ in range(length):
            arc = next(a for a in topo.out_arcs(node) if a.head == (node + 1) % 4)
            if arc.id in state.occupied[w]:
                ok = False
                break
            path.append(arc.id)
            node = arc.head
        if not ok:
            continue
        state = apply_provisioning(
            state, [LightpathAssignment(start, node, w, tuple(path), expiry_stage=i + 1)]
        )
        placed += 1
    state.assert_consistent()
    assert state.spectrum_usage() == sum(len(c.path) for c in state.connections)
    cleared = drop_expired(state, n + 1)
    assert cleared.spectrum_usage() == 0
    assert cleared.occupied == NetworkState.empty(topo).occupied


def test_available_and_free_wavelength_count(six_ring):
    state = NetworkState.empty(six_ring)
    a01 = next(a.id for a in six_ring.arcs if (a.tail, a.head) == (0, 1))
    state = apply_provisioning(state, [LightpathAssignment(0, 1, 1, (a01,), 4)])
    assert a01 in state.available(0)
    assert a01 not in state.available(1)
    assert state.free_wavelength_count(a01) == 1
    assert state.demand_counts() == {(0, 1): 1}


def test_load_topology_rejects_unknown_format(two_node_topology):
    with pytest.raises(TopologyError, match="unsupported topology format"):
        load_topology("nodes 2\nedge 0 1\n", fmt="graphml")


def test_byte_stream_input():
    topo = load_topology(io.BytesIO(b"nodes 3\nedge 0 1\nedge 1 2\n"))
    assert topo.num_arcs == 4
