"""Shared fixtures and instance generators."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings

from stochrwa.topology import NetworkState, Topology
from stochrwa.traffic import DemandMatrix

settings.register_profile("suite", max_examples=40, deadline=None)
settings.load_profile("suite")


def ring_topology(n: int, wavelengths: int = 1) -> Topology:
    arcs = []
    for i in range(n):
        j = (i + 1) % n
        arcs.append((i, j))
        arcs.append((j, i))
    return Topology(n, arcs, wavelengths)


def random_topology(rng: np.random.Generator, max_nodes: int = 6, max_edges: int = 8, max_wavelengths: int = 2) -> Topology:
    """Connected random multigraph-free topology with bidirectional fibers."""
    n = int(rng.integers(3, max_nodes + 1))
    edges: set[tuple[int, int]] = set()
    order = list(range(n))
    rng.shuffle(order)
    for i in range(1, n):
        u, v = order[i], order[int(rng.integers(0, i))]
        edges.add((min(u, v), max(u, v)))
    target = int(rng.integers(len(edges), min(max_edges, n * (n - 1) // 2) + 1))
    while len(edges) < target:
        u, v = rng.choice(n, 2, replace=False)
        edges.add((min(int(u), int(v)), max(int(u), int(v))))
    arcs: list[tuple[int, int]] = []
    for u, v in sorted(edges):
        arcs.append((u, v))
        arcs.append((v, u))
    return Topology(n, arcs, int(rng.integers(1, max_wavelengths + 1)))


def random_demand(rng: np.random.Generator, num_nodes: int, max_requests: int = 4) -> DemandMatrix:
    k = int(rng.integers(1, max_requests + 1))
    counts: dict[tuple[int, int], int] = {}
    for _ in range(k):
        s = int(rng.integers(num_nodes))
        d = int(rng.integers(num_nodes - 1))
        if d >= s:
            d += 1
        counts[(s, d)] = counts.get((s, d), 0) + 1
    return DemandMatrix.from_mapping(counts)


@pytest.fixture
def two_node_topology() -> Topology:
    return Topology(2, [(0, 1), (1, 0)], 1)


@pytest.fixture
def six_ring() -> Topology:
    return ring_topology(6, 2)


@pytest.fixture
def empty_state(six_ring) -> NetworkState:
    return NetworkState.empty(six_ring)
