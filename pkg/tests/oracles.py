"""Independent brute-force oracles for small RWA instances.

These never touch the LP machinery: they enumerate lightpath assignments
directly (all simple paths x wavelengths per request, plus rejection) with
branch-and-bound pruning, and evaluate two-stage objectives by exhaustive
recursion with memoization on the occupied-wavelink set.
"""

from __future__ import annotations

from functools import lru_cache

from stochrwa.topology import Topology
from stochrwa.traffic import DemandMatrix, Pair

Wavelink = tuple[int, int]  # (arc id, wavelength)


def all_simple_paths(topo: Topology, s: int, d: int) -> list[tuple[int, ...]]:
    """Every simple directed path from s to d, as arc-id tuples."""
    paths: list[tuple[int, ...]] = []

    def walk(node: int, used: list[int], visited: set[int]) -> None:
        if node == d:
            paths.append(tuple(used))
            return
        for arc in topo.out_arcs(node):
            if arc.head not in visited:
                walk(arc.head, used + [arc.id], visited | {arc.head})

    walk(s, [], {s})
    return paths


def request_options(
    topo: Topology, wavelinks: dict[int, frozenset[int]], pair: Pair
) -> list[frozenset[Wavelink]]:
    """All lightpath choices for one request: each a set of wavelinks."""
    options: list[frozenset[Wavelink]] = []
    for path in all_simple_paths(topo, pair[0], pair[1]):
        for w, free in wavelinks.items():
            if all(arc in free for arc in path):
                options.append(frozenset((arc, w) for arc in path))
    return options


def expand_requests(demand: DemandMatrix) -> list[Pair]:
    requests: list[Pair] = []
    for pair, count in demand.counts:
        requests.extend([pair] * count)
    return requests


def max_grants(
    topo: Topology,
    wavelinks: dict[int, frozenset[int]],
    demand: DemandMatrix,
    occupied: frozenset[Wavelink] = frozenset(),
) -> int:
    """Maximum granted requests over all conflict-free assignments."""
    requests = expand_requests(demand)
    option_sets = [request_options(topo, wavelinks, pair) for pair in requests]
    # Identical pairs are interchangeable; sorting keeps pruning effective.
    order = sorted(range(len(requests)), key=lambda i: requests[i])
    best = 0

    def search(idx: int, used: frozenset[Wavelink], granted: int) -> None:
        nonlocal best
        if granted > best:
            best = granted
        remaining = len(order) - idx
        if granted + remaining <= best or idx == len(order):
            return
        i = order[idx]
        for option in option_sets[i]:
            if not (option & used):
                search(idx + 1, used | option, granted + 1)
        search(idx + 1, used, granted)

    search(0, occupied, 0)
    return best


def min_wavelinks_all_granted(
    topo: Topology, wavelinks: dict[int, frozenset[int]], demand: DemandMatrix
) -> int | None:
    """Fewest wavelinks over assignments granting every request; None if impossible."""
    requests = expand_requests(demand)
    option_sets = [sorted(request_options(topo, wavelinks, pair), key=len) for pair in requests]
    best: int | None = None

    def search(idx: int, used: frozenset[Wavelink], total: int) -> None:
        nonlocal best
        if best is not None and total >= best:
            return
        if idx == len(requests):
            best = total
            return
        for option in option_sets[idx]:
            if not (option & used):
                search(idx + 1, used | option, total + len(option))

    search(0, frozenset(), 0)
    return best


def two_stage_optimum(
    topo: Topology,
    wavelinks: dict[int, frozenset[int]],
    first_demand: DemandMatrix,
    scenarios: list[DemandMatrix],
    *,
    must_grant_all: bool = False,
) -> float:
    """Exact two-stage value by enumerating every first-stage provisioning.

    First-stage value is the granted count (zero when ``must_grant_all``,
    the rerouting case); each scenario's recourse is the exact integral
    maximum on the leftover capacity, averaged over scenarios.
    """
    requests = expand_requests(first_demand)
    option_sets = [request_options(topo, wavelinks, pair) for pair in requests]
    n_scen = len(scenarios)

    @lru_cache(maxsize=None)
    def recourse(used: frozenset[Wavelink], k: int) -> int:
        return max_grants(topo, wavelinks, scenarios[k], occupied=used)

    best = -float("inf")

    def evaluate(used: frozenset[Wavelink], granted: int) -> None:
        nonlocal best
        stage1 = 0.0 if must_grant_all else float(granted)
        value = stage1
        if n_scen:
            value += sum(recourse(used, k) for k in range(n_scen)) / n_scen
        if value > best:
            best = value

    def search(idx: int, used: frozenset[Wavelink], granted: int) -> None:
        if idx == len(requests):
            if not must_grant_all or granted == len(requests):
                evaluate(used, granted)
            return
        for option in option_sets[idx]:
            if not (option & used):
                search(idx + 1, used | option, granted + 1)
        if not must_grant_all:
            search(idx + 1, used, granted)

    search(0, frozenset(), 0)
    return best
