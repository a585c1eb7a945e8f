"""Physical WDM network topology and per-wavelength occupancy state.

The physical network is a directed multigraph: every undirected fiber in an
edge-list file becomes two directed arcs (one per direction).  A *wavelink*
is an (arc, wavelength) pair and is the unit of capacity; a connection holds
one wavelink per arc of its path, all on the same wavelength.

``Topology`` is immutable and safely shareable; ``NetworkState`` tracks which
wavelinks are in use and by which connection, and is updated functionally
(operations return a new state).
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import IO, Iterable, Sequence


class TopologyError(ValueError):
    """Malformed topology input (bad edge-list line, unknown node, ...)."""


class ProvisioningError(ValueError):
    """A lightpath assignment is invalid or conflicts with occupied wavelinks."""


@dataclass(frozen=True)
class Arc:
    """One directed fiber arc."""

    id: int
    tail: int
    head: int


@dataclass(frozen=True)
class LightpathAssignment:
    """A lightpath to install: a directed path on a single wavelength."""

    source: int
    destination: int
    wavelength: int
    path: tuple[int, ...]  # arc ids, in travel order
    expiry_stage: int


@dataclass(frozen=True)
class ActiveConnection:
    """A granted connection currently holding wavelinks on the network."""

    source: int
    destination: int
    wavelength: int
    path: tuple[int, ...]
    expiry_stage: int


class Topology:
    """Directed multigraph of the fiber plant plus the wavelength set.

    Nodes are dense integers ``0..n-1``.  Arcs come in anti-parallel pairs
    (every fiber is bidirectional), so the arc count is always even.
    Parallel fibers are allowed; self-loops are not.
    """

    def __init__(self, num_nodes: int, arcs: Sequence[tuple[int, int]], num_wavelengths: int = 1):
        if num_nodes < 1:
            raise TopologyError("topology needs at least one node")
        if num_wavelengths < 1:
            raise TopologyError("topology needs at least one wavelength")
        self.num_nodes = int(num_nodes)
        self.num_wavelengths = int(num_wavelengths)
        arc_list: list[Arc] = []
        for tail, head in arcs:
            if not (0 <= tail < num_nodes and 0 <= head < num_nodes):
                raise TopologyError(f"arc ({tail},{head}) references an unknown node")
            if tail == head:
                raise TopologyError(f"self-loop arc at node {tail}")
            arc_list.append(Arc(len(arc_list), int(tail), int(head)))
        if len(arc_list) % 2 != 0:
            raise TopologyError("directed arc count must be even (bidirectional fibers)")
        self.arcs: tuple[Arc, ...] = tuple(arc_list)
        self._out: tuple[tuple[Arc, ...], ...] = tuple(
            tuple(a for a in self.arcs if a.tail == v) for v in range(num_nodes)
        )
        self._in: tuple[tuple[Arc, ...], ...] = tuple(
            tuple(a for a in self.arcs if a.head == v) for v in range(num_nodes)
        )

    @property
    def nodes(self) -> range:
        return range(self.num_nodes)

    @property
    def wavelengths(self) -> range:
        return range(self.num_wavelengths)

    @property
    def num_arcs(self) -> int:
        return len(self.arcs)

    def out_arcs(self, v: int) -> tuple[Arc, ...]:
        """Arcs leaving node ``v``."""
        self._check_node(v)
        return self._out[v]

    def in_arcs(self, v: int) -> tuple[Arc, ...]:
        """Arcs entering node ``v``."""
        self._check_node(v)
        return self._in[v]

    def arc(self, arc_id: int) -> Arc:
        try:
            return self.arcs[arc_id]
        except IndexError:
            raise TopologyError(f"unknown arc id {arc_id}") from None

    def with_wavelengths(self, num_wavelengths: int) -> "Topology":
        """Same fiber plant with a different wavelength count."""
        return Topology(self.num_nodes, [(a.tail, a.head) for a in self.arcs], num_wavelengths)

    def _check_node(self, v: int) -> None:
        if not (0 <= v < self.num_nodes):
            raise TopologyError(f"unknown node id {v}")

    def __repr__(self) -> str:
        return (
            f"Topology(nodes={self.num_nodes}, arcs={self.num_arcs}, "
            f"wavelengths={self.num_wavelengths})"
        )


def delta_out(topology: Topology, v: int) -> tuple[Arc, ...]:
    """Arc set leaving ``v``."""
    return topology.out_arcs(v)


def delta_in(topology: Topology, v: int) -> tuple[Arc, ...]:
    """Arc set entering ``v``."""
    return topology.in_arcs(v)


def load_topology(
    reader: IO[bytes] | IO[str] | str,
    num_wavelengths: int = 1,
    fmt: str = "edge_list",
) -> Topology:
    """Parse an edge-list stream into a :class:`Topology`.

    Format: a ``nodes <n>`` header, then one ``edge u v [multiplicity]``
    line per undirected fiber.  Each fiber with multiplicity ``m`` yields
    ``2*m`` directed arcs.  Blank lines and ``#`` comments are skipped.

    Raises :class:`TopologyError` naming the offending line number on any
    malformed input.
    """
    if fmt != "edge_list":
        raise TopologyError(f"unsupported topology format {fmt!r}")
    if isinstance(reader, str):
        stream: IO[str] = io.StringIO(reader)
    elif isinstance(reader, io.TextIOBase):
        stream = reader
    else:
        stream = io.TextIOWrapper(reader, encoding="utf-8")

    num_nodes: int | None = None
    arcs: list[tuple[int, int]] = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "nodes":
            if num_nodes is not None:
                raise TopologyError(f"line {lineno}: duplicate 'nodes' header")
            if len(parts) != 2:
                raise TopologyError(f"line {lineno}: expected 'nodes <n>'")
            try:
                num_nodes = int(parts[1])
            except ValueError:
                raise TopologyError(f"line {lineno}: node count {parts[1]!r} is not an integer") from None
            if num_nodes < 1:
                raise TopologyError(f"line {lineno}: node count must be positive")
        elif parts[0] == "edge":
            if num_nodes is None:
                raise TopologyError(f"line {lineno}: 'edge' before 'nodes' header")
            if len(parts) not in (3, 4):
                raise TopologyError(f"line {lineno}: expected 'edge u v [multiplicity]'")
            try:
                u, v = int(parts[1]), int(parts[2])
                mult = int(parts[3]) if len(parts) == 4 else 1
            except ValueError:
                raise TopologyError(f"line {lineno}: non-integer field in edge line") from None
            if not (0 <= u < num_nodes and 0 <= v < num_nodes):
                raise TopologyError(f"line {lineno}: node id out of range in edge ({u},{v})")
            if u == v:
                raise TopologyError(f"line {lineno}: self-loop edge at node {u}")
            if mult < 1:
                raise TopologyError(f"line {lineno}: multiplicity must be >= 1")
            for _ in range(mult):
                arcs.append((u, v))
                arcs.append((v, u))
        else:
            raise TopologyError(f"line {lineno}: unrecognized directive {parts[0]!r}")
    if num_nodes is None:
        raise TopologyError("missing 'nodes' header")
    return Topology(num_nodes, arcs, num_wavelengths)


def validate_lightpath(topology: Topology, source: int, destination: int, path: Sequence[int]) -> None:
    """Check that ``path`` is a simple directed ``source -> destination`` walk.

    Raises :class:`ProvisioningError` on any violation.
    """
    if source == destination:
        raise ProvisioningError(f"source equals destination ({source})")
    if not path:
        raise ProvisioningError(f"empty path for pair ({source},{destination})")
    visited = [source]
    at = source
    for arc_id in path:
        arc = topology.arc(arc_id)
        if arc.tail != at:
            raise ProvisioningError(
                f"path for ({source},{destination}) breaks at arc {arc_id}: "
                f"expected tail {at}, got {arc.tail}"
            )
        at = arc.head
        if at in visited:
            raise ProvisioningError(f"path for ({source},{destination}) revisits node {at}")
        visited.append(at)
    if at != destination:
        raise ProvisioningError(f"path for ({source},{destination}) ends at node {at}")


@dataclass(frozen=True)
class NetworkState:
    """Per-wavelength wavelink occupancy and the active connection list.

    ``occupied[w]`` is the set of arc ids currently carrying a lightpath on
    wavelength ``w``; the available wavelinks on ``w`` are all arcs minus
    ``occupied[w]``.
    """

    topology: Topology
    occupied: tuple[frozenset[int], ...]
    connections: tuple[ActiveConnection, ...] = ()

    @classmethod
    def empty(cls, topology: Topology) -> "NetworkState":
        return cls(topology, tuple(frozenset() for _ in topology.wavelengths), ())

    def available(self, wavelength: int) -> frozenset[int]:
        """Arc ids with no granted request on ``wavelength``."""
        occ = self.occupied[wavelength]
        return frozenset(a.id for a in self.topology.arcs if a.id not in occ)

    def free_wavelength_count(self, arc_id: int) -> int:
        """Number of wavelengths on which ``arc_id`` is free."""
        return sum(1 for occ in self.occupied if arc_id not in occ)

    def spectrum_usage(self) -> int:
        """Total occupied wavelinks, summed over wavelengths."""
        return sum(len(occ) for occ in self.occupied)

    def demand_counts(self) -> dict[tuple[int, int], int]:
        """Per ordered pair, the number of active connections."""
        counts: dict[tuple[int, int], int] = {}
        for conn in self.connections:
            key = (conn.source, conn.destination)
            counts[key] = counts.get(key, 0) + 1
        return counts

    def assert_consistent(self) -> None:
        """Occupied wavelinks must be exactly the connections' wavelinks."""
        rebuilt: list[set[int]] = [set() for _ in self.topology.wavelengths]
        for conn in self.connections:
            validate_lightpath(self.topology, conn.source, conn.destination, conn.path)
            for arc_id in conn.path:
                if arc_id in rebuilt[conn.wavelength]:
                    raise ProvisioningError(
                        f"wavelength conflict on (arc {arc_id}, wavelength {conn.wavelength})"
                    )
                rebuilt[conn.wavelength].add(arc_id)
        if tuple(frozenset(o) for o in rebuilt) != self.occupied:
            raise ProvisioningError("occupied sets do not match the active connections")


def apply_provisioning(
    state: NetworkState, assignment: Iterable[LightpathAssignment]
) -> NetworkState:
    """Install lightpaths, returning the extended state.

    Every assignment is validated as a simple path, and every wavelink it
    needs must be free both in ``state`` and within the assignment itself;
    otherwise a :class:`ProvisioningError` names the conflicting (arc,
    wavelength) pair.
    """
    topo = state.topology
    occupied = [set(occ) for occ in state.occupied]
    new_connections = list(state.connections)
    for lp in assignment:
        if not (0 <= lp.wavelength < topo.num_wavelengths):
            raise ProvisioningError(f"unknown wavelength {lp.wavelength}")
        validate_lightpath(topo, lp.source, lp.destination, lp.path)
        for arc_id in lp.path:
            if arc_id in occupied[lp.wavelength]:
                raise ProvisioningError(
                    f"wavelength conflict on (arc {arc_id}, wavelength {lp.wavelength})"
                )
            occupied[lp.wavelength].add(arc_id)
        new_connections.append(
            ActiveConnection(
                lp.source, lp.destination, lp.wavelength, tuple(lp.path), lp.expiry_stage
            )
        )
    return NetworkState(topo, tuple(frozenset(o) for o in occupied), tuple(new_connections))


def drop_expired(state: NetworkState, stage: int) -> NetworkState:
    """Remove connections with ``expiry_stage <= stage``, freeing their wavelinks."""
    keep = [c for c in state.connections if c.expiry_stage > stage]
    if len(keep) == len(state.connections):
        return state
    occupied = [set(occ) for occ in state.occupied]
    for conn in state.connections:
        if conn.expiry_stage <= stage:
            for arc_id in conn.path:
                occupied[conn.wavelength].discard(arc_id)
    return NetworkState(state.topology, tuple(frozenset(o) for o in occupied), tuple(keep))


def rebuild_with_connections(
    state: NetworkState, connections: Iterable[ActiveConnection]
) -> NetworkState:
    """Replace the whole provisioning (used when rerouting to a new target)."""
    fresh = NetworkState.empty(state.topology)
    return apply_provisioning(
        fresh,
        [
            LightpathAssignment(c.source, c.destination, c.wavelength, c.path, c.expiry_stage)
            for c in connections
        ],
    )
