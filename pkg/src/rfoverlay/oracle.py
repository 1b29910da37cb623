"""Global-view topology oracles.

These compute, from a bird's-eye snapshot of the ring and an availability
vector, what every node's next-available knowledge must be once the event
protocol settles. They are defined by direct brute-force scans on purpose:
the event-driven machinery is verified against them, never the other way
around.

Three structures are covered: the basic single-successor form that the event
protocol realizes, and the two variants that keep a candidate in each ring
direction (the bidirectional form, and its shortest-path refinement for nodes
that are down).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .bus import NULL, Identity, NodeId, Payload
from .protocol import SYSTEM_EMPTY, TRUST_ORE, Availability, Hint, NextAvailable


class RingError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class RingModel:
    """Arrival-ordered ring plus an availability vector aligned with it."""

    nodes: tuple[NodeId, ...]
    avail: tuple[Availability, ...]

    def __post_init__(self) -> None:
        if not self.nodes:
            raise RingError("a ring has at least one node")
        if len(set(self.nodes)) != len(self.nodes):
            raise RingError("node ids must be distinct")
        if len(self.avail) != len(self.nodes):
            raise RingError("availability vector must align with the nodes")

    @classmethod
    def of(cls, count: int, down: Iterable[NodeId] = ()) -> "RingModel":
        """Ring of nodes 0..count-1 in arrival order, `down` Unavailable."""
        down = set(down)
        unknown = down - set(range(count))
        if unknown:
            raise RingError(f"down nodes {sorted(unknown)} outside 0..{count - 1}")
        return cls(
            nodes=tuple(range(count)),
            avail=tuple(
                Availability.UNAVAILABLE if n in down else Availability.AVAILABLE
                for n in range(count)
            ),
        )

    @classmethod
    def from_states(
        cls, nodes: Iterable[NodeId], states: Mapping[NodeId, Availability]
    ) -> "RingModel":
        nodes = tuple(nodes)
        return cls(nodes=nodes, avail=tuple(states[n] for n in nodes))

    @property
    def size(self) -> int:
        return len(self.nodes)

    def position(self, node: NodeId) -> int:
        try:
            return self.nodes.index(node)
        except ValueError:
            raise RingError(f"{node} is not on the ring") from None

    def at(self, position: int) -> NodeId:
        return self.nodes[position % self.size]

    def successor(self, node: NodeId) -> NodeId:
        return self.at(self.position(node) + 1)

    def predecessor(self, node: NodeId) -> NodeId:
        return self.at(self.position(node) - 1)

    def is_available(self, node: NodeId) -> bool:
        return self.avail[self.position(node)] is Availability.AVAILABLE

    @property
    def available_count(self) -> int:
        return sum(1 for a in self.avail if a is Availability.AVAILABLE)


def mybox_fixpoint(ring: RingModel, node: NodeId) -> Payload:
    """The settled value of a node's status stream.

    The first Available node scanning ring-forward from the node itself
    (self included), or the no-node value when nothing is Available.
    """
    start = ring.position(node)
    for step in range(ring.size):
        candidate = ring.at(start + step)
        if ring.is_available(candidate):
            return Identity(candidate)
    return NULL


def basic_tst(ring: RingModel) -> dict[NodeId, NextAvailable]:
    """Settled next-available knowledge of every node, single-successor form.

    Trust the receiver while it is Available; otherwise hint at the first
    Available node strictly past it (the scan may wrap all the way back to
    the node itself); system-empty when nothing is Available.
    """
    assignment: dict[NodeId, NextAvailable] = {}
    for node in ring.nodes:
        successor = ring.successor(node)
        if ring.is_available(successor):
            assignment[node] = TRUST_ORE
            continue
        found: NextAvailable = SYSTEM_EMPTY
        start = ring.position(successor)
        for step in range(1, ring.size):
            candidate = ring.at(start + step)
            if ring.is_available(candidate):
                found = Hint(candidate)
                break
        assignment[node] = found
    return assignment


def brf_tst(ring: RingModel) -> dict[NodeId, tuple[NodeId | None, NodeId | None]]:
    """Bidirectional form: one Available candidate per ring direction.

    Each entry is (clockwise, counter-clockwise): the nearest Available node
    scanning forward from the successor, and the nearest scanning backward
    from the predecessor. The node itself is permitted only on a full wrap,
    so exactly one Available node x collapses every pair to (x, x); with
    nothing Available both entries are absent.
    """
    assignment: dict[NodeId, tuple[NodeId | None, NodeId | None]] = {}
    for node in ring.nodes:
        position = ring.position(node)
        clockwise: NodeId | None = None
        for step in range(1, ring.size + 1):
            candidate = ring.at(position + step)
            if ring.is_available(candidate):
                clockwise = candidate
                break
        counter: NodeId | None = None
        for step in range(1, ring.size + 1):
            candidate = ring.at(position - step)
            if ring.is_available(candidate):
                counter = candidate
                break
        assignment[node] = (clockwise, counter)
    return assignment


def sbrf_tst(
    ring: RingModel,
) -> dict[NodeId, tuple[NodeId | None, NodeId | None] | NodeId | None]:
    """Shortest-path refinement of the bidirectional form.

    Available nodes keep their directional pair. An Unavailable node keeps a
    single candidate: the Available node at minimal hop distance over both
    directions, the clockwise one winning ties; absent when nothing is
    Available.
    """
    pairs = brf_tst(ring)
    assignment: dict[NodeId, tuple[NodeId | None, NodeId | None] | NodeId | None] = {}
    for node in ring.nodes:
        if ring.is_available(node):
            assignment[node] = pairs[node]
            continue
        position = ring.position(node)
        nearest: NodeId | None = None
        for distance in range(1, ring.size):
            forward = ring.at(position + distance)
            if ring.is_available(forward):
                nearest = forward
                break
            backward = ring.at(position - distance)
            if ring.is_available(backward):
                nearest = backward
                break
        assignment[node] = nearest
    return assignment
