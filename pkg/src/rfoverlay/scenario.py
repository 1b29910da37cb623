"""Scenario configuration, the run loop, and trace verification.

A scenario joins every node serially, then walks the availability schedule
interval by interval, applying each state change as a toggle driven to
quiescence (ascending node order). The basic topology runs the full event
protocol; the two variant topologies have no event protocol, so their runs
record per-interval oracle snapshots instead.

Verification replays a trace against the oracles: at every interval's
quiescent point, each node's next-available knowledge and the last value on
its status stream must match the all-seeing computation for that interval's
availability vector.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import IO, Any

from .bus import Identity, NodeId, Payload, TopicName
from .metrics import Metrics, compute_metrics
from .network import JoinError, Network
from .oracle import RingModel, basic_tst, brf_tst, mybox_fixpoint, sbrf_tst
from .protocol import Availability, NextAvailable
from .trace import (
    KIND_JOIN,
    KIND_PUBLISH,
    KIND_TOGGLE,
    KIND_VIEW_CHANGE,
    Trace,
    TraceError,
    TraceRecorder,
    payload_from_obj,
    tre_from_obj,
)
from .workload import AvailabilitySchedule, WorkloadConfig, build_schedule


class ConfigError(ValueError):
    """A scenario configuration that does not validate."""


class VerificationError(RuntimeError):
    """Raised by in-run verification when a quiescent point disagrees."""


class Topology(str, Enum):
    BASIC = "basic"
    BRF = "brf"
    SBRF = "sbrf"


@dataclass(frozen=True, slots=True)
class ScenarioConfig:
    node_count: int
    topology: Topology = Topology.BASIC
    workload: WorkloadConfig = field(default_factory=WorkloadConfig)
    arrivals_depth: int | None = None  # None resolves to max(64, node_count)
    delivery_delay: int = 0
    verify_each_interval: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        if self.node_count < 1:
            raise ConfigError("node_count must be >= 1")
        if self.arrivals_depth is None:
            object.__setattr__(self, "arrivals_depth", max(64, self.node_count))
        if self.arrivals_depth < self.node_count:
            raise ConfigError(
                "arrivals_depth must cover every join "
                f"({self.arrivals_depth} < {self.node_count})"
            )
        if self.delivery_delay < 0:
            raise ConfigError("delivery_delay must be >= 0")


# ---------------------------------------------------------------------------
# Config file handling (a strict key/value tree)

_WORKLOAD_KEYS = ("lambda", "threshold", "intervals", "seed")
_TOP_KEYS = (
    "node_count",
    "topology",
    "workload",
    "arrivals_depth",
    "delivery_delay",
    "verify_each_interval",
    "seed",
)


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


def _as_int(value: Any, name: str) -> int:
    _require(isinstance(value, int) and not isinstance(value, bool), f"{name} must be an integer")
    return value


def parse_config(obj: Any) -> ScenarioConfig:
    """Build a ScenarioConfig from a parsed key/value tree; strict keys."""
    _require(isinstance(obj, dict), "config root must be a mapping")
    unknown = set(obj) - set(_TOP_KEYS)
    _require(not unknown, f"unknown config keys: {sorted(unknown)}")
    _require("node_count" in obj, "node_count is required")

    node_count = _as_int(obj["node_count"], "node_count")
    seed = _as_int(obj.get("seed", 0), "seed")

    topology_raw = obj.get("topology", Topology.BASIC.value)
    try:
        topology = Topology(topology_raw)
    except ValueError:
        raise ConfigError(f"unknown topology {topology_raw!r}") from None

    workload_obj = obj.get("workload", {})
    _require(isinstance(workload_obj, dict), "workload must be a mapping")
    unknown = set(workload_obj) - set(_WORKLOAD_KEYS)
    _require(not unknown, f"unknown workload keys: {sorted(unknown)}")
    lam = workload_obj.get("lambda", 2.0)
    _require(isinstance(lam, (int, float)) and not isinstance(lam, bool), "lambda must be a number")
    try:
        workload = WorkloadConfig(
            lam=float(lam),
            threshold=_as_int(workload_obj.get("threshold", 2), "threshold"),
            intervals=_as_int(workload_obj.get("intervals", 100), "intervals"),
            seed=_as_int(workload_obj.get("seed", seed), "workload seed"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    verify_flag = obj.get("verify_each_interval", False)
    _require(isinstance(verify_flag, bool), "verify_each_interval must be a boolean")

    depth = obj.get("arrivals_depth")
    try:
        return ScenarioConfig(
            node_count=node_count,
            topology=topology,
            workload=workload,
            arrivals_depth=None if depth is None else _as_int(depth, "arrivals_depth"),
            delivery_delay=_as_int(obj.get("delivery_delay", 0), "delivery_delay"),
            verify_each_interval=verify_flag,
            seed=seed,
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(stream: IO[str]) -> ScenarioConfig:
    try:
        obj = json.load(stream)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return parse_config(obj)


def config_with_seed(cfg: ScenarioConfig, seed: int) -> ScenarioConfig:
    """The same scenario re-rooted on another seed (workload included)."""
    return replace(cfg, seed=seed, workload=replace(cfg.workload, seed=seed))


# ---------------------------------------------------------------------------
# Oracle agreement of a live network


def ring_of(net: Network) -> RingModel:
    nodes = tuple(sorted(net.views))
    return RingModel.from_states(nodes, {n: net.views[n].state for n in nodes})


def oracle_mismatches(net: Network) -> list[tuple[NodeId, str, str, str]]:
    """Compare a quiescent network against the all-seeing computation.

    A node that never published on its status stream has never toggled, so
    its settled value is its own identity.
    """
    ring = ring_of(net)
    expected = basic_tst(ring)
    mismatches: list[tuple[NodeId, str, str, str]] = []
    for node in ring.nodes:
        observed: NextAvailable = net.views[node].tre
        if observed != expected[node]:
            mismatches.append((node, "tre", repr(expected[node]), repr(observed)))
        want = mybox_fixpoint(ring, node)
        got: Payload | None = net.last_mybox_value(node)
        if got is None:
            got = Identity(node)
        if got != want:
            mismatches.append((node, "mybox", repr(want), repr(got)))
    return mismatches


# ---------------------------------------------------------------------------
# Run loop


def _brf_entry_obj(entry: tuple[NodeId | None, NodeId | None]) -> dict:
    return {"pair": [entry[0], entry[1]]}


def _sbrf_entry_obj(entry: tuple[NodeId | None, NodeId | None] | NodeId | None) -> dict:
    if isinstance(entry, tuple):
        return {"pair": [entry[0], entry[1]]}
    return {"candidate": entry}


def _variant_assignment_objs(
    topology: Topology, ring: RingModel
) -> dict[NodeId, dict]:
    if topology is Topology.BRF:
        return {n: _brf_entry_obj(e) for n, e in brf_tst(ring).items()}
    return {n: _sbrf_entry_obj(e) for n, e in sbrf_tst(ring).items()}


def _resolve_schedule(
    cfg: ScenarioConfig, schedule: AvailabilitySchedule | None
) -> AvailabilitySchedule:
    if schedule is None:
        return build_schedule(cfg.workload, range(cfg.node_count))
    for node in range(cfg.node_count):
        if node not in schedule.states:
            raise ConfigError(f"schedule does not cover node {node}")
    return schedule


def run_scenario(
    cfg: ScenarioConfig,
    schedule: AvailabilitySchedule | None = None,
    interleaved_toggles: bool = False,
    record: bool = True,
) -> tuple[Trace, Metrics]:
    """Run one scenario to completion; returns its trace and metrics.

    `schedule` overrides the Poisson draw with an explicit availability
    pattern (used to force specific topologies). `interleaved_toggles` is the
    stress mode: all of an interval's toggles land before any dispatch, so
    propagation waves race each other.
    """
    schedule = _resolve_schedule(cfg, schedule)
    if cfg.topology is Topology.BASIC:
        return _run_basic(cfg, schedule, interleaved_toggles, record)
    return _run_snapshots(cfg, schedule, record)


def _run_basic(
    cfg: ScenarioConfig,
    schedule: AvailabilitySchedule,
    interleaved_toggles: bool,
    record: bool,
) -> tuple[Trace, Metrics]:
    recorder = TraceRecorder() if record else None
    net = Network(
        arrivals_depth=cfg.arrivals_depth,
        delivery_delay=cfg.delivery_delay,
        recorder=recorder,
    )
    for node in range(cfg.node_count):
        net.bus.advance()
        if recorder is not None:
            recorder.join(net.bus.now, node)
        net.add_node(node)
        net.dispatch_to_quiescence()
        if not net.join_completed(node):
            raise JoinError(f"{node} never completed its join")

    current = {node: Availability.AVAILABLE for node in range(cfg.node_count)}
    for interval in range(schedule.intervals):
        net.bus.advance()
        changes = [
            (node, schedule.state(node, interval))
            for node in range(cfg.node_count)
            if schedule.state(node, interval) is not current[node]
        ]
        if interleaved_toggles:
            for node, to_state in changes:
                if recorder is not None:
                    recorder.toggle(net.bus.now, node, to_state, interval)
                net.toggle(node, to_state)
                current[node] = to_state
            net.dispatch_to_quiescence()
        else:
            for node, to_state in changes:
                net.bus.advance()
                if recorder is not None:
                    recorder.toggle(net.bus.now, node, to_state, interval)
                net.toggle(node, to_state)
                current[node] = to_state
                net.dispatch_to_quiescence()
        if cfg.verify_each_interval:
            mismatches = oracle_mismatches(net)
            if mismatches:
                raise VerificationError(
                    f"interval {interval} disagrees with the oracle: {mismatches}"
                )
    trace = recorder.events if recorder is not None else []
    return trace, compute_metrics(trace, intervals=schedule.intervals)


def _run_snapshots(
    cfg: ScenarioConfig, schedule: AvailabilitySchedule, record: bool
) -> tuple[Trace, Metrics]:
    recorder = TraceRecorder() if record else None
    now = 0
    nodes = tuple(range(cfg.node_count))
    for node in nodes:
        now += 1
        if recorder is not None:
            recorder.join(now, node)
    current = {node: Availability.AVAILABLE for node in nodes}
    last_entries: dict[NodeId, dict] = {}
    for interval in range(schedule.intervals):
        now += 1
        for node in nodes:
            to_state = schedule.state(node, interval)
            if to_state is not current[node]:
                now += 1
                if recorder is not None:
                    recorder.toggle(now, node, to_state, interval)
                current[node] = to_state
        ring = RingModel.from_states(nodes, current)
        for node, entry in _variant_assignment_objs(cfg.topology, ring).items():
            if last_entries.get(node) != entry:
                last_entries[node] = entry
                if recorder is not None:
                    recorder.assignment(now, node, entry)
    trace = recorder.events if recorder is not None else []
    return trace, compute_metrics(trace, intervals=schedule.intervals)


# ---------------------------------------------------------------------------
# Verification


@dataclass(frozen=True, slots=True)
class Mismatch:
    interval: int
    node: NodeId
    field: str  # "tre" | "mybox" | "assignment"
    expected: str
    observed: str


@dataclass(frozen=True, slots=True)
class VerifyReport:
    intervals_checked: int
    mismatches: tuple[Mismatch, ...]

    @property
    def passed(self) -> bool:
        return not self.mismatches


class _Replay:
    """Streaming reconstruction of a run from its trace."""

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.joined: list[NodeId] = []
        self.avail: dict[NodeId, Availability] = {}
        self.tre: dict[NodeId, NextAvailable] = {}
        self.mybox: dict[NodeId, Payload] = {}
        self.entries: dict[NodeId, dict] = {}
        self.last_time = 0

    def apply(self, event) -> None:
        if event.time < self.last_time:
            raise TraceError(f"time went backwards at {event}")
        self.last_time = event.time
        if event.kind == KIND_JOIN:
            node = self._node(event)
            if node in self.avail:
                raise TraceError(f"{node} joined twice")
            self.joined.append(node)
            self.avail[node] = Availability.AVAILABLE
        elif event.kind == KIND_TOGGLE:
            node = self._node(event)
            try:
                self.avail[node] = Availability(event.detail["to"])
            except (KeyError, ValueError) as exc:
                raise TraceError(f"bad toggle detail {event.detail!r}") from exc
        elif event.kind == KIND_VIEW_CHANGE:
            node = self._node(event)
            detail = event.detail
            if "view" in detail:
                view_obj = detail["view"]
                try:
                    self.tre[node] = tre_from_obj(view_obj["tre"])
                    self.avail[node] = Availability(view_obj["state"])
                except (KeyError, TypeError, ValueError) as exc:
                    raise TraceError(f"bad view object {view_obj!r}") from exc
            elif "assignment" in detail:
                self.entries[node] = detail["assignment"]
            else:
                raise TraceError(f"view change without content: {detail!r}")
        elif event.kind == KIND_PUBLISH:
            node = self._node(event)
            try:
                topic = event.detail["key"]["topic"]
            except (KeyError, TypeError) as exc:
                raise TraceError(f"bad publish detail {event.detail!r}") from exc
            if topic == TopicName.MYBOX.value:
                self.mybox[node] = payload_from_obj(event.detail["payload"])

    def _node(self, event) -> NodeId:
        if event.node is None:
            raise TraceError(f"{event.kind} event without a node")
        return event.node

    def ring(self, vector: dict[NodeId, Availability]) -> RingModel:
        return RingModel.from_states(self.joined, vector)


def verify_trace(
    trace: Trace,
    cfg: ScenarioConfig,
    schedule: AvailabilitySchedule | None = None,
) -> VerifyReport:
    """Check a trace's quiescent points against the oracles.

    Structural problems (wrong node set, inconsistent availability, broken
    records) raise TraceError; oracle disagreement lands in the report.
    """
    schedule = _resolve_schedule(cfg, schedule)
    replay = _Replay(cfg)
    mismatches: list[Mismatch] = []

    # Interval k's quiescent point is right before the first toggle of any
    # later interval (or the end of the trace). Toggles carry their interval.
    def check_interval(interval: int) -> None:
        vector = schedule.vector(interval)
        observed_vector = {n: replay.avail[n] for n in replay.joined}
        if observed_vector != vector:
            raise TraceError(
                f"interval {interval}: trace availability diverges from the schedule"
            )
        ring = replay.ring(vector)
        if cfg.topology is Topology.BASIC:
            expected = basic_tst(ring)
            for node in ring.nodes:
                seen = replay.tre.get(node)
                if seen != expected[node]:
                    mismatches.append(
                        Mismatch(interval, node, "tre", repr(expected[node]), repr(seen))
                    )
                want = mybox_fixpoint(ring, node)
                got = replay.mybox.get(node, Identity(node))
                if got != want:
                    mismatches.append(
                        Mismatch(interval, node, "mybox", repr(want), repr(got))
                    )
        else:
            expected_entries = _variant_assignment_objs(cfg.topology, ring)
            for node in ring.nodes:
                want_obj = expected_entries[node]
                got_obj = replay.entries.get(node)
                if got_obj != want_obj:
                    mismatches.append(
                        Mismatch(
                            interval,
                            node,
                            "assignment",
                            json.dumps(want_obj, sort_keys=True),
                            json.dumps(got_obj, sort_keys=True),
                        )
                    )

    current_interval = -1
    for event in trace:
        if event.kind == KIND_TOGGLE:
            try:
                interval = int(event.detail["interval"])
                to_state = Availability(event.detail["to"])
            except (KeyError, TypeError, ValueError) as exc:
                raise TraceError(f"bad toggle detail {event.detail!r}") from exc
            if interval < current_interval:
                raise TraceError("toggle intervals must not go backwards")
            if not 0 <= interval < schedule.intervals:
                raise TraceError(f"toggle interval {interval} outside the schedule")
            if event.node is None or event.node not in schedule.states:
                raise TraceError(f"toggle of unknown node {event.node!r}")
            if to_state is not schedule.state(event.node, interval):
                raise TraceError(
                    f"toggle of {event.node} at interval {interval} "
                    "diverges from the schedule"
                )
            if interval > current_interval:
                for pending in range(max(current_interval, 0), interval):
                    check_interval(pending)
                current_interval = interval
        replay.apply(event)
    if len(replay.joined) != cfg.node_count:
        raise TraceError(
            f"trace joined {len(replay.joined)} nodes, config says {cfg.node_count}"
        )
    for pending in range(max(current_interval, 0), schedule.intervals):
        check_interval(pending)

    return VerifyReport(
        intervals_checked=schedule.intervals, mismatches=tuple(mismatches)
    )
