"""Ring overlay simulator: pub/sub bus, node protocol, oracles, scenarios.

The package models a self-repairing ring of nodes over a topic-based
publish/subscribe bus. Every node keeps two neighbours and a belief about
the nearest available successor; availability changes propagate as status
publications along the ring. Global-knowledge oracles compute the expected
steady state for any availability vector, and the scenario runner checks
live runs against them.
"""

from .bus import (
    DeliveryRecord,
    Durability,
    GLOBAL_TOPICS,
    Identity,
    JoinRecord,
    KeepLast,
    KeepN,
    NodeId,
    Null,
    NULL,
    OStRole,
    OStUpdate,
    Payload,
    QosError,
    QosProfile,
    Sample,
    SubscriptionHandle,
    TopicKey,
    TopicName,
    VirtualBus,
    arrivals_key,
    arrivals_qos,
    control_qos,
    mybox_key,
    oneback_key,
    ore_key,
    ose_key,
    standard_qos,
    status_qos,
)
from .metrics import (
    IntervalStats,
    Metrics,
    SETUP_INTERVAL,
    ToggleStats,
    compute_metrics,
    render_metrics,
)
from .network import DISPATCH_BUDGET_FACTOR, JoinError, Network, QuiescenceError
from .oracle import (
    RingError,
    RingModel,
    basic_tst,
    brf_tst,
    mybox_fixpoint,
    sbrf_tst,
)
from .protocol import (
    Availability,
    Effects,
    Hint,
    NextAvailable,
    NodeView,
    ProtocolError,
    SYSTEM_EMPTY,
    SystemEmpty,
    TRUST_ORE,
    TrustOre,
    handle_delivery,
    join,
    published_hint,
    subscriptions,
)
from .scenario import (
    ConfigError,
    Mismatch,
    ScenarioConfig,
    Topology,
    VerificationError,
    VerifyReport,
    config_with_seed,
    load_config,
    oracle_mismatches,
    parse_config,
    ring_of,
    run_scenario,
    verify_trace,
)
from .trace import (
    Trace,
    TraceError,
    TraceEvent,
    TraceRecorder,
    dump_trace,
    dumps_trace,
    event_from_json,
    event_to_json,
    load_trace,
)
from .workload import (
    AvailabilitySchedule,
    MAX_RATE,
    WorkloadConfig,
    build_schedule,
    poisson_pmf,
    sample_k,
)

__version__ = "0.1.0"

__all__ = [
    "AvailabilitySchedule",
    "Availability",
    "ConfigError",
    "DISPATCH_BUDGET_FACTOR",
    "DeliveryRecord",
    "Durability",
    "Effects",
    "GLOBAL_TOPICS",
    "Hint",
    "Identity",
    "IntervalStats",
    "JoinError",
    "JoinRecord",
    "KeepLast",
    "KeepN",
    "MAX_RATE",
    "Metrics",
    "Mismatch",
    "NULL",
    "Network",
    "NextAvailable",
    "NodeId",
    "NodeView",
    "Null",
    "OStRole",
    "OStUpdate",
    "Payload",
    "ProtocolError",
    "QosError",
    "QosProfile",
    "QuiescenceError",
    "RingError",
    "RingModel",
    "SETUP_INTERVAL",
    "SYSTEM_EMPTY",
    "Sample",
    "ScenarioConfig",
    "SubscriptionHandle",
    "SystemEmpty",
    "TRUST_ORE",
    "ToggleStats",
    "TopicKey",
    "TopicName",
    "Topology",
    "Trace",
    "TraceError",
    "TraceEvent",
    "TraceRecorder",
    "TrustOre",
    "VerificationError",
    "VerifyReport",
    "VirtualBus",
    "WorkloadConfig",
    "arrivals_key",
    "arrivals_qos",
    "basic_tst",
    "brf_tst",
    "build_schedule",
    "compute_metrics",
    "config_with_seed",
    "control_qos",
    "dump_trace",
    "dumps_trace",
    "event_from_json",
    "event_to_json",
    "handle_delivery",
    "join",
    "load_config",
    "load_trace",
    "mybox_fixpoint",
    "mybox_key",
    "oneback_key",
    "oracle_mismatches",
    "ore_key",
    "ose_key",
    "parse_config",
    "poisson_pmf",
    "published_hint",
    "render_metrics",
    "ring_of",
    "run_scenario",
    "sample_k",
    "sbrf_tst",
    "standard_qos",
    "status_qos",
    "subscriptions",
    "verify_trace",
]
