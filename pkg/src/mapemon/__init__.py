"""Monitor and knowledge activities of a MAPE-K loop over a simulated managed system."""

from mapemon.knowledge import KnowledgeLog, LogCause, LogEntry
from mapemon.monitor import ControllerConfig, EventTriggeredMode, MonitoringController, PeriodicMode
from mapemon.properties import (
    Measurement,
    PropertyId,
    PropertyKind,
    PropertySpec,
    QosPurpose,
    SystemState,
    Threshold,
    Violation,
    ViolationEvent,
    check_threshold,
    compose_state,
)

__version__ = "0.1.0"

__all__ = [
    "ControllerConfig",
    "EventTriggeredMode",
    "KnowledgeLog",
    "LogCause",
    "LogEntry",
    "Measurement",
    "MonitoringController",
    "PeriodicMode",
    "PropertyId",
    "PropertyKind",
    "PropertySpec",
    "QosPurpose",
    "SystemState",
    "Threshold",
    "Violation",
    "ViolationEvent",
    "check_threshold",
    "compose_state",
]
