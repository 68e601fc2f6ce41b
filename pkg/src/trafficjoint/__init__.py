"""Joint traffic classification and per-class traffic prediction."""

from trafficjoint.trace import (
    ClassLabel,
    Direction,
    FlowTrace,
    LabeledDataset,
    PacketRecord,
    Protocol,
    TraceError,
    split_by_time,
    validate_trace,
)

__all__ = [
    "ClassLabel",
    "Direction",
    "FlowTrace",
    "LabeledDataset",
    "PacketRecord",
    "Protocol",
    "TraceError",
    "split_by_time",
    "validate_trace",
]

__version__ = "0.1.0"
