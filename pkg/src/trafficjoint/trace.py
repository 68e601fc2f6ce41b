"""Packet traces, labeled flows and train/test splitting.

A :class:`FlowTrace` keeps its packets column-wise in numpy arrays because
every consumer (windowing, binning, generation) works on whole columns.
:class:`PacketRecord` is the row view used at the edges (CSV, tests).
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np


class TraceError(ValueError):
    """Base class for invalid trace content."""


class UnsortedTimestamps(TraceError):
    pass


class NonPositiveSize(TraceError):
    pass


class NegativeTimestamp(TraceError):
    pass


class Direction(str, enum.Enum):
    UPLINK = "U"
    DOWNLINK = "D"


class Protocol(str, enum.Enum):
    TCP = "TCP"
    UDP = "UDP"


@dataclass(frozen=True)
class PacketRecord:
    timestamp: float
    size: int
    direction: Direction = Direction.UPLINK
    protocol: Protocol = Protocol.TCP


@dataclass(frozen=True)
class ClassLabel:
    id: int
    name: str


class FlowTrace:
    """One flow: time-ordered packets plus its class label.

    Columns are stored as read-only arrays: ``timestamps`` (float64 seconds),
    ``sizes`` (int64 bytes), ``uplink`` (bool) and ``udp`` (bool).
    ``duration`` is the nominal capture span; it defaults to the last
    timestamp but generated and split traces carry their exact span so that
    binning does not depend on where the last packet happened to fall.
    """

    def __init__(
        self,
        timestamps,
        sizes,
        uplink,
        udp,
        label: ClassLabel,
        source_tag: str = "",
        duration: float | None = None,
    ):
        cols = [
            np.asarray(timestamps, dtype=np.float64),
            np.asarray(sizes, dtype=np.int64),
            np.asarray(uplink, dtype=bool),
            np.asarray(udp, dtype=bool),
        ]
        n = cols[0].shape[0]
        if any(c.ndim != 1 or c.shape[0] != n for c in cols):
            raise ValueError("packet columns must be 1-D and of equal length")
        for c in cols:
            c.setflags(write=False)
        self.timestamps, self.sizes, self.uplink, self.udp = cols
        self.label = label
        self.source_tag = source_tag
        if duration is None:
            duration = float(self.timestamps[-1]) if n else 0.0
        self.duration = float(duration)

    @classmethod
    def from_packets(
        cls,
        packets: Iterable[PacketRecord],
        label: ClassLabel,
        source_tag: str = "",
        duration: float | None = None,
    ) -> "FlowTrace":
        packets = list(packets)
        return cls(
            [p.timestamp for p in packets],
            [p.size for p in packets],
            [Direction(p.direction) is Direction.UPLINK for p in packets],
            [Protocol(p.protocol) is Protocol.UDP for p in packets],
            label,
            source_tag,
            duration,
        )

    def __len__(self) -> int:
        return int(self.timestamps.shape[0])

    def __iter__(self) -> Iterator[PacketRecord]:
        return iter(self.packets)

    @property
    def packets(self) -> list[PacketRecord]:
        return [
            PacketRecord(
                float(t),
                int(s),
                Direction.UPLINK if u else Direction.DOWNLINK,
                Protocol.UDP if p else Protocol.TCP,
            )
            for t, s, u, p in zip(self.timestamps, self.sizes, self.uplink, self.udp)
        ]

    def __eq__(self, other) -> bool:
        if not isinstance(other, FlowTrace):
            return NotImplemented
        return (
            self.label == other.label
            and self.source_tag == other.source_tag
            and self.duration == other.duration
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.sizes, other.sizes)
            and np.array_equal(self.uplink, other.uplink)
            and np.array_equal(self.udp, other.udp)
        )

    def __repr__(self) -> str:
        return (
            f"FlowTrace(label={self.label.name!r}, packets={len(self)}, "
            f"duration={self.duration:g}, source_tag={self.source_tag!r})"
        )


@dataclass(frozen=True)
class LabeledDataset:
    traces: Sequence[FlowTrace]
    labels: Sequence[ClassLabel]
    _ids: frozenset = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ids = [lab.id for lab in self.labels]
        if sorted(ids) != list(range(len(ids))):
            raise ValueError(f"label ids must be dense and unique, got {ids}")
        object.__setattr__(self, "_ids", frozenset(self.labels))
        for tr in self.traces:
            if tr.label not in self._ids:
                raise ValueError(f"trace label {tr.label} is not in the label universe")

    def by_class(self) -> dict[ClassLabel, list[FlowTrace]]:
        out: dict[ClassLabel, list[FlowTrace]] = {lab: [] for lab in self.labels}
        for tr in self.traces:
            out[tr.label].append(tr)
        return out


def validate_trace(trace: FlowTrace) -> None:
    """Raise a :class:`TraceError` subclass if ``trace`` breaks an invariant."""
    ts = trace.timestamps
    if ts.size == 0:
        return
    bad = np.flatnonzero(ts < 0)
    if bad.size:
        raise NegativeTimestamp(f"packet {bad[0]} has timestamp {ts[bad[0]]}")
    bad = np.flatnonzero(trace.sizes < 1)
    if bad.size:
        raise NonPositiveSize(f"packet {bad[0]} has size {trace.sizes[bad[0]]}")
    bad = np.flatnonzero(np.diff(ts) < 0)
    if bad.size:
        i = bad[0] + 1
        raise UnsortedTimestamps(f"packet {i} at t={ts[i]} precedes packet {i - 1} at t={ts[i - 1]}")


def split_by_time(trace: FlowTrace, boundary: float) -> tuple[FlowTrace, FlowTrace]:
    """Split at ``boundary`` seconds: train gets ``[0, boundary)``, test the rest re-based to 0."""
    if boundary <= 0:
        raise ValueError("boundary must be positive")
    cut = int(np.searchsorted(trace.timestamps, boundary, side="left"))
    head = slice(0, cut)
    tail = slice(cut, None)
    train = FlowTrace(
        trace.timestamps[head],
        trace.sizes[head],
        trace.uplink[head],
        trace.udp[head],
        trace.label,
        trace.source_tag,
        duration=min(boundary, trace.duration),
    )
    test = FlowTrace(
        trace.timestamps[tail] - boundary,
        trace.sizes[tail],
        trace.uplink[tail],
        trace.udp[tail],
        trace.label,
        trace.source_tag,
        duration=max(trace.duration - boundary, 0.0),
    )
    return train, test


CSV_HEADER = ("timestamp_s", "size_bytes", "direction", "protocol")


def write_trace_csv(trace: FlowTrace, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for t, s, u, p in zip(trace.timestamps, trace.sizes, trace.uplink, trace.udp):
            w.writerow((repr(float(t)), int(s), "U" if u else "D", "UDP" if p else "TCP"))


def read_trace_csv(
    path: str | Path,
    label: ClassLabel,
    source_tag: str = "",
    duration: float | None = None,
) -> FlowTrace:
    """Load one flow from the ``timestamp_s,size_bytes,direction,protocol`` format."""
    ts, sizes, up, udp = [], [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
            raise TraceError(f"{path}: expected header {','.join(CSV_HEADER)}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                t, s, d, p = row
                ts.append(float(t))
                sizes.append(int(s))
                up.append(Direction(d.strip()) is Direction.UPLINK)
                udp.append(Protocol(p.strip().upper()) is Protocol.UDP)
            except ValueError as exc:
                raise TraceError(f"{path}:{lineno}: bad row {row!r} ({exc})") from None
    trace = FlowTrace(ts, sizes, up, udp, label, source_tag, duration)
    validate_trace(trace)
    return trace
