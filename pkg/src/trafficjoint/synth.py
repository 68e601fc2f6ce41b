"""Synthetic per-class packet traces.

Each traffic class is described by a :class:`ClassProfile`: an arrival model
(Poisson or jittered periodic), a packet-size model, direction and protocol
mixes, and an optional burst structure. Generation is a pure function of
``(profile, duration, seed)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from trafficjoint.config import ConfigDoc, ConfigError
from trafficjoint.trace import ClassLabel, FlowTrace


class InvalidProfile(ValueError):
    pass


@dataclass(frozen=True)
class Poisson:
    pass


@dataclass(frozen=True)
class PeriodicJittered:
    period: float
    jitter: float = 0.0


@dataclass(frozen=True)
class FixedSize:
    bytes: int


@dataclass(frozen=True)
class NormalSize:
    mean: float
    stddev: float


@dataclass(frozen=True)
class BimodalSize:
    small: int
    large: int
    large_prob: float


@dataclass(frozen=True)
class Burst:
    burst_len: int
    burst_gap: float


@dataclass(frozen=True)
class ClassProfile:
    """Statistical signature of one traffic class.

    ``mean_rate`` is the long-run packet rate. For a periodic arrival model
    the period fixes the event rate, so ``mean_rate`` must equal
    ``burst_len / period`` (it is derived when loading from config).
    """

    label: ClassLabel
    mean_rate: float
    interarrival_model: Poisson | PeriodicJittered
    size_model: FixedSize | NormalSize | BimodalSize
    uplink_fraction: float
    protocol_mix: float
    burst: Burst | None = None
    source_tag: str = ""

    @property
    def burst_len(self) -> int:
        return self.burst.burst_len if self.burst else 1

    def validate(self) -> None:
        def prob(name, v):
            if not 0.0 <= v <= 1.0:
                raise InvalidProfile(f"{self.label.name}: {name}={v} is not a probability")

        def pos(name, v):
            if not (v > 0 and math.isfinite(v)):
                raise InvalidProfile(f"{self.label.name}: {name}={v} must be positive")

        pos("mean_rate", self.mean_rate)
        prob("uplink_fraction", self.uplink_fraction)
        prob("protocol_mix", self.protocol_mix)
        ia = self.interarrival_model
        if isinstance(ia, PeriodicJittered):
            pos("period", ia.period)
            # jitter beyond half a period lets neighbours swap order
            if not 0.0 <= ia.jitter < 0.5:
                raise InvalidProfile(f"{self.label.name}: jitter={ia.jitter} must be in [0, 0.5)")
            implied = self.burst_len / ia.period
            if not math.isclose(self.mean_rate, implied, rel_tol=1e-9):
                raise InvalidProfile(
                    f"{self.label.name}: mean_rate={self.mean_rate} disagrees with "
                    f"periodic model (burst_len/period = {implied})"
                )
        elif not isinstance(ia, Poisson):
            raise InvalidProfile(f"{self.label.name}: unknown interarrival model {ia!r}")
        sm = self.size_model
        if isinstance(sm, FixedSize):
            pos("bytes", sm.bytes)
        elif isinstance(sm, NormalSize):
            pos("mean", sm.mean)
            if sm.stddev < 0:
                raise InvalidProfile(f"{self.label.name}: stddev must be nonnegative")
        elif isinstance(sm, BimodalSize):
            pos("small", sm.small)
            pos("large", sm.large)
            prob("large_prob", sm.large_prob)
        else:
            raise InvalidProfile(f"{self.label.name}: unknown size model {sm!r}")
        if self.burst is not None:
            if self.burst.burst_len < 1:
                raise InvalidProfile(f"{self.label.name}: burst_len must be >= 1")
            pos("burst_gap", self.burst.burst_gap)

    def expected_size(self) -> float:
        sm = self.size_model
        if isinstance(sm, FixedSize):
            return float(sm.bytes)
        if isinstance(sm, NormalSize):
            # truncation at 1 byte is ignored; profiles keep mean >> stddev
            return float(sm.mean)
        return sm.small + sm.large_prob * (sm.large - sm.small)

    def expected_byte_rate(self) -> float:
        return self.mean_rate * self.expected_size()


def _event_times(profile: ClassProfile, duration: float, rng: np.random.Generator) -> np.ndarray:
    ia = profile.interarrival_model
    if isinstance(ia, PeriodicJittered):
        k = np.arange(int(math.ceil(duration / ia.period)) + 1)
        t = k * ia.period
        if ia.jitter > 0:
            t = t + rng.uniform(-ia.jitter, ia.jitter, size=t.shape) * ia.period
            t = np.maximum(t, 0.0)
        return t[t < duration]
    rate = profile.mean_rate / profile.burst_len
    expected = rate * duration
    chunk = int(expected + 10 * math.sqrt(expected) + 16)
    gaps = rng.exponential(1.0 / rate, size=chunk)
    t = np.cumsum(gaps)
    while t[-1] < duration:
        more = np.cumsum(rng.exponential(1.0 / rate, size=chunk)) + t[-1]
        t = np.concatenate([t, more])
    return t[t < duration]


def _sizes(profile: ClassProfile, n: int, rng: np.random.Generator) -> np.ndarray:
    sm = profile.size_model
    if isinstance(sm, FixedSize):
        return np.full(n, sm.bytes, dtype=np.int64)
    if isinstance(sm, NormalSize):
        raw = np.rint(rng.normal(sm.mean, sm.stddev, size=n))
        return np.maximum(raw, 1).astype(np.int64)
    large = rng.random(n) < sm.large_prob
    return np.where(large, sm.large, sm.small).astype(np.int64)


def generate_trace(profile: ClassProfile, duration: float, seed: int) -> FlowTrace:
    """Draw one labeled flow spanning ``[0, duration)``."""
    if not duration > 0:
        raise ValueError("duration must be positive")
    profile.validate()
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    starts = _event_times(profile, duration, rng)
    if profile.burst is not None:
        offsets = np.arange(profile.burst.burst_len) * profile.burst.burst_gap
        ts = (starts[:, None] + offsets[None, :]).ravel()
        ts = np.sort(ts[ts < duration], kind="stable")
    else:
        ts = starts
    n = ts.shape[0]
    sizes = _sizes(profile, n, rng)
    uplink = rng.random(n) < profile.uplink_fraction
    udp = rng.random(n) < profile.protocol_mix
    return FlowTrace(ts, sizes, uplink, udp, profile.label, profile.source_tag, duration=duration)


def _parse_class(doc: ConfigDoc, idx: int, entry: dict) -> ClassProfile:
    base = f"classes[{idx}]"

    def get(key, kind=float, where=None, required=True, default=None):
        src = entry if where is None else where[1]
        path = base + "." + key if where is None else f"{base}.{where[0]}.{key}"
        if key not in src:
            if required:
                raise doc.error(path.rsplit(".", 1)[0], f"missing key '{key}'")
            return default
        try:
            return kind(src[key])
        except (TypeError, ValueError):
            raise doc.error(path, f"expected {kind.__name__}, got {src[key]!r}") from None

    known = {"name", "source_tag", "mean_rate", "interarrival", "size", "uplink_fraction", "protocol_mix", "burst"}
    for k in entry:
        if k not in known:
            raise doc.error(f"{base}.{k}", "unknown key")
    name = get("name", str)
    label = ClassLabel(idx, name)

    ia_raw = entry.get("interarrival") or {}
    ia_kind = str(ia_raw.get("model", "")).lower()
    if ia_kind == "poisson":
        ia = Poisson()
    elif ia_kind == "periodic":
        ia = PeriodicJittered(
            get("period", where=("interarrival", ia_raw)),
            get("jitter", where=("interarrival", ia_raw), required=False, default=0.0),
        )
    else:
        raise doc.error(f"{base}.interarrival", f"model must be 'poisson' or 'periodic', got {ia_kind!r}")

    sz_raw = entry.get("size") or {}
    sz_kind = str(sz_raw.get("model", "")).lower()
    if sz_kind == "fixed":
        size = FixedSize(get("bytes", int, where=("size", sz_raw)))
    elif sz_kind == "normal":
        size = NormalSize(get("mean", where=("size", sz_raw)), get("stddev", where=("size", sz_raw)))
    elif sz_kind == "bimodal":
        w = ("size", sz_raw)
        size = BimodalSize(get("small", int, where=w), get("large", int, where=w), get("large_prob", where=w))
    else:
        raise doc.error(f"{base}.size", f"model must be fixed, normal or bimodal, got {sz_kind!r}")

    burst = None
    if entry.get("burst"):
        b = entry["burst"]
        burst = Burst(get("burst_len", int, where=("burst", b)), get("burst_gap", where=("burst", b)))

    burst_len = burst.burst_len if burst else 1
    if isinstance(ia, PeriodicJittered):
        implied = burst_len / ia.period
        rate = get("mean_rate", required=False, default=implied)
    else:
        rate = get("mean_rate")

    profile = ClassProfile(
        label=label,
        mean_rate=rate,
        interarrival_model=ia,
        size_model=size,
        uplink_fraction=get("uplink_fraction"),
        protocol_mix=get("protocol_mix"),
        burst=burst,
        source_tag=get("source_tag", str, required=False, default=name),
    )
    try:
        profile.validate()
    except InvalidProfile as exc:
        raise doc.error(base, str(exc)) from None
    return profile


def profiles_from_doc(doc: ConfigDoc) -> list[ClassProfile]:
    classes = doc.data.get("classes") if isinstance(doc.data, dict) else None
    if not classes:
        raise ConfigError("no 'classes' list found", doc.path)
    profiles = [_parse_class(doc, i, e) for i, e in enumerate(classes)]
    names = [p.label.name for p in profiles]
    if len(set(names)) != len(names):
        raise doc.error("classes", f"duplicate class names {names}")
    return profiles


def load_profiles(path: str | Path) -> list[ClassProfile]:
    return profiles_from_doc(ConfigDoc.load(path))


DEFAULT_PROFILES_RESOURCE = "default_profiles.yaml"


def default_profiles() -> list[ClassProfile]:
    """The three stock classes VO, VI and GM from the packaged config."""
    text = resources.files("trafficjoint.data").joinpath(DEFAULT_PROFILES_RESOURCE).read_text()
    return profiles_from_doc(ConfigDoc.from_text(text, DEFAULT_PROFILES_RESOURCE))


def generate_dataset(
    profiles: Sequence[ClassProfile],
    duration: float,
    seeds: Sequence[int],
):
    """One trace per (profile, seed); per-class streams are decorrelated by class id."""
    from trafficjoint.trace import LabeledDataset

    traces = []
    for seed in seeds:
        for p in profiles:
            traces.append(generate_trace(p, duration, class_seed(seed, p.label.id)))
    return LabeledDataset(traces, [p.label for p in profiles])


def class_seed(seed: int, class_id: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(class_id)]).generate_state(1, np.uint64)[0])
