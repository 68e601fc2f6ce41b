"""Windowed classification features and binned byte-count series.

Both views share one time grid: packet ``i`` falls in prediction bin
``b = bin_index(t_i)`` and in classification window ``b // ratio``, so
window ``k`` covers bins ``[k * ratio, (k + 1) * ratio)`` exactly.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields

import numpy as np

from trafficjoint.trace import FlowTrace


@dataclass(frozen=True)
class WindowingConfig:
    class_window: float = 0.5
    pred_bin: float = 0.1

    def __post_init__(self):
        if not (self.class_window > 0 and self.pred_bin > 0):
            raise ValueError("class_window and pred_bin must be positive")
        r = round(self.class_window / self.pred_bin)
        if r < 1 or abs(r * self.pred_bin - self.class_window) > 1e-9 * self.class_window:
            raise ValueError(
                f"class_window={self.class_window} is not an integer multiple of pred_bin={self.pred_bin}"
            )

    @property
    def ratio(self) -> int:
        return int(round(self.class_window / self.pred_bin))


@dataclass(frozen=True)
class FeatureVector:
    mean_interarrival: float
    direction_switches: int
    uplink_count: int
    downlink_count: int
    udp_fraction: float
    packet_count: int

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f.name) for f in fields(self)], dtype=np.float64)


FEATURE_NAMES = tuple(f.name for f in fields(FeatureVector))


@dataclass(frozen=True)
class PredSeries:
    values: np.ndarray
    scale: float = 1.0

    def raw(self) -> np.ndarray:
        return self.values * self.scale

    def __len__(self) -> int:
        return int(self.values.shape[0])


class NormMode(str, enum.Enum):
    MAXABS = "maxabs"
    NONE = "none"


class ZeroScale(ValueError):
    pass


def bin_index(t, width: float) -> np.ndarray:
    """``floor(t / width)`` corrected so that ``b * width <= t < (b + 1) * width`` in floats."""
    t = np.asarray(t, dtype=np.float64)
    b = np.floor(t / width).astype(np.int64)
    b = np.where((b + 1) * width <= t, b + 1, b)
    b = np.where(b * width > t, b - 1, b)
    return b


def n_bins(duration: float, cfg: WindowingConfig) -> int:
    return int(bin_index(duration, cfg.pred_bin))


def n_windows(duration: float, cfg: WindowingConfig) -> int:
    return n_bins(duration, cfg) // cfg.ratio


def feature_matrix(trace: FlowTrace, cfg: WindowingConfig = WindowingConfig()) -> np.ndarray:
    """Features for every complete window as an ``(n_windows, 6)`` array.

    Columns follow :data:`FEATURE_NAMES`.
    """
    nw = n_windows(trace.duration, cfg)
    out = np.zeros((nw, len(FEATURE_NAMES)))
    if nw == 0 or len(trace) == 0:
        return out
    win = bin_index(trace.timestamps, cfg.pred_bin) // cfg.ratio
    keep = win < nw
    win = win[keep]
    ts = trace.timestamps[keep]
    up = trace.uplink[keep]
    udp = trace.udp[keep]

    count = np.bincount(win, minlength=nw).astype(np.float64)
    n_up = np.bincount(win, weights=up, minlength=nw)
    n_udp = np.bincount(win, weights=udp, minlength=nw)

    same = win[1:] == win[:-1]
    inner = win[1:][same]
    gap_sum = np.bincount(inner, weights=np.diff(ts)[same], minlength=nw)
    switches = np.bincount(inner, weights=(up[1:] != up[:-1])[same], minlength=nw)

    with np.errstate(invalid="ignore", divide="ignore"):
        out[:, 0] = np.where(count > 1, gap_sum / np.maximum(count - 1, 1), 0.0)
        out[:, 4] = np.where(count > 0, n_udp / np.maximum(count, 1), 0.0)
    out[:, 1] = switches
    out[:, 2] = n_up
    out[:, 3] = count - n_up
    out[:, 5] = count
    return out


def extract_features(trace: FlowTrace, cfg: WindowingConfig = WindowingConfig()) -> list[FeatureVector]:
    return [
        FeatureVector(
            mean_interarrival=float(row[0]),
            direction_switches=int(row[1]),
            uplink_count=int(row[2]),
            downlink_count=int(row[3]),
            udp_fraction=float(row[4]),
            packet_count=int(row[5]),
        )
        for row in feature_matrix(trace, cfg)
    ]


def extract_series(trace: FlowTrace, cfg: WindowingConfig = WindowingConfig()) -> PredSeries:
    """Total bytes per prediction bin over the trace's full span (unnormalized)."""
    nb = n_bins(trace.duration, cfg)
    if len(trace) == 0 or nb == 0:
        return PredSeries(np.zeros(nb), 1.0)
    b = bin_index(trace.timestamps, cfg.pred_bin)
    keep = b < nb
    values = np.bincount(b[keep], weights=trace.sizes[keep].astype(np.float64), minlength=nb)
    return PredSeries(values, 1.0)


def normalize(series: PredSeries, mode: NormMode | str = NormMode.MAXABS, fit_scale: float | None = None) -> PredSeries:
    """Rescale a raw series; ``fit_scale`` reuses a scale fitted elsewhere (e.g. on training data)."""
    mode = NormMode(mode)
    raw = series.raw()
    if mode is NormMode.NONE:
        return PredSeries(raw.copy(), 1.0)
    if fit_scale is None:
        fit_scale = float(np.max(np.abs(raw))) if raw.size else 0.0
        if fit_scale <= 0 or not math.isfinite(fit_scale):
            raise ZeroScale("cannot fit a MaxAbs scale on an empty or all-zero series")
    elif not fit_scale > 0:
        raise ZeroScale(f"fit_scale must be positive, got {fit_scale}")
    return PredSeries(raw / fit_scale, float(fit_scale))
