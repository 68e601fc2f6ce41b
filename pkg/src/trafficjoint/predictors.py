"""Per-class sliding-window traffic predictors.

Every predictor works in its own units: inputs are divided by the scale
fitted on that class's training series, and its output is multiplied back.
Errors used for classification are measured in the *flow's* units, i.e.
divided by the running maximum of the flow observed so far, so the error
components of different predictors are comparable on the same flow.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from trafficjoint import mlp
from trafficjoint.features import PredSeries, WindowingConfig
from trafficjoint.trace import ClassLabel


class SeriesTooShort(ValueError):
    pass


class MissingClassData(ValueError):
    pass


class EmptyWindow(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


@dataclass(frozen=True)
class SlidingWindowConfig:
    window: int = 10

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be >= 1")


def _values(series) -> np.ndarray:
    if isinstance(series, PredSeries):
        return series.values
    return np.asarray(series, dtype=np.float64)


def window_dataset(series, cfg: SlidingWindowConfig) -> tuple[np.ndarray, np.ndarray]:
    """Pairs ``(values[i:i+W], values[i+W])`` for every ``i``; inputs are ``(len-W, W)``."""
    v = _values(series)
    w = cfg.window
    if v.shape[0] < w + 1:
        raise SeriesTooShort(f"series of length {v.shape[0]} cannot form a window of {w} plus a target")
    inputs = np.lib.stride_tricks.sliding_window_view(v, w)[:-1].copy()
    return inputs, v[w:].copy()


@dataclass
class Predictor:
    net: mlp.Network
    scale: float

    def predict(self, recent_raw) -> float:
        x = np.asarray(recent_raw, dtype=np.float64) / self.scale
        return float(mlp.forward(self.net, x)[0]) * self.scale

    def predict_series(self, raw: np.ndarray) -> np.ndarray:
        """One-step-ahead predictions for bins ``W..len-1`` of a raw series (bytes)."""
        w = self.net.n_in
        if raw.shape[0] < w + 1:
            return np.zeros(0)
        x = np.lib.stride_tricks.sliding_window_view(raw / self.scale, w)[:-1]
        return mlp.forward(self.net, x)[:, 0] * self.scale


def train_predictor(
    series: Sequence,
    sw: SlidingWindowConfig,
    spec: mlp.NetSpec,
    cfg: mlp.TrainConfig,
    seed: int,
    scale: float | None = None,
    max_pairs: int | None = None,
) -> Predictor:
    """Fit one predictor on the windowed pairs of one or more raw series.

    Windows never straddle two series. ``scale`` defaults to the largest
    training value; ``max_pairs`` keeps only the first pairs.
    """
    raws = [_values(s) for s in series]
    if scale is None:
        scale = max((float(r.max()) for r in raws if r.size), default=0.0)
    if not scale > 0:
        raise ValueError("training data is all zero; cannot fit a scale")
    pairs = [window_dataset(r / scale, sw) for r in raws]
    x = np.concatenate([p[0] for p in pairs])
    y = np.concatenate([p[1] for p in pairs])
    if max_pairs is not None:
        x, y = x[:max_pairs], y[:max_pairs]
    if spec.layer_sizes[0] != sw.window or spec.layer_sizes[-1] != 1:
        raise mlp.DimensionMismatch(f"predictor net must be {sw.window} -> ... -> 1, got {spec.layer_sizes}")
    net0 = mlp.init(spec, seed)
    net, _ = mlp.train(net0, x, y, mlp.TrainConfig(cfg.learning_rate, cfg.epochs, cfg.batch_size, seed, cfg.momentum))
    return Predictor(net, float(scale))


@dataclass
class PredictorBank:
    labels: list[ClassLabel]
    predictors: dict[ClassLabel, Predictor]
    sw: SlidingWindowConfig
    windowing: WindowingConfig

    def __post_init__(self):
        if set(self.predictors) != set(self.labels):
            raise MissingClassData("exactly one predictor per class is required")

    @property
    def window(self) -> int:
        return self.sw.window

    def __eq__(self, other) -> bool:
        if not isinstance(other, PredictorBank):
            return NotImplemented
        return (
            self.labels == other.labels
            and self.sw == other.sw
            and self.windowing == other.windowing
            and all(
                self.predictors[k].net == other.predictors[k].net
                and self.predictors[k].scale == other.predictors[k].scale
                for k in self.labels
            )
        )


def class_seed(seed: int, class_id: int) -> int:
    return int(np.random.SeedSequence([int(seed), 1000 + int(class_id)]).generate_state(1, np.uint64)[0])


def train_bank(
    train_data: Mapping[ClassLabel, PredSeries | Sequence[PredSeries]],
    labels: Sequence[ClassLabel],
    sw: SlidingWindowConfig,
    spec: mlp.NetSpec,
    cfg: mlp.TrainConfig,
    seed: int,
    windowing: WindowingConfig = WindowingConfig(),
) -> PredictorBank:
    """Train one predictor per class, each only on that class's series."""
    predictors = {}
    for lab in labels:
        data = train_data.get(lab)
        if data is None or (not isinstance(data, PredSeries) and len(data) == 0):
            raise MissingClassData(f"no training series for class {lab.name}")
        series = [data] if isinstance(data, PredSeries) else list(data)
        if not any(len(s) >= sw.window + 1 for s in series):
            raise SeriesTooShort(f"class {lab.name}: no series longer than the window ({sw.window})")
        series = [s.raw() for s in series if len(s) >= sw.window + 1]
        predictors[lab] = train_predictor(series, sw, spec, cfg, class_seed(seed, lab.id))
    return PredictorBank(list(labels), predictors, sw, windowing)


def predict_all(bank: PredictorBank, recent, scale: float = 1.0) -> dict[ClassLabel, float]:
    """Every class's next-bin prediction.

    ``recent`` holds the last W bins of the flow divided by ``scale``; the
    predictions come back in the same units.
    """
    recent = np.asarray(recent, dtype=np.float64)
    if recent.shape != (bank.window,):
        raise mlp.DimensionMismatch(f"expected the last {bank.window} bins, got shape {recent.shape}")
    raw = recent * scale
    return {lab: bank.predictors[lab].predict(raw) / scale for lab in bank.labels}


def running_scale(raw: np.ndarray) -> np.ndarray:
    """Per-bin flow scale: running max of the bytes seen so far, floored at 1 byte."""
    return np.maximum(np.maximum.accumulate(raw), 1.0) if raw.size else raw.copy()


@dataclass(frozen=True)
class PredictionRecord:
    bin: int
    predicted: np.ndarray  # per class, flow-normalized
    truth: float  # flow-normalized

    @property
    def errors(self) -> np.ndarray:
        return np.abs(self.predicted - self.truth)


def dp_vector(records: Sequence[PredictionRecord]) -> np.ndarray:
    """Per-class mean absolute prediction error over the given records."""
    if len(records) == 0:
        raise EmptyWindow("no prediction records in this classification window")
    n = records[0].predicted.shape[0]
    if any(r.predicted.shape[0] != n for r in records):
        raise LengthMismatch("records cover different class sets")
    return np.mean([r.errors for r in records], axis=0)


def rmse(predictions, truths) -> float:
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(truths, dtype=np.float64)
    if p.shape != t.shape:
        raise LengthMismatch(f"{p.shape} predictions vs {t.shape} truths")
    if p.size == 0:
        raise EmptyWindow("rmse of an empty sequence")
    return float(np.sqrt(np.mean((p - t) ** 2)))


MANIFEST = "bank.json"


def save_bank(bank: PredictorBank, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for lab in bank.labels:
        fname = f"predictor_{lab.id}_{lab.name}.json"
        mlp.save(bank.predictors[lab].net, directory / fname)
        entries.append({"id": lab.id, "name": lab.name, "file": fname, "scale": bank.predictors[lab].scale})
    manifest = {
        "window": bank.sw.window,
        "class_window": bank.windowing.class_window,
        "pred_bin": bank.windowing.pred_bin,
        "classes": entries,
    }
    (directory / MANIFEST).write_text(json.dumps(manifest, indent=1) + "\n")


def load_bank(directory: str | Path) -> PredictorBank:
    directory = Path(directory)
    manifest = json.loads((directory / MANIFEST).read_text())
    labels, predictors = [], {}
    for e in manifest["classes"]:
        lab = ClassLabel(int(e["id"]), e["name"])
        labels.append(lab)
        predictors[lab] = Predictor(mlp.load(directory / e["file"]), float(e["scale"]))
    return PredictorBank(
        labels,
        predictors,
        SlidingWindowConfig(int(manifest["window"])),
        WindowingConfig(manifest["class_window"], manifest["pred_bin"]),
    )
