"""Numeric-label classifier, distance fusion and the per-flow joint loop.

The classifier regresses a window's features onto the numeric code of its
class. Its output ``x_t`` is turned into per-class distances
``D_t[i] = |X_i - x_t|``; the predictor bank contributes per-class mean
prediction errors ``D_p``; the decision is ``argmin(D_p + alpha * D_t)``.
The two distances are deliberately not rescaled against each other, so the
useful range of ``alpha`` depends on the label encoding and normalization.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from trafficjoint import mlp
from trafficjoint.features import FEATURE_NAMES, WindowingConfig, extract_series, feature_matrix
from trafficjoint.predictors import (
    LengthMismatch,
    PredictionRecord,
    PredictorBank,
    dp_vector,
    predict_all,
)
from trafficjoint.trace import ClassLabel, FlowTrace


class UnknownLabel(ValueError):
    pass


@dataclass(frozen=True)
class LabelEncoding:
    labels: tuple[ClassLabel, ...]
    numeric: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "numeric", tuple(float(v) for v in self.numeric))
        if len(self.labels) != len(self.numeric) or not self.labels:
            raise ValueError("need one numeric code per label")
        if len(set(self.numeric)) != len(self.numeric):
            raise ValueError(f"numeric codes must be distinct, got {self.numeric}")

    @classmethod
    def default(cls, labels: Sequence[ClassLabel]) -> "LabelEncoding":
        labels = sorted(labels, key=lambda lab: lab.id)
        return cls(tuple(labels), tuple(float(i) for i in range(len(labels))))

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def values(self) -> np.ndarray:
        return np.asarray(self.numeric)

    def index(self, label: ClassLabel) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise UnknownLabel(f"{label} is not in the encoding") from None

    def code(self, label: ClassLabel) -> float:
        return self.numeric[self.index(label)]


@dataclass(frozen=True)
class FusionConfig:
    alpha: float = 1.0

    def __post_init__(self):
        if not (self.alpha >= 0 and np.isfinite(self.alpha)):
            raise ValueError(f"alpha must be a finite nonnegative number, got {self.alpha}")


def dt_vector(x_t: float, enc: LabelEncoding) -> np.ndarray:
    return np.abs(enc.values - float(x_t))


def fuse(d_p, d_t, cfg: FusionConfig) -> np.ndarray:
    d_p = np.asarray(d_p, dtype=np.float64)
    d_t = np.asarray(d_t, dtype=np.float64)
    if d_p.shape != d_t.shape:
        raise LengthMismatch(f"D_p has shape {d_p.shape}, D_t has {d_t.shape}")
    return d_p + cfg.alpha * d_t


def classify(d_a, enc: LabelEncoding) -> ClassLabel:
    """Label of the smallest component; ties go to the lowest class id."""
    d_a = np.asarray(d_a, dtype=np.float64)
    if d_a.shape != (enc.n,):
        raise LengthMismatch(f"expected {enc.n} distances, got shape {d_a.shape}")
    tied = np.flatnonzero(d_a == d_a.min())
    return min((enc.labels[i] for i in tied), key=lambda lab: lab.id)


@dataclass
class Classifier:
    """Feature standardization followed by a scalar-output network."""

    net: mlp.Network
    mean: np.ndarray
    std: np.ndarray

    def __call__(self, features) -> np.ndarray | float:
        f = np.asarray(features, dtype=np.float64)
        out = mlp.forward(self.net, (f - self.mean) / self.std)
        return float(out[0]) if f.ndim == 1 else out[:, 0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Classifier):
            return NotImplemented
        return self.net == other.net and np.array_equal(self.mean, other.mean) and np.array_equal(self.std, other.std)

    def save(self, path: str | Path) -> None:
        d = {"model": mlp.to_dict(self.net), "feature_names": list(FEATURE_NAMES), "mean": self.mean.tolist(), "std": self.std.tolist()}
        Path(path).write_text(json.dumps(d, indent=1) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Classifier":
        d = json.loads(Path(path).read_text())
        return cls(mlp.from_dict(d["model"]), np.array(d["mean"]), np.array(d["std"]))


def train_classifier(
    features,
    labels: Sequence[ClassLabel],
    enc: LabelEncoding,
    spec: mlp.NetSpec,
    cfg: mlp.TrainConfig,
    seed: int,
) -> Classifier:
    """Regress feature rows onto the numeric codes of their labels."""
    x = np.asarray(features, dtype=np.float64)
    if x.size == 0 or len(labels) == 0:
        raise mlp.EmptyDataset("no labeled feature vectors")
    if x.shape[0] != len(labels):
        raise LengthMismatch(f"{x.shape[0]} feature rows vs {len(labels)} labels")
    y = np.array([enc.code(lab) for lab in labels])
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    net0 = mlp.init(spec, seed)
    tcfg = mlp.TrainConfig(cfg.learning_rate, cfg.epochs, cfg.batch_size, seed, cfg.momentum)
    net, _ = mlp.train(net0, (x - mean) / std, y, tcfg)
    return Classifier(net, mean, std)


@dataclass
class JointState:
    decision: ClassLabel | None = None
    window_index: int = 0
    history: list[float] = field(default_factory=list)  # raw bytes per bin seen so far
    running_max: float = 0.0
    records: list[PredictionRecord] = field(default_factory=list)
    last_dt: np.ndarray | None = None
    last_dp: np.ndarray | None = None
    last_da: np.ndarray | None = None
    last_x_t: float = float("nan")


@dataclass(frozen=True)
class StepOutput:
    decision: ClassLabel
    active: np.ndarray  # raw-byte prediction per bin of the window, NaN when unavailable
    x_t: float
    d_p: np.ndarray | None
    d_t: np.ndarray
    d_a: np.ndarray


def joint_step(
    state: JointState,
    bank: PredictorBank,
    classifier: Classifier,
    enc: LabelEncoding,
    fusion: FusionConfig,
    window_bins,
    window_features,
    dt_only: bool = False,
) -> StepOutput:
    """Advance one flow by one classification window (mutates ``state``).

    For each bin with at least W bins of history every class predictor makes
    a one-step forecast; the predictor of the previous window's decision is
    the one reported as the active forecast. At the window end D_p, D_t and
    D_a are formed and the class decided. A window without prediction
    records (the flow's first window, or any window before W bins of
    history exist) is decided by D_t alone, as is every window when
    ``dt_only`` is set.
    """
    bins = np.asarray(window_bins, dtype=np.float64)
    w = bank.window
    active = np.full(bins.shape[0], np.nan)
    state.records = []
    prev = state.decision
    order = [enc.labels[i] for i in range(enc.n)]
    for j, truth_raw in enumerate(bins):
        b = len(state.history)
        state.running_max = max(state.running_max, float(truth_raw))
        if b >= w:
            scale = max(state.running_max, 1.0)
            recent = np.asarray(state.history[-w:]) / scale
            preds = predict_all(bank, recent, scale)
            vec = np.array([preds[lab] for lab in order])
            state.records.append(PredictionRecord(b, vec, float(truth_raw) / scale))
            if prev is not None:
                active[j] = preds[prev] * scale
        state.history.append(float(truth_raw))

    x_t = classifier(np.asarray(window_features, dtype=np.float64))
    d_t = dt_vector(x_t, enc)
    if state.window_index == 0 or not state.records or dt_only:
        d_p = dp_vector(state.records) if state.records else None
        d_a = d_t.copy()
    else:
        d_p = dp_vector(state.records)
        d_a = fuse(d_p, d_t, fusion)
    decision = classify(d_a, enc)

    state.decision = decision
    state.last_x_t, state.last_dt, state.last_dp, state.last_da = x_t, d_t, d_p, d_a
    state.window_index += 1
    return StepOutput(decision, active, x_t, d_p, d_t, d_a)


@dataclass
class FlowResult:
    label: ClassLabel
    source_tag: str
    decisions: list[ClassLabel]
    steps: list[StepOutput]
    raw: np.ndarray  # raw bytes per bin covered by complete windows
    active: np.ndarray  # raw active prediction per bin (NaN where none)

    def log_rows(self, enc: LabelEncoding) -> list[list]:
        rows = []
        nan = [float("nan")] * enc.n
        for k, s in enumerate(self.steps):
            dp = list(s.d_p) if s.d_p is not None else nan
            rows.append([k, s.x_t, *dp, *s.d_t, *s.d_a, s.decision.name, self.label.name])
        return rows


def run_flow(
    trace: FlowTrace,
    bank: PredictorBank,
    classifier: Classifier,
    enc: LabelEncoding,
    fusion: FusionConfig,
    windowing: WindowingConfig = WindowingConfig(),
    dt_only: bool = False,
) -> FlowResult:
    """Feed a whole flow through :func:`joint_step`, window by window."""
    feats = feature_matrix(trace, windowing)
    r = windowing.ratio
    raw = extract_series(trace, windowing).values[: feats.shape[0] * r]
    state = JointState()
    steps = []
    for k in range(feats.shape[0]):
        steps.append(joint_step(state, bank, classifier, enc, fusion, raw[k * r : (k + 1) * r], feats[k], dt_only))
    active = np.concatenate([s.active for s in steps]) if steps else np.zeros(0)
    return FlowResult(trace.label, trace.source_tag, [s.decision for s in steps], steps, raw, active)


def log_header(enc: LabelEncoding) -> list[str]:
    n = enc.n
    return (
        ["window_index", "x_t"]
        + [f"dp_{i}" for i in range(n)]
        + [f"dt_{i}" for i in range(n)]
        + [f"da_{i}" for i in range(n)]
        + ["decision", "truth"]
    )


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else v


def write_decision_log(result: FlowResult, enc: LabelEncoding, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(log_header(enc))
        for row in result.log_rows(enc):
            w.writerow([_fmt(v) for v in row])
