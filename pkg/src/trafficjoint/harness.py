"""Experiment runners: predictor scenarios A/B/C and the alpha sweep.

Scenario A predicts each test flow with the predictor of its true class,
B with the predictor of a deliberately wrong class, and C with a single
predictor trained on a pooled set of all classes whose size matches one
per-class training set. The alpha sweep runs the full joint loop on every
test flow for each fusion weight and scores window-level accuracy.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from trafficjoint import mlp
from trafficjoint.features import WindowingConfig, extract_series, feature_matrix
from trafficjoint.joint import Classifier, FusionConfig, LabelEncoding, run_flow, train_classifier
from trafficjoint.predictors import (
    Predictor,
    PredictorBank,
    SlidingWindowConfig,
    running_scale,
    train_bank,
    train_predictor,
    window_dataset,
)
from trafficjoint.trace import ClassLabel, FlowTrace, LabeledDataset, split_by_time

DEFAULT_ALPHAS = (0.0, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0)


class InvalidMismatch(ValueError):
    pass


@dataclass(frozen=True)
class LearnerConfig:
    hidden: tuple[int, ...] = (16,)
    activation: str = "tanh"
    learning_rate: float = 0.05
    epochs: int = 2000
    batch_size: int | None = None
    momentum: float = 0.9

    def spec(self, n_in: int) -> mlp.NetSpec:
        return mlp.NetSpec((n_in, *self.hidden, 1), mlp.Activation(self.activation))

    def train_config(self, seed: int = 0) -> mlp.TrainConfig:
        return mlp.TrainConfig(self.learning_rate, self.epochs, self.batch_size, seed, self.momentum)


@dataclass(frozen=True)
class ExperimentConfig:
    windowing: WindowingConfig = WindowingConfig()
    sliding: SlidingWindowConfig = SlidingWindowConfig()
    predictor: LearnerConfig = LearnerConfig()
    classifier: LearnerConfig = LearnerConfig()
    split: float = 120.0
    encoding: tuple[float, ...] | None = None
    alpha: float = 1.0

    def label_encoding(self, labels: Sequence[ClassLabel]) -> LabelEncoding:
        if self.encoding is None:
            return LabelEncoding.default(labels)
        return LabelEncoding(tuple(sorted(labels, key=lambda lab: lab.id)), self.encoding)


@dataclass
class PreparedData:
    """Per-flow train/test material derived from a dataset under one config."""

    labels: list[ClassLabel]
    train: list[FlowTrace]
    test: list[FlowTrace]

    def train_series(self, cfg: ExperimentConfig) -> dict[ClassLabel, list]:
        out: dict[ClassLabel, list] = {lab: [] for lab in self.labels}
        for tr in self.train:
            out[tr.label].append(extract_series(tr, cfg.windowing))
        return out


def prepare(dataset: LabeledDataset, cfg: ExperimentConfig) -> PreparedData:
    train, test = [], []
    for tr in dataset.traces:
        a, b = split_by_time(tr, cfg.split)
        train.append(a)
        test.append(b)
    return PreparedData(sorted(dataset.labels, key=lambda lab: lab.id), train, test)


def train_models(data: PreparedData, cfg: ExperimentConfig, seed: int) -> tuple[PredictorBank, Classifier, LabelEncoding]:
    bank = train_bank(
        data.train_series(cfg),
        data.labels,
        cfg.sliding,
        cfg.predictor.spec(cfg.sliding.window),
        cfg.predictor.train_config(seed),
        seed,
        cfg.windowing,
    )
    enc = cfg.label_encoding(data.labels)
    feats, labs = [], []
    for tr in data.train:
        fm = feature_matrix(tr, cfg.windowing)
        feats.append(fm)
        labs += [tr.label] * fm.shape[0]
    clf = train_classifier(
        np.concatenate(feats),
        labs,
        enc,
        cfg.classifier.spec(feats[0].shape[1]),
        cfg.classifier.train_config(seed),
        _derived_seed(seed, "classifier"),
    )
    return bank, clf, enc


def _derived_seed(seed: int, tag: str) -> int:
    words = [int(seed)] + [ord(c) for c in tag]
    return int(np.random.SeedSequence(words).generate_state(1, np.uint64)[0])


@dataclass
class FlowPredictions:
    label: ClassLabel
    source_tag: str
    predictor: str
    bins: np.ndarray
    predicted: np.ndarray  # flow-normalized
    truth: np.ndarray  # flow-normalized


@dataclass
class ScenarioResult:
    scenario: str
    per_class: dict[ClassLabel, float]
    overall: float
    flows: list[FlowPredictions] = field(default_factory=list, repr=False)
    train_pairs: int = 0


def flow_predictions(predictor: Predictor, name: str, test: FlowTrace, cfg: ExperimentConfig) -> FlowPredictions:
    """One-step predictions over a test flow, in the flow's running-max units."""
    raw = extract_series(test, cfg.windowing).values
    w = cfg.sliding.window
    pred = predictor.predict_series(raw)
    scale = running_scale(raw)[w:]
    return FlowPredictions(test.label, test.source_tag, name, np.arange(w, raw.shape[0]), pred / scale, raw[w:] / scale)


def _score(name: str, flows: list[FlowPredictions], labels: Sequence[ClassLabel], train_pairs: int) -> ScenarioResult:
    per_class = {}
    for lab in labels:
        err = [f.predicted - f.truth for f in flows if f.label == lab]
        if err:
            e = np.concatenate(err)
            per_class[lab] = float(np.sqrt(np.mean(e**2)))
    allerr = np.concatenate([f.predicted - f.truth for f in flows])
    return ScenarioResult(name, per_class, float(np.sqrt(np.mean(allerr**2))), flows, train_pairs)


def _pairs_per_class(data: PreparedData, cfg: ExperimentConfig) -> dict[ClassLabel, int]:
    w = cfg.sliding.window
    counts = {lab: 0 for lab in data.labels}
    for lab, series in data.train_series(cfg).items():
        counts[lab] = sum(max(len(s) - w, 0) for s in series)
    return counts


def scenario_a(data: PreparedData, bank: PredictorBank, cfg: ExperimentConfig) -> ScenarioResult:
    flows = [flow_predictions(bank.predictors[t.label], t.label.name, t, cfg) for t in data.test]
    return _score("A", flows, data.labels, min(_pairs_per_class(data, cfg).values()))


def validate_mismatch(mismatch: Mapping[ClassLabel, ClassLabel], labels: Sequence[ClassLabel]) -> None:
    for lab in labels:
        if lab not in mismatch:
            raise InvalidMismatch(f"no mismatched predictor given for class {lab.name}")
        if mismatch[lab] == lab:
            raise InvalidMismatch(f"class {lab.name} is mapped to itself")
        if mismatch[lab] not in labels:
            raise InvalidMismatch(f"class {lab.name} is mapped to unknown class {mismatch[lab]}")


def default_mismatch(labels: Sequence[ClassLabel]) -> dict[ClassLabel, ClassLabel]:
    """Cyclic derangement: class i uses the predictor of class i-1 (VO->GM, VI->VO, GM->VI)."""
    labels = sorted(labels, key=lambda lab: lab.id)
    if len(labels) < 2:
        raise InvalidMismatch("a mismatch needs at least two classes")
    return {lab: labels[(i - 1) % len(labels)] for i, lab in enumerate(labels)}


def scenario_b(
    data: PreparedData,
    bank: PredictorBank,
    cfg: ExperimentConfig,
    mismatch: Mapping[ClassLabel, ClassLabel] | None = None,
) -> ScenarioResult:
    mismatch = default_mismatch(data.labels) if mismatch is None else dict(mismatch)
    validate_mismatch(mismatch, data.labels)
    flows = [flow_predictions(bank.predictors[mismatch[t.label]], mismatch[t.label].name, t, cfg) for t in data.test]
    return _score("B", flows, data.labels, min(_pairs_per_class(data, cfg).values()))


def pooled_training_set(data: PreparedData, cfg: ExperimentConfig) -> tuple[np.ndarray, np.ndarray, float]:
    """Equal share of every class's windowed pairs, totalling one class's pair count.

    Everything is scaled by the largest training value over all classes,
    as a single predictor only has one scale.
    """
    series = data.train_series(cfg)
    scale = max(float(s.values.max()) for ss in series.values() for s in ss if len(s))
    budget = min(_pairs_per_class(data, cfg).values())
    n = len(data.labels)
    xs, ys = [], []
    for i, lab in enumerate(data.labels):
        share = budget // n + (1 if i < budget % n else 0)
        px, py = [], []
        for s in series[lab]:
            if len(s) > cfg.sliding.window:
                x, y = window_dataset(s.values / scale, cfg.sliding)
                px.append(x)
                py.append(y)
        xs.append(np.concatenate(px)[:share])
        ys.append(np.concatenate(py)[:share])
    return np.concatenate(xs), np.concatenate(ys), scale


def train_pooled(data: PreparedData, cfg: ExperimentConfig, seed: int) -> tuple[Predictor, int]:
    x, y, scale = pooled_training_set(data, cfg)
    s = _derived_seed(seed, "pooled")
    net0 = mlp.init(cfg.predictor.spec(cfg.sliding.window), s)
    net, _ = mlp.train(net0, x, y, cfg.predictor.train_config(s))
    return Predictor(net, scale), x.shape[0]


def scenario_c(data: PreparedData, cfg: ExperimentConfig, seed: int) -> ScenarioResult:
    pooled, pairs = train_pooled(data, cfg, seed)
    flows = [flow_predictions(pooled, "pooled", t, cfg) for t in data.test]
    return _score("C", flows, data.labels, pairs)


def _bank(data: PreparedData, cfg: ExperimentConfig, seed: int) -> PredictorBank:
    return train_bank(
        data.train_series(cfg),
        data.labels,
        cfg.sliding,
        cfg.predictor.spec(cfg.sliding.window),
        cfg.predictor.train_config(seed),
        seed,
        cfg.windowing,
    )


def run_scenario_a(dataset: LabeledDataset, cfg: ExperimentConfig, seed: int) -> ScenarioResult:
    data = prepare(dataset, cfg)
    return scenario_a(data, _bank(data, cfg, seed), cfg)


def run_scenario_b(
    dataset: LabeledDataset,
    cfg: ExperimentConfig,
    seed: int,
    mismatch: Mapping[ClassLabel, ClassLabel] | None = None,
) -> ScenarioResult:
    data = prepare(dataset, cfg)
    if mismatch is not None:
        validate_mismatch(mismatch, data.labels)
    return scenario_b(data, _bank(data, cfg, seed), cfg, mismatch)


def run_scenario_c(dataset: LabeledDataset, cfg: ExperimentConfig, seed: int) -> ScenarioResult:
    return scenario_c(prepare(dataset, cfg), cfg, seed)


def run_scenarios(
    dataset: LabeledDataset,
    cfg: ExperimentConfig,
    seed: int,
    mismatch: Mapping[ClassLabel, ClassLabel] | None = None,
) -> list[ScenarioResult]:
    """A, B and C sharing one trained bank (identical to running each alone)."""
    data = prepare(dataset, cfg)
    bank = _bank(data, cfg, seed)
    return [scenario_a(data, bank, cfg), scenario_b(data, bank, cfg, mismatch), scenario_c(data, cfg, seed)]


@dataclass
class AlphaSweepResult:
    alphas: list[float]
    accuracy: list[float]  # window-level
    flow_accuracy: list[float]  # majority vote per flow
    dt_only_accuracy: float
    dt_only_flow_accuracy: float
    seed: int


def _validate_alphas(alphas: Sequence[float]) -> list[float]:
    alphas = [float(a) for a in alphas]
    if not alphas:
        raise ValueError("alpha list is empty")
    if alphas[0] != 0.0:
        raise ValueError("the alpha sweep must start at 0")
    if any(b <= a for a, b in zip(alphas, alphas[1:])):
        raise ValueError(f"alphas must be strictly ascending without duplicates, got {alphas}")
    return alphas


def _accuracies(results) -> tuple[float, float]:
    hits = total = flow_hits = 0
    for r in results:
        d = [lab.id for lab in r.decisions]
        hits += sum(lab == r.label for lab in r.decisions)
        total += len(d)
        if d:
            counts = np.bincount(d)
            flow_hits += int(np.argmax(counts) == r.label.id)
    return hits / total if total else 0.0, flow_hits / len(results) if results else 0.0


def sweep(data: PreparedData, bank, clf, enc, cfg: ExperimentConfig, alphas: Sequence[float], seed: int, logs: dict | None = None) -> AlphaSweepResult:
    alphas = _validate_alphas(alphas)
    acc, facc = [], []
    for a in alphas:
        results = [run_flow(t, bank, clf, enc, FusionConfig(a), cfg.windowing) for t in data.test]
        if logs is not None:
            logs[a] = results
        w, f = _accuracies(results)
        acc.append(w)
        facc.append(f)
    base = [run_flow(t, bank, clf, enc, FusionConfig(0.0), cfg.windowing, dt_only=True) for t in data.test]
    bw, bf = _accuracies(base)
    return AlphaSweepResult(alphas, acc, facc, bw, bf, seed)


def alpha_sweep(dataset: LabeledDataset, cfg: ExperimentConfig, alphas: Sequence[float] = DEFAULT_ALPHAS, seed: int = 0) -> AlphaSweepResult:
    alphas = _validate_alphas(alphas)
    data = prepare(dataset, cfg)
    bank, clf, enc = train_models(data, cfg, seed)
    return sweep(data, bank, clf, enc, cfg, alphas, seed)


# -- reports -----------------------------------------------------------------


def _f(v) -> str:
    return repr(float(v))


def write_scenario_reports(results_by_seed: Mapping[int, Sequence[ScenarioResult]], labels: Sequence[ClassLabel], out: Path) -> None:
    """``scenario_results.csv`` (median over seeds, one row per scenario) and a per-seed file."""
    names = [lab.name for lab in labels]
    with open(out / "scenario_results_by_seed.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["seed", "scenario", "overall_rmse", *[f"rmse_{n}" for n in names], "train_pairs"])
        for seed, results in results_by_seed.items():
            for r in results:
                w.writerow([seed, r.scenario, _f(r.overall), *[_f(r.per_class.get(lab, float("nan"))) for lab in labels], r.train_pairs])
    with open(out / "scenario_results.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scenario", "overall_rmse", *[f"rmse_{n}" for n in names], "n_seeds"])
        for name in ("A", "B", "C"):
            rs = [r for results in results_by_seed.values() for r in results if r.scenario == name]
            if not rs:
                continue
            med = [np.median([r.per_class.get(lab, np.nan) for r in rs]) for lab in labels]
            w.writerow([name, _f(np.median([r.overall for r in rs])), *[_f(m) for m in med], len(rs)])


def write_prediction_log(results: Sequence[ScenarioResult], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scenario", "flow", "class", "predictor", "bin", "predicted", "truth"])
        for r in results:
            for k, f in enumerate(r.flows):
                for b, p, t in zip(f.bins, f.predicted, f.truth):
                    w.writerow([r.scenario, k, f.label.name, f.predictor, int(b), _f(p), _f(t)])


def write_sweep_reports(sweeps: Sequence[AlphaSweepResult], out: Path) -> None:
    """``alpha_sweep.csv`` (median over seeds, one row per alpha), per-seed rows and the D_t-only baseline."""
    alphas = sweeps[0].alphas
    with open(out / "alpha_sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["alpha", "accuracy", "flow_accuracy", "n_seeds"])
        for i, a in enumerate(alphas):
            w.writerow([_f(a), _f(np.median([s.accuracy[i] for s in sweeps])), _f(np.median([s.flow_accuracy[i] for s in sweeps])), len(sweeps)])
    with open(out / "alpha_sweep_by_seed.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["seed", "alpha", "accuracy", "flow_accuracy"])
        for s in sweeps:
            for a, acc, facc in zip(s.alphas, s.accuracy, s.flow_accuracy):
                w.writerow([s.seed, _f(a), _f(acc), _f(facc)])
    with open(out / "dt_only_baseline.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["seed", "accuracy", "flow_accuracy"])
        for s in sweeps:
            w.writerow([s.seed, _f(s.dt_only_accuracy), _f(s.dt_only_flow_accuracy)])
        w.writerow(["median", _f(np.median([s.dt_only_accuracy for s in sweeps])), _f(np.median([s.dt_only_flow_accuracy for s in sweeps]))])


def config_dict(cfg: ExperimentConfig) -> dict:
    d = asdict(cfg)
    d["windowing"] = {"class_window": cfg.windowing.class_window, "pred_bin": cfg.windowing.pred_bin}
    d["sliding"] = {"window": cfg.sliding.window}
    return json.loads(json.dumps(d))
