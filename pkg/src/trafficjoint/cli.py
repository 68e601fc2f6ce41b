"""Command-line entry point: ``generate``, ``train``, ``evaluate`` and ``features dump``.

Exit codes: 0 success, 1 usage or config error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from trafficjoint import __version__, harness, mlp
from trafficjoint.config import ConfigDoc, ConfigError
from trafficjoint.features import FEATURE_NAMES, WindowingConfig, extract_series, feature_matrix
from trafficjoint.harness import DEFAULT_ALPHAS, ExperimentConfig, LearnerConfig
from trafficjoint.joint import Classifier, FusionConfig, run_flow, write_decision_log
from trafficjoint.predictors import (
    MissingClassData,
    SeriesTooShort,
    SlidingWindowConfig,
    load_bank,
    save_bank,
    window_dataset,
)
from trafficjoint.synth import InvalidProfile, default_profiles, generate_trace, load_profiles
from trafficjoint.synth import class_seed as data_seed
from trafficjoint.trace import ClassLabel, LabeledDataset, TraceError, read_trace_csv, split_by_time, write_trace_csv

log = logging.getLogger("trafficjoint")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3

DATA_MANIFEST = "manifest.json"
MODELS_MANIFEST = "models.json"


def run_manifest_path(out: Path, mode: str) -> Path:
    return out / f"run_manifest_{mode}.json"


class DataError(Exception):
    """Missing or malformed dataset/model files."""


class OutputExists(Exception):
    pass


@dataclass
class RunConfig:
    dataset: Path | None = None
    models: Path = Path("models")
    reports: Path = Path("reports")
    profiles: Path | None = None
    duration: float = 300.0
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)
    alphas: tuple[float, ...] = DEFAULT_ALPHAS
    mismatch: dict[str, str] | None = None
    train_in_place: bool = True

    def to_dict(self) -> dict:
        e = self.experiment

        def learner(lc: LearnerConfig) -> dict:
            return {
                "hidden": list(lc.hidden),
                "activation": lc.activation,
                "learning_rate": lc.learning_rate,
                "epochs": lc.epochs,
                "batch_size": lc.batch_size,
                "momentum": lc.momentum,
            }

        return {
            "paths": {
                "dataset": str(self.dataset) if self.dataset else None,
                "models": str(self.models),
                "reports": str(self.reports),
                "profiles": str(self.profiles) if self.profiles else None,
            },
            "data": {"duration": self.duration, "split": e.split, "seeds": list(self.seeds)},
            "windowing": {"class_window": e.windowing.class_window, "pred_bin": e.windowing.pred_bin},
            "predictor": {"window": e.sliding.window, **learner(e.predictor)},
            "classifier": learner(e.classifier),
            "fusion": {"alpha": e.alpha, "encoding": list(e.encoding) if e.encoding else None},
            "experiment": {"alphas": list(self.alphas), "mismatch": self.mismatch, "train_in_place": self.train_in_place},
        }


def _opt(conv):
    return lambda v: None if v is None else conv(v)


def _int_list(v):
    if not isinstance(v, (list, tuple)):
        raise TypeError("expected a list")
    return tuple(int(x) for x in v)


def _float_list(v):
    if not isinstance(v, (list, tuple)):
        raise TypeError("expected a list")
    return tuple(float(x) for x in v)


def _bool(v):
    if not isinstance(v, bool):
        raise TypeError("expected true/false")
    return v


def _mapping(v):
    if not isinstance(v, dict):
        raise TypeError("expected a mapping")
    return {str(k): str(x) for k, x in v.items()}


_LEARNER_KEYS = {
    "hidden": _int_list,
    "activation": lambda v: mlp.Activation(str(v).lower()).value,
    "learning_rate": float,
    "epochs": int,
    "batch_size": _opt(int),
    "momentum": float,
}

SCHEMA: dict[str, dict[str, Callable[[Any], Any]]] = {
    "paths": {"dataset": _opt(str), "models": str, "reports": str, "profiles": _opt(str)},
    "data": {"duration": float, "split": float, "seeds": _int_list},
    "windowing": {"class_window": float, "pred_bin": float},
    "predictor": {"window": int, **_LEARNER_KEYS},
    "classifier": dict(_LEARNER_KEYS),
    "fusion": {"alpha": float, "encoding": _opt(_float_list)},
    "experiment": {"alphas": _float_list, "mismatch": _opt(_mapping), "train_in_place": _bool},
    # written into run manifests; informational only
    "run": {"mode": str, "version": str, "command": str},
}


def parse_config(doc: ConfigDoc, base_dir: Path | None = None) -> RunConfig:
    """Validate a config document against :data:`SCHEMA` and build a :class:`RunConfig`."""
    if not isinstance(doc.data, dict):
        raise ConfigError("top level must be a mapping", doc.path, line=1)
    vals: dict[str, dict[str, Any]] = {}
    for section, body in doc.data.items():
        if section not in SCHEMA:
            raise doc.error(section, "unknown section")
        if body is None:
            continue
        if not isinstance(body, dict):
            raise doc.error(section, "expected a mapping")
        for key, raw in body.items():
            path = f"{section}.{key}"
            conv = SCHEMA[section].get(key)
            if conv is None:
                raise doc.error(path, "unknown key")
            try:
                vals.setdefault(section, {})[key] = conv(raw)
            except (TypeError, ValueError) as exc:
                raise doc.error(path, f"invalid value {raw!r} ({exc})") from None

    def get(section, key, default):
        return vals.get(section, {}).get(key, default)

    def path_of(v):
        if v is None:
            return None
        p = Path(v)
        return p if p.is_absolute() or base_dir is None else base_dir / p

    def build(section, fn):
        try:
            return fn()
        except (TypeError, ValueError) as exc:
            raise doc.error(section, str(exc)) from None

    defaults = RunConfig()
    dflt_learner = LearnerConfig()

    def learner(section):
        return build(
            section,
            lambda: LearnerConfig(
                hidden=get(section, "hidden", dflt_learner.hidden),
                activation=get(section, "activation", dflt_learner.activation),
                learning_rate=get(section, "learning_rate", dflt_learner.learning_rate),
                epochs=get(section, "epochs", dflt_learner.epochs),
                batch_size=get(section, "batch_size", dflt_learner.batch_size),
                momentum=get(section, "momentum", dflt_learner.momentum),
            ),
        )

    pred = learner("predictor")
    clf = learner("classifier")
    build("predictor", lambda: mlp.TrainConfig(pred.learning_rate, pred.epochs, pred.batch_size, 0, pred.momentum))
    build("classifier", lambda: mlp.TrainConfig(clf.learning_rate, clf.epochs, clf.batch_size, 0, clf.momentum))
    windowing = build(
        "windowing",
        lambda: WindowingConfig(get("windowing", "class_window", 0.5), get("windowing", "pred_bin", 0.1)),
    )
    sliding = build("predictor", lambda: SlidingWindowConfig(get("predictor", "window", 10)))
    alpha = get("fusion", "alpha", 1.0)
    build("fusion", lambda: FusionConfig(alpha))
    split = get("data", "split", 120.0)
    if not split > 0:
        raise doc.error("data.split", "must be positive")
    duration = get("data", "duration", defaults.duration)
    if not duration > 0:
        raise doc.error("data.duration", "must be positive")
    alphas = get("experiment", "alphas", defaults.alphas)
    build("experiment.alphas", lambda: harness._validate_alphas(alphas))
    seeds = get("data", "seeds", defaults.seeds)
    if not seeds:
        raise doc.error("data.seeds", "need at least one seed")

    exp = ExperimentConfig(
        windowing=windowing,
        sliding=sliding,
        predictor=pred,
        classifier=clf,
        split=split,
        encoding=get("fusion", "encoding", None),
        alpha=alpha,
    )
    return RunConfig(
        dataset=path_of(get("paths", "dataset", None)),
        models=path_of(get("paths", "models", str(defaults.models))),
        reports=path_of(get("paths", "reports", str(defaults.reports))),
        profiles=path_of(get("paths", "profiles", None)),
        duration=duration,
        seeds=seeds,
        experiment=exp,
        alphas=alphas,
        mismatch=get("experiment", "mismatch", None),
        train_in_place=get("experiment", "train_in_place", True),
    )


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    doc = ConfigDoc.load(path)
    return parse_config(doc, Path(path).resolve().parent)


# -- dataset files -------------------------------------------------------------


def _profiles(path: Path | None):
    return default_profiles() if path is None else load_profiles(path)


def _check_outputs(paths: Sequence[Path], force: bool) -> None:
    if force:
        return
    existing = [str(p) for p in paths if p.exists()]
    if existing:
        raise OutputExists(f"refusing to overwrite {', '.join(existing)} (use --force)")


def _mkdir(path: Path) -> None:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create directory {path}: {exc.strerror}") from None


def generate_files(profiles, duration: float, seeds: Sequence[int], out: Path, force: bool = False, profiles_src: str = "default") -> list[Path]:
    _mkdir(out)
    names = [f"{p.label.name}_seed{s}.csv" for s in seeds for p in profiles]
    _check_outputs([out / n for n in names] + [out / DATA_MANIFEST], force)
    entries = []
    written = []
    for s in seeds:
        for p in profiles:
            trace = generate_trace(p, duration, data_seed(s, p.label.id))
            fname = f"{p.label.name}_seed{s}.csv"
            try:
                write_trace_csv(trace, out / fname)
            except OSError as exc:
                raise DataError(f"cannot write {out / fname}: {exc.strerror}") from None
            written.append(out / fname)
            entries.append({"file": fname, "label": p.label.name, "source_tag": trace.source_tag, "seed": int(s), "duration": duration})
    manifest = {
        "duration": duration,
        "profiles": profiles_src,
        "classes": [{"id": p.label.id, "name": p.label.name} for p in profiles],
        "traces": entries,
    }
    (out / DATA_MANIFEST).write_text(json.dumps(manifest, indent=1) + "\n")
    return written + [out / DATA_MANIFEST]


def load_dataset_dir(directory: Path) -> dict[int, LabeledDataset]:
    """Traces listed in a dataset manifest, grouped by generation seed."""
    mpath = directory / DATA_MANIFEST
    try:
        manifest = json.loads(mpath.read_text())
    except FileNotFoundError:
        raise DataError(f"no dataset manifest at {mpath}") from None
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"unreadable dataset manifest {mpath}: {exc}") from None
    labels = {c["name"]: ClassLabel(int(c["id"]), c["name"]) for c in manifest["classes"]}
    groups: dict[int, list] = {}
    for e in manifest["traces"]:
        if e["label"] not in labels:
            raise DataError(f"{mpath}: trace {e['file']} has unknown label {e['label']!r}")
        try:
            tr = read_trace_csv(directory / e["file"], labels[e["label"]], e.get("source_tag", ""), e.get("duration"))
        except FileNotFoundError:
            raise DataError(f"missing trace file {directory / e['file']}") from None
        except TraceError as exc:
            raise DataError(str(exc)) from None
        groups.setdefault(int(e.get("seed", 0)), []).append(tr)
    universe = sorted(labels.values(), key=lambda lab: lab.id)
    return {s: LabeledDataset(trs, universe) for s, trs in sorted(groups.items())}


def _datasets(cfg: RunConfig) -> dict[int, LabeledDataset]:
    """Per-seed datasets: from ``paths.dataset`` when set, otherwise generated in memory."""
    if cfg.dataset is not None:
        groups = load_dataset_dir(cfg.dataset)
        missing = [s for s in cfg.seeds if s not in groups]
        if missing:
            raise DataError(f"dataset {cfg.dataset} has no traces for seeds {missing}")
        return {s: groups[s] for s in cfg.seeds}
    profiles = _profiles(cfg.profiles)
    labels = [p.label for p in profiles]
    return {
        s: LabeledDataset([generate_trace(p, cfg.duration, data_seed(s, p.label.id)) for p in profiles], labels)
        for s in cfg.seeds
    }


def _require_classes(ds: LabeledDataset) -> None:
    present = {t.label for t in ds.traces}
    for lab in ds.labels:
        if lab not in present:
            raise MissingClassData(f"no traces for class {lab.name}")


def _mismatch(cfg: RunConfig, labels: Sequence[ClassLabel]):
    if cfg.mismatch is None:
        return None
    by_name = {lab.name: lab for lab in labels}
    try:
        return {by_name[k]: by_name[v] for k, v in cfg.mismatch.items()}
    except KeyError as exc:
        raise ConfigError(f"experiment.mismatch names unknown class {exc.args[0]!r}") from None


def write_run_manifest(cfg: RunConfig, mode: str, out: Path) -> None:
    d = cfg.to_dict()
    d["run"] = {"mode": mode, "version": __version__, "command": "evaluate" if mode != "train" else "train"}
    run_manifest_path(out, mode).write_text(json.dumps(d, indent=1) + "\n")


# -- commands ------------------------------------------------------------------


def cmd_generate(args) -> int:
    profiles = _profiles(Path(args.profiles) if args.profiles else None)
    out = Path(args.out)
    files = generate_files(profiles, args.duration, args.seeds, out, args.force, args.profiles or "default")
    log.info("wrote %d files to %s", len(files), out)
    print(f"wrote {len(files) - 1} traces and {DATA_MANIFEST} to {out}")
    return EXIT_OK


def train_from_config(cfg: RunConfig, force: bool = False) -> tuple:
    if cfg.dataset is not None:
        groups = load_dataset_dir(cfg.dataset)
        traces = [t for ds in groups.values() for t in ds.traces]
        labels = next(iter(groups.values())).labels
        ds = LabeledDataset(traces, labels)
    else:
        ds = _datasets(replace(cfg, seeds=cfg.seeds[:1]))[cfg.seeds[0]]
    _require_classes(ds)
    out = cfg.models
    bank_dir = out / "bank"
    _check_outputs([bank_dir / "bank.json", out / "classifier.json", out / MODELS_MANIFEST], force)
    seed = cfg.seeds[0]
    exp = cfg.experiment
    data = harness.prepare(ds, exp)
    bank, clf, enc = harness.train_models(data, exp, seed)
    _mkdir(out)
    save_bank(bank, bank_dir)
    clf.save(out / "classifier.json")
    summary = {
        "seed": seed,
        "encoding": {lab.name: v for lab, v in zip(enc.labels, enc.numeric)},
        "scales": {lab.name: bank.predictors[lab].scale for lab in bank.labels},
        "config": cfg.to_dict(),
        "version": __version__,
    }
    (out / MODELS_MANIFEST).write_text(json.dumps(summary, indent=1) + "\n")
    return bank, clf, enc, data


def cmd_train(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    bank, clf, enc, data = train_from_config(cfg, args.force)
    series = data.train_series(cfg.experiment)
    for lab in bank.labels:
        p = bank.predictors[lab]
        sw = cfg.experiment.sliding
        xs, ys = zip(*(window_dataset(s.raw() / p.scale, sw) for s in series[lab]))
        loss = mlp.mse(p.net, np.concatenate(xs), np.concatenate(ys))
        print(f"predictor {lab.name}: scale={p.scale:g} bytes/bin, train mse={loss:.5f}")
    print(f"classifier: encoding {dict(zip((l.name for l in enc.labels), enc.numeric))}")
    print(f"models written to {cfg.models}")
    return EXIT_OK


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    for attr in ("dataset", "models", "reports"):
        v = getattr(args, attr, None)
        if v:
            cfg = replace(cfg, **{attr: Path(v)})
    if getattr(args, "seeds", None):
        cfg = replace(cfg, seeds=tuple(args.seeds))
    if getattr(args, "alpha", None) is not None:
        cfg = replace(cfg, experiment=replace(cfg.experiment, alpha=FusionConfig(args.alpha).alpha))
    if getattr(args, "alphas", None):
        cfg = replace(cfg, alphas=tuple(harness._validate_alphas(args.alphas)))
    return cfg


def evaluate_scenarios(cfg: RunConfig, force: bool = False) -> dict[int, list]:
    out = cfg.reports
    _mkdir(out)
    _check_outputs([out / "scenario_results.csv", out / "scenario_results_by_seed.csv", run_manifest_path(out, "scenarios")], force)
    results = {}
    labels = None
    for seed, ds in _datasets(cfg).items():
        _require_classes(ds)
        labels = sorted(ds.labels, key=lambda lab: lab.id)
        results[seed] = harness.run_scenarios(ds, cfg.experiment, seed, _mismatch(cfg, labels))
        harness.write_prediction_log(results[seed], out / f"predictions_seed{seed}.csv")
        log.info("seed %d: %s", seed, {r.scenario: round(r.overall, 4) for r in results[seed]})
    harness.write_scenario_reports(results, labels, out)
    write_run_manifest(cfg, "scenarios", out)
    return results


def evaluate_sweep(cfg: RunConfig, force: bool = False) -> list:
    out = cfg.reports
    _mkdir(out)
    _check_outputs([out / "alpha_sweep.csv", out / "alpha_sweep_by_seed.csv", out / "dt_only_baseline.csv", run_manifest_path(out, "alpha-sweep")], force)
    sweeps = []
    for seed, ds in _datasets(cfg).items():
        _require_classes(ds)
        sweeps.append(harness.alpha_sweep(ds, cfg.experiment, cfg.alphas, seed))
        log.info("seed %d: accuracy %s", seed, [round(a, 3) for a in sweeps[-1].accuracy])
    harness.write_sweep_reports(sweeps, out)
    write_run_manifest(cfg, "alpha-sweep", out)
    return sweeps


def evaluate_joint(cfg: RunConfig, force: bool = False, flow: str | None = None, label: str | None = None) -> list[Path]:
    """Per-window decision logs for test flows, using saved models (or training them in place)."""
    out = cfg.reports
    _mkdir(out)
    exp = cfg.experiment
    seed = cfg.seeds[0]
    ds = _datasets(replace(cfg, seeds=(seed,)))[seed]
    if flow is not None:
        by_name = {lab.name: lab for lab in ds.labels}
        if label not in by_name:
            raise ConfigError(f"--label must be one of {sorted(by_name)}, got {label!r}")
        try:
            tr = read_trace_csv(flow, by_name[label], Path(flow).stem)
        except (FileNotFoundError, TraceError) as exc:
            raise DataError(str(exc)) from None
        flows = [(Path(flow).stem, tr)]
    else:
        flows = [(f"{t.label.name}_{i}", split_by_time(t, exp.split)[1]) for i, t in enumerate(ds.traces)]

    if (cfg.models / "classifier.json").exists() and (cfg.models / "bank" / "bank.json").exists():
        bank = load_bank(cfg.models / "bank")
        clf = Classifier.load(cfg.models / "classifier.json")
        enc = exp.label_encoding(bank.labels)
    elif cfg.train_in_place:
        bank, clf, enc, _ = train_from_config(replace(cfg, models=out / "models"), force)
    else:
        raise DataError(f"no trained models in {cfg.models} and experiment.train_in_place is false")
    if flow is not None and flows[0][1].label not in bank.labels:
        raise DataError(f"class {label} has no predictor in {cfg.models}")

    paths = [out / f"decisions_{name}.csv" for name, _ in flows]
    _check_outputs(paths + [run_manifest_path(out, "joint")], force)
    for (name, tr), path in zip(flows, paths):
        res = run_flow(tr, bank, clf, enc, FusionConfig(exp.alpha), exp.windowing)
        write_decision_log(res, enc, path)
        acc = np.mean([d == tr.label for d in res.decisions]) if res.decisions else float("nan")
        print(f"{name}: {len(res.decisions)} windows, accuracy {acc:.3f} -> {path}")
    write_run_manifest(cfg, "joint", out)
    return paths


def cmd_evaluate(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    if args.mode == "scenarios":
        results = evaluate_scenarios(cfg, args.force)
        for name in ("A", "B", "C"):
            vals = [r.overall for rs in results.values() for r in rs if r.scenario == name]
            print(f"scenario {name}: median overall RMSE {np.median(vals):.4f} over {len(vals)} seed(s)")
    elif args.mode == "alpha-sweep":
        sweeps = evaluate_sweep(cfg, args.force)
        for i, a in enumerate(sweeps[0].alphas):
            print(f"alpha={a:g}: median accuracy {np.median([s.accuracy[i] for s in sweeps]):.4f}")
        print(f"D_t only: median accuracy {np.median([s.dt_only_accuracy for s in sweeps]):.4f}")
    else:
        if bool(args.flow) != bool(args.label):
            raise ConfigError("--flow and --label must be given together")
        evaluate_joint(cfg, args.force, args.flow, args.label)
    print(f"reports written to {cfg.reports}")
    return EXIT_OK


def dump_features(trace, cfg: WindowingConfig, out: Path, stem: str, force: bool) -> list[Path]:
    fpath, spath = out / f"{stem}_features.csv", out / f"{stem}_series.csv"
    _check_outputs([fpath, spath], force)
    fm = feature_matrix(trace, cfg)
    with open(fpath, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["window", *FEATURE_NAMES])
        for k, row in enumerate(fm):
            w.writerow([k, repr(float(row[0])), *(int(v) for v in row[1:4]), repr(float(row[4])), int(row[5])])
    series = extract_series(trace, cfg).values
    with open(spath, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin", "start_s", "bytes"])
        for b, v in enumerate(series):
            w.writerow([b, repr(b * cfg.pred_bin), repr(float(v))])
    return [fpath, spath]


def cmd_features_dump(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    out = Path(args.out)
    _mkdir(out)
    win = cfg.experiment.windowing
    written = []
    if args.trace:
        try:
            tr = read_trace_csv(args.trace, ClassLabel(0, args.label or "unknown"), Path(args.trace).stem)
        except (FileNotFoundError, TraceError) as exc:
            raise DataError(str(exc)) from None
        written += dump_features(tr, win, out, Path(args.trace).stem, args.force)
    else:
        for seed, ds in _datasets(cfg).items():
            for tr in ds.traces:
                written += dump_features(tr, win, out, f"{tr.label.name}_seed{seed}", args.force)
    print(f"wrote {len(written)} files to {out}")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="trafficjoint", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write synthetic trace CSVs and a manifest")
    g.add_argument("--profiles", help="profile config (YAML); default: packaged VO/VI/GM profiles")
    g.add_argument("--duration", type=float, default=300.0, help="seconds per trace (default 300)")
    g.add_argument("--seeds", type=int, nargs="+", default=[0], help="one trace per class per seed")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--force", action="store_true", help="overwrite existing files")
    g.set_defaults(func=cmd_generate)

    def common(sp):
        sp.add_argument("--config", help="run config (YAML); defaults apply when omitted")
        sp.add_argument("--dataset", help="override paths.dataset")
        sp.add_argument("--models", help="override paths.models")
        sp.add_argument("--reports", help="override paths.reports")
        sp.add_argument("--seeds", type=int, nargs="+", help="override data.seeds")
        sp.add_argument("--force", action="store_true", help="overwrite existing outputs")

    t = sub.add_parser("train", help="train the predictor bank and classifier")
    common(t)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="run scenario, alpha-sweep or joint evaluations")
    common(e)
    e.add_argument("--mode", choices=("scenarios", "alpha-sweep", "joint"), required=True)
    e.add_argument("--alpha", type=float, help="override fusion.alpha (joint mode)")
    e.add_argument("--alphas", type=float, nargs="+", help="override experiment.alphas")
    e.add_argument("--flow", help="joint mode: a single trace CSV to run")
    e.add_argument("--label", help="joint mode: true class name of --flow")
    e.set_defaults(func=cmd_evaluate)

    f = sub.add_parser("features", help="feature utilities")
    fsub = f.add_subparsers(dest="features_command", required=True, parser_class=_Parser)
    d = fsub.add_parser("dump", help="write per-window features and per-bin series as CSV")
    common(d)
    d.add_argument("--trace", help="a single trace CSV (otherwise every dataset trace)")
    d.add_argument("--label", help="class name recorded for --trace")
    d.add_argument("--out", required=True, help="output directory")
    d.set_defaults(func=cmd_features_dump)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, OutputExists) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, TraceError, MissingClassData, SeriesTooShort, InvalidProfile, harness.InvalidMismatch) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
