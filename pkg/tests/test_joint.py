import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import GM, VI, VO, make_trace
from trafficjoint import mlp
from trafficjoint.features import WindowingConfig
from trafficjoint.joint import (
    Classifier,
    FusionConfig,
    JointState,
    LabelEncoding,
    UnknownLabel,
    classify,
    dt_vector,
    fuse,
    joint_step,
    log_header,
    run_flow,
    train_classifier,
    write_decision_log,
)
from trafficjoint.predictors import LengthMismatch, Predictor, PredictorBank, SlidingWindowConfig

ENC = LabelEncoding.default([VO, VI, GM])


def test_encoding_default_and_distinct():
    assert ENC.numeric == (0.0, 1.0, 2.0)
    with pytest.raises(ValueError):
        LabelEncoding((VO, VI), (1.0, 1.0))
    with pytest.raises(UnknownLabel):
        ENC.code(VO.__class__(7, "X"))


def test_dt_vector_examples():
    assert dt_vector(1.2, ENC) == pytest.approx([1.2, 0.2, 0.8])
    assert dt_vector(2.0, ENC)[2] == 0
    d = dt_vector(10, ENC)
    assert d.tolist() == [10, 9, 8] and classify(d, ENC) == GM


def test_fuse_examples():
    dp, dt = [0.5, 0.1, 0.9], [1.2, 0.2, 0.8]
    assert fuse(dp, dt, FusionConfig(1.0)) == pytest.approx([1.7, 0.3, 1.7])
    assert fuse(dp, dt, FusionConfig(0.0)).tolist() == dp
    assert classify(fuse(dp, dt, FusionConfig(1e9)), ENC) == classify(dt, ENC)
    with pytest.raises(LengthMismatch):
        fuse([0.1], [0.1, 0.2], FusionConfig(1.0))
    with pytest.raises(ValueError):
        FusionConfig(-0.1)


def test_classify_examples():
    assert classify([1.7, 0.3, 1.7], ENC) == VI
    assert classify([0.4, 0.4, 0.4], ENC) == VO
    assert classify([3.0], LabelEncoding.default([GM])) == GM


def test_classify_ties_use_class_id_not_position():
    enc = LabelEncoding((GM, VO, VI), (0.0, 1.0, 2.0))
    assert classify([0.2, 0.2, 0.5], enc) == VO


vec = st.lists(st.floats(0, 10, allow_nan=False), min_size=3, max_size=3)


@settings(max_examples=200, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5))
def test_dt_translation_invariant(x, shift):
    shifted = LabelEncoding(ENC.labels, tuple(v + shift for v in ENC.numeric))
    assert np.allclose(dt_vector(x + shift, shifted), dt_vector(x, ENC), atol=1e-9)


@settings(max_examples=200, deadline=None)
@given(vec, vec, st.floats(0, 100))
def test_fuse_linear_in_alpha(dp, dt, a):
    diff = fuse(dp, dt, FusionConfig(a)) - fuse(dp, dt, FusionConfig(0.0))
    assert np.allclose(diff, a * np.asarray(dt))


@settings(max_examples=200, deadline=None)
@given(vec, st.floats(-1, 3))
def test_zero_dp_is_nearest_label(dp, x):
    d = fuse(np.zeros(3), dt_vector(x, ENC), FusionConfig(1.0))
    nearest = min(ENC.labels, key=lambda lab: (abs(ENC.code(lab) - x), lab.id))
    assert classify(d, ENC) == nearest
    assert classify(fuse(dp, dt_vector(x, ENC), FusionConfig(0.0)), ENC) == classify(dp, ENC)


@settings(max_examples=200, deadline=None)
@given(vec, vec, st.floats(0, 10), st.sampled_from([0.5, 2.0, 4.0]))
def test_scale_covariance(dp, dt, a, c):
    # power-of-two scalings keep the products exact, so ties are preserved too
    base = classify(fuse(dp, dt, FusionConfig(a)), ENC)
    assert classify(fuse(np.multiply(dp, c), np.multiply(dt, c), FusionConfig(a)), ENC) == base


def const_classifier(value, n_features=6):
    net = mlp.Network(mlp.NetSpec((n_features, 1, 1)), [np.zeros((1, n_features)), np.zeros((1, 1))], [np.zeros(1), np.array([value])])
    return Classifier(net, np.zeros(n_features), np.ones(n_features))


def const_predictor(window, value, scale):
    net = mlp.Network(mlp.NetSpec((window, 1, 1)), [np.zeros((1, window)), np.zeros((1, 1))], [np.zeros(1), np.array([value])])
    return Predictor(net, scale)


def test_train_classifier_separable():
    rng = np.random.default_rng(0)
    labels = [VO, VI, GM] * 40
    feats = rng.normal(size=(120, 6))
    feats[:, 2] = [ENC.code(lab) for lab in labels]
    clf = train_classifier(feats, labels, ENC, mlp.NetSpec((6, 8, 1)), mlp.TrainConfig(0.05, 1500, momentum=0.9), seed=0)
    hits = sum(classify(dt_vector(clf(f), ENC), ENC) == lab for f, lab in zip(feats, labels))
    assert hits / len(labels) > 0.95


def test_train_classifier_single_class_and_determinism():
    rng = np.random.default_rng(1)
    feats = rng.normal(size=(30, 6))
    cfg = mlp.TrainConfig(0.05, 500, momentum=0.9)
    a = train_classifier(feats, [GM] * 30, ENC, mlp.NetSpec((6, 4, 1)), cfg, seed=2)
    assert np.allclose(a(feats), 2.0, atol=0.05)
    assert a == train_classifier(feats, [GM] * 30, ENC, mlp.NetSpec((6, 4, 1)), cfg, seed=2)


def test_train_classifier_errors():
    with pytest.raises(mlp.EmptyDataset):
        train_classifier(np.zeros((0, 6)), [], ENC, mlp.NetSpec((6, 4, 1)), mlp.TrainConfig(), 0)
    with pytest.raises(UnknownLabel):
        train_classifier(np.zeros((1, 6)), [VO.__class__(9, "Z")], ENC, mlp.NetSpec((6, 4, 1)), mlp.TrainConfig(), 0)


def test_classifier_save_load(tmp_path):
    rng = np.random.default_rng(3)
    feats = rng.normal(size=(20, 6))
    clf = train_classifier(feats, [VO, VI] * 10, ENC, mlp.NetSpec((6, 4, 1)), mlp.TrainConfig(epochs=20), 0)
    clf.save(tmp_path / "c.json")
    back = Classifier.load(tmp_path / "c.json")
    assert back == clf and np.array_equal(back(feats), clf(feats))


def steady_flow(bytes_per_bin=500.0, seconds=5.0):
    # one 500-byte packet per 0.1 s bin, placed mid-bin
    times = np.arange(int(seconds * 10)) * 0.1 + 0.05
    return make_trace(times, sizes=[int(bytes_per_bin)] * len(times), label=VI, duration=seconds)


def test_prediction_error_dominates_when_alpha_zero():
    w = 3
    # VI's predictor is exact on a 500-byte flow; the others predict 1000 bytes (error 1.0 in flow units)
    bank = PredictorBank(
        [VO, VI, GM],
        {VO: const_predictor(w, 1.0, 1000.0), VI: const_predictor(w, 1.0, 500.0), GM: const_predictor(w, 0.5, 2000.0)},
        SlidingWindowConfig(w),
        WindowingConfig(),
    )
    res = run_flow(steady_flow(), bank, const_classifier(0.0), ENC, FusionConfig(0.0))
    assert res.decisions[0] == VO  # cold start: classifier only
    assert all(d == VI for d in res.decisions[1:])
    assert res.steps[1].d_p.tolist() == pytest.approx([1.0, 0.0, 1.0])


def test_active_prediction_follows_previous_decision():
    w = 3
    bank = PredictorBank(
        [VO, VI, GM],
        {VO: const_predictor(w, 1.0, 1000.0), VI: const_predictor(w, 1.0, 500.0), GM: const_predictor(w, 1.0, 2000.0)},
        SlidingWindowConfig(w),
        WindowingConfig(),
    )
    res = run_flow(steady_flow(), bank, const_classifier(0.0), ENC, FusionConfig(0.0))
    # window 0 has no earlier decision; window 1 uses VO's predictor (window 0's decision); later windows VI's
    assert np.all(np.isnan(res.active[:5]))
    assert res.active[5:10].tolist() == [1000.0] * 5
    assert res.active[10:].tolist() == [500.0] * (len(res.active) - 10)


def test_joint_step_state_and_records():
    w = 2
    bank = PredictorBank([VO, VI], {VO: const_predictor(w, 1.0, 10.0), VI: const_predictor(w, 1.0, 20.0)}, SlidingWindowConfig(w), WindowingConfig())
    enc = LabelEncoding.default([VO, VI])
    state = JointState()
    out = joint_step(state, bank, const_classifier(1.0), enc, FusionConfig(1.0), [10.0] * 5, np.zeros(6))
    assert out.decision == VI and state.decision == VI
    assert len(state.records) == 3  # bins 2..4 have two bins of history
    assert len(state.records) <= WindowingConfig().ratio
    assert state.window_index == 1
    out = joint_step(state, bank, const_classifier(1.0), enc, FusionConfig(0.0), [10.0] * 5, np.zeros(6))
    assert out.decision == VO and len(state.records) == 5


def test_decision_log_format(tmp_path):
    w = 3
    bank = PredictorBank([VO, VI, GM], {lab: const_predictor(w, 1.0, 500.0) for lab in (VO, VI, GM)}, SlidingWindowConfig(w), WindowingConfig())
    res = run_flow(steady_flow(seconds=2.0), bank, const_classifier(1.2), ENC, FusionConfig(0.5))
    path = tmp_path / "log.csv"
    write_decision_log(res, ENC, path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == log_header(ENC)
    assert rows[0][:2] == ["window_index", "x_t"] and rows[0][-2:] == ["decision", "truth"]
    assert len(rows) == 1 + 4
    assert rows[1][-1] == "VI"
    assert rows[1][8:11] == rows[1][5:8]  # cold start: D_a is D_t
    assert [float(v) for v in rows[2][5:8]] == pytest.approx([1.2, 0.2, 0.8])
