import logging
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from src.engine.data import apply_standardizer, fit_standardizer
from src.engine.errors import ArgumentError, ConfigError, DimensionError
from src.engine.mlp import (
    AdamState,
    MlpModel,
    MlpParams,
    TrainConfig,
    adam_step,
    forward,
    forward_batch,
    init_mlp,
    loss_and_grads,
    lr_schedule,
    predict_labels,
    softmax,
    stratified_holdout,
    train_mlp,
)


def _standardized(ds):
    s = fit_standardizer(ds, np.arange(ds.n_samples))
    return apply_standardizer(s, ds.features), ds.labels


# -------------------------
# Network
# -------------------------
def test_init_shapes_and_zero_biases():
    m = init_mlp(5, 7, 3, seed=1)
    assert m.w1.shape == (5, 7) and m.w2.shape == (7, 3)
    assert np.all(m.b1 == 0) and np.all(m.b2 == 0)
    assert (m.d_in, m.hidden_size, m.class_count) == (5, 7, 3)


def test_init_deterministic_per_seed():
    a, b, c = init_mlp(4, 6, 2, 9), init_mlp(4, 6, 2, 9), init_mlp(4, 6, 2, 10)
    assert_array_equal(a.w1, b.w1)
    assert not np.array_equal(a.w1, c.w1)


def test_init_he_scale():
    m = init_mlp(400, 300, 2, seed=0)
    assert m.w1.std() == pytest.approx(math.sqrt(2 / 400), rel=0.05)
    assert m.w2.std() == pytest.approx(math.sqrt(2 / 300), rel=0.1)


def test_init_rejects_single_class():
    with pytest.raises(ArgumentError):
        init_mlp(3, 4, 1, seed=0)


def test_forward_is_a_distribution():
    rng = np.random.default_rng(0)
    m = init_mlp(3, 5, 4, seed=2)
    xs = rng.standard_normal((10_000, 3))
    # row norms spread over [0, 1e3]
    xs *= (rng.uniform(0.0, 1e3, size=10_000) / np.linalg.norm(xs, axis=1))[:, None]
    p = forward_batch(m, xs)
    assert p.shape == (10_000, 4)
    assert np.all(p >= 0)
    assert np.max(np.abs(p.sum(axis=1) - 1.0)) < 1e-9


def _output_layer_only(b2):
    c = len(b2)
    return MlpModel(w1=np.zeros((2, 3)), b1=np.zeros(3), w2=np.zeros((3, c)), b2=np.array(b2, dtype=float))


def test_zero_model_is_uniform():
    assert_allclose(forward(_output_layer_only([0.0, 0.0, 0.0, 0.0]), np.array([3.0, -1.0])), [0.25] * 4)


def test_forward_known_logits():
    assert_allclose(forward(_output_layer_only([0.0, 0.0, math.log(2.0)]), np.zeros(2)), [0.25, 0.25, 0.5])
    p = forward(_output_layer_only([1000.0, 0.0]), np.zeros(2))
    assert np.all(np.isfinite(p))
    assert p[0] == pytest.approx(1.0) and p[1] < 1e-300


def test_softmax_stable_for_large_logits():
    p = softmax(np.array([[1000.0, 1000.0, -1000.0]]))
    assert_allclose(p, [[0.5, 0.5, 0.0]])


def test_forward_single_row_matches_batch():
    m = init_mlp(3, 5, 2, seed=3)
    x = np.array([0.1, -0.4, 2.0])
    assert_allclose(forward(m, x), forward_batch(m, x[None, :])[0])


def test_forward_wrong_width():
    m = init_mlp(3, 5, 2, seed=3)
    with pytest.raises(DimensionError):
        forward_batch(m, np.zeros((2, 4)))


def test_predict_labels_ties_go_low():
    m = MlpModel(w1=np.zeros((2, 3)), b1=np.zeros(3), w2=np.zeros((3, 3)), b2=np.zeros(3))
    assert predict_labels(m, np.ones((4, 2))).tolist() == [0, 0, 0, 0]


# -------------------------
# Gradients
# -------------------------
def _away_from_kinks(seed: int):
    # redraw until no hidden pre-activation sits near the ReLU kink
    while True:
        rng = np.random.default_rng(seed)
        model = init_mlp(3, 4, 3, seed)
        model.b1 = rng.standard_normal(4) * 0.1
        model.b2 = rng.standard_normal(3) * 0.1
        xs = rng.standard_normal((5, 3))
        ys = rng.integers(0, 3, size=5)
        if np.min(np.abs(xs @ model.w1 + model.b1)) > 1e-3:
            return model, xs, ys
        seed += 1000


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_gradients_match_finite_differences(seed):
    model, xs, ys = _away_from_kinks(seed)
    _, grads = loss_and_grads(model, xs, ys)
    eps = 1e-6
    for name in MlpParams._fields:
        param = getattr(model, name)
        numeric = np.zeros_like(param)
        for idx in np.ndindex(param.shape):
            orig = param[idx]
            param[idx] = orig + eps
            up = loss_and_grads(model, xs, ys).loss
            param[idx] = orig - eps
            down = loss_and_grads(model, xs, ys).loss
            param[idx] = orig
            numeric[idx] = (up - down) / (2 * eps)
        assert_allclose(getattr(grads, name), numeric, rtol=1e-5, atol=1e-7)


def _numeric_grads(model, xs, ys, eps=1e-6):
    out = []
    for name in MlpParams._fields:
        param = getattr(model, name)
        numeric = np.zeros_like(param)
        for idx in np.ndindex(param.shape):
            orig = param[idx]
            param[idx] = orig + eps
            up = loss_and_grads(model, xs, ys).loss
            param[idx] = orig - eps
            down = loss_and_grads(model, xs, ys).loss
            param[idx] = orig
            numeric[idx] = (up - down) / (2 * eps)
        out.append(numeric)
    return np.concatenate([g.ravel() for g in out])


def test_gradients_over_random_small_networks():
    worst, checked, seed = 0.0, 0, 0
    while checked < 100:
        seed += 1
        rng = np.random.default_rng(1000 + seed)
        n_in, hidden, c, m = (int(v) for v in rng.integers([1, 2, 2, 1], [5, 7, 5, 7]))
        model = init_mlp(n_in, hidden, c, seed)
        model.b1 = rng.standard_normal(hidden) * 0.1
        model.b2 = rng.standard_normal(c) * 0.1
        xs = rng.standard_normal((m, n_in))
        ys = rng.integers(0, c, size=m)
        if np.min(np.abs(xs @ model.w1 + model.b1)) < 1e-4:
            continue
        _, grads = loss_and_grads(model, xs, ys)
        analytic = np.concatenate([np.ravel(g) for g in grads])
        numeric = _numeric_grads(model, xs, ys)
        err = np.linalg.norm(analytic - numeric) / max(np.linalg.norm(analytic) + np.linalg.norm(numeric), 1e-12)
        worst = max(worst, err)
        checked += 1
    assert worst < 1e-4


def test_loss_matches_cross_entropy():
    model, xs, ys = _away_from_kinks(4)
    p = forward_batch(model, xs)
    expected = -np.mean(np.log(p[np.arange(len(ys)), ys]))
    assert loss_and_grads(model, xs, ys).loss == pytest.approx(expected, rel=1e-12)


def test_uniform_model_loss_is_log_classes():
    m = MlpModel(w1=np.zeros((2, 4)), b1=np.zeros(4), w2=np.zeros((4, 3)), b2=np.zeros(3))
    xs = np.random.default_rng(0).standard_normal((6, 2))
    assert loss_and_grads(m, xs, np.array([0, 1, 2, 2, 1, 0])).loss == pytest.approx(math.log(3.0), rel=1e-12)


def test_duplicated_batch_gives_same_loss_and_grads():
    model, xs, ys = _away_from_kinks(7)
    once = loss_and_grads(model, xs, ys)
    twice = loss_and_grads(model, np.vstack([xs, xs]), np.concatenate([ys, ys]))
    assert twice.loss == pytest.approx(once.loss, rel=1e-12)
    for a, b in zip(once.grads, twice.grads):
        assert_allclose(b, a, rtol=1e-12, atol=1e-15)


def test_loss_rejects_out_of_range_label():
    model = init_mlp(2, 3, 2, seed=0)
    with pytest.raises(ArgumentError):
        loss_and_grads(model, np.zeros((2, 2)), np.array([0, 2]))


# -------------------------
# Optimizer / schedule
# -------------------------
def test_adam_first_step_moves_by_lr_times_sign():
    rng = np.random.default_rng(5)
    params = MlpParams(*(rng.standard_normal(s) for s in [(2, 3), (3,), (3, 2), (2,)]))
    grads = MlpParams(*(np.sign(rng.standard_normal(p.shape)) * (0.5 + rng.random(p.shape)) for p in params))
    before = [p.copy() for p in params]
    new, state = adam_step(AdamState.zeros_like(params), params, grads, lr=1e-3)
    assert state.t == 1
    for p, g, n, b in zip(params, grads, new, before):
        assert_array_equal(p, b)
        assert_allclose(n, p - 1e-3 * np.sign(g), atol=1e-9)


def test_adam_accepts_plain_tuples():
    params = (np.ones(2), np.zeros(3))
    grads = (np.ones(2), np.ones(3))
    new, state = adam_step(AdamState.zeros_like(params), params, grads, lr=0.1)
    assert isinstance(new, tuple) and len(new) == 2
    assert state.t == 1


def test_adam_zero_gradient_is_a_fixed_point():
    rng = np.random.default_rng(6)
    params = MlpParams(*(rng.standard_normal(s) for s in [(2, 3), (3,), (3, 2), (2,)]))
    zeros = MlpParams(*(np.zeros_like(p) for p in params))
    state = AdamState.zeros_like(params)
    current = params
    for _ in range(50):
        current, state = adam_step(state, current, zeros, lr=1e-2)
    assert state.t == 50
    for a, b in zip(current, params):
        assert_array_equal(a, b)


def test_adam_descends_on_a_parabola():
    params = (np.array([1.0]),)
    state = AdamState.zeros_like(params)
    trace = [1.0]
    for _ in range(100):
        params, state = adam_step(state, params, (2.0 * params[0],), lr=1e-1)
        trace.append(float(params[0][0]))
    assert abs(trace[-1]) < 0.5
    # the first steps move straight toward the minimum
    assert all(b < a for a, b in zip(trace[:6], trace[1:6]))


def test_full_batch_loss_decreases_for_ten_steps():
    rng = np.random.default_rng(8)
    xs = rng.standard_normal((30, 4))
    ys = rng.integers(0, 3, size=30)
    model = init_mlp(4, 16, 3, seed=8)
    params = model.params()
    state = AdamState.zeros_like(params)
    losses = []
    for _ in range(11):
        loss, grads = loss_and_grads(MlpModel(*params), xs, ys)
        losses.append(loss)
        params, state = adam_step(state, params, grads, lr=1e-3)
    assert all(b < a for a, b in zip(losses, losses[1:]))


def test_adam_shape_mismatch():
    params = MlpParams(np.ones((2, 2)), np.ones(2), np.ones((2, 2)), np.ones(2))
    grads = MlpParams(np.ones((2, 3)), np.ones(2), np.ones((2, 2)), np.ones(2))
    with pytest.raises(DimensionError):
        adam_step(AdamState.zeros_like(params), params, grads, lr=0.1)


def test_lr_schedule_drops_after_epoch():
    cfg = TrainConfig()
    assert lr_schedule(cfg, 1) == 1e-3
    assert lr_schedule(cfg, 50) == 1e-3
    assert lr_schedule(cfg, 51) == 1e-4
    with pytest.raises(ArgumentError):
        lr_schedule(cfg, 0)


@pytest.mark.parametrize(
    "kwargs",
    [{"epochs": 0}, {"hidden_size": 0}, {"batch_size": 0}, {"holdout_fraction": 1.0}, {"lr_initial": 0.0}],
)
def test_train_config_validation(kwargs):
    with pytest.raises(ConfigError):
        TrainConfig(**kwargs)


# -------------------------
# Training
# -------------------------
def test_stratified_holdout_keeps_every_class_on_both_sides():
    ys = np.array([0] * 5 + [1] * 3 + [2] * 2)
    fit, hold = stratified_holdout(ys, 3, 0.2, np.random.default_rng(0))
    assert np.intersect1d(fit, hold).size == 0
    assert sorted(np.concatenate([fit, hold]).tolist()) == list(range(10))
    for c in range(3):
        assert np.sum(ys[fit] == c) >= 1
        assert np.sum(ys[hold] == c) >= 1


def test_stratified_holdout_none_for_singleton_class():
    ys = np.array([0, 0, 0, 1])
    assert stratified_holdout(ys, 2, 0.2, np.random.default_rng(0)) is None
    assert stratified_holdout(np.array([0, 0, 1, 1]), 2, 0.0, np.random.default_rng(0)) is None


def test_train_is_deterministic(blobs, fast_cfg):
    x, y = _standardized(blobs)
    m1, h1 = train_mlp(x, y, fast_cfg, 11)
    m2, h2 = train_mlp(x, y, fast_cfg, 11)
    for a, b in zip(m1.params(), m2.params()):
        assert_array_equal(a, b)
    assert h1.loss == h2.loss
    assert h1.holdout_accuracy == h2.holdout_accuracy
    assert h1.best_epoch == h2.best_epoch


def test_default_seed_comes_from_config(blobs, fast_cfg):
    x, y = _standardized(blobs)
    m1, _ = train_mlp(x, y, fast_cfg)
    m2, _ = train_mlp(x, y, fast_cfg, fast_cfg.seed)
    assert_array_equal(m1.w1, m2.w1)


def test_learns_separable_blobs(blobs):
    x, y = _standardized(blobs)
    cfg = TrainConfig(
        epochs=30, batches_per_epoch=20, hidden_size=8, early_stop_patience=30,
        lr_initial=1e-2, lr_after_drop=1e-2, lr_drop_epoch=30,
    )
    model, history = train_mlp(x, y, cfg, 0)
    assert np.mean(predict_labels(model, x) == y) >= 0.9
    assert history.loss[-1] < history.loss[0]


def test_early_stopping_bookkeeping(blobs, fast_cfg):
    x, y = _standardized(blobs)
    _, h = train_mlp(x, y, fast_cfg, 3)
    assert h.early_stopping
    assert 1 <= h.last_improvement <= h.best_epoch <= h.completed_epochs <= fast_cfg.epochs
    assert len(h.train_accuracy) == len(h.holdout_accuracy) == h.completed_epochs
    best = max(h.holdout_accuracy)
    assert h.holdout_accuracy[h.best_epoch - 1] == best
    assert h.holdout_accuracy[h.last_improvement - 1] == best
    # latest epoch tied at the best holdout accuracy
    assert all(a < best for a in h.holdout_accuracy[h.best_epoch:])
    if h.completed_epochs < fast_cfg.epochs:
        assert h.completed_epochs - h.last_improvement == fast_cfg.early_stop_patience


def test_snapshots_hold_the_best_epoch(blobs, fast_cfg):
    x, y = _standardized(blobs)
    model, h = train_mlp(x, y, fast_cfg, 5, keep_snapshots=True)
    assert len(h.snapshots) == h.completed_epochs
    best = h.snapshots[h.best_epoch - 1]
    for a, b in zip(model.params(), best.params()):
        assert_array_equal(a, b)


def test_patience_one_restores_the_peak(blobs):
    x, y = _standardized(blobs)
    cfg = TrainConfig(
        epochs=20, batches_per_epoch=3, hidden_size=6, early_stop_patience=1,
        lr_initial=5e-3, lr_after_drop=5e-3, lr_drop_epoch=20, holdout_fraction=0.4,
    )
    model, h = train_mlp(x, y, cfg, 2)
    hold = np.setdiff1d(np.arange(len(y)), h.fit_indices)
    assert hold.size > 0
    peak = max(h.holdout_accuracy)
    assert h.best_epoch == max(e for e, a in enumerate(h.holdout_accuracy, start=1) if a == peak)
    assert np.mean(predict_labels(model, x[hold]) == y[hold]) == h.holdout_accuracy[h.best_epoch - 1]
    if h.completed_epochs < cfg.epochs:
        assert h.completed_epochs == h.last_improvement + 1


def test_full_schedule_keeps_tracking_the_holdout(blobs, fast_cfg):
    x, y = _standardized(blobs)
    model, h = train_mlp(x, y, fast_cfg, 3, keep_snapshots=True, early_stop=False)
    assert not h.early_stopping
    assert h.completed_epochs == h.best_epoch == fast_cfg.epochs
    assert not any(math.isnan(a) for a in h.holdout_accuracy)
    assert 0 < h.fit_indices.size < len(y)
    for a, b in zip(model.params(), h.snapshots[-1].params()):
        assert_array_equal(a, b)
    assert h.train_accuracy[-1] == np.mean(predict_labels(model, x[h.fit_indices]) == y[h.fit_indices])


def test_tiny_set_disables_early_stopping(fast_cfg, caplog):
    x = np.array([[0.0, 1.0], [0.1, 0.9], [1.0, 0.0]])
    y = np.array([0, 0, 1])
    with caplog.at_level(logging.WARNING, logger="rfmlp"):
        _, h = train_mlp(x, y, fast_cfg, 0)
    assert not h.early_stopping
    assert h.completed_epochs == fast_cfg.epochs
    assert h.best_epoch == fast_cfg.epochs
    assert all(math.isnan(a) for a in h.holdout_accuracy)
    assert "early stopping disabled" in caplog.text


def test_train_rejects_empty():
    with pytest.raises(ArgumentError):
        train_mlp(np.zeros((0, 2)), np.zeros(0, dtype=np.int64), TrainConfig(), 0)
