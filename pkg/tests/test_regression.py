import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coverlens import _backend, _kernels_py
from coverlens.dataset import TrainingExample, generate_synthetic, split
from coverlens.errors import DimensionError, ModelFileError
from coverlens.features import FeatureKind, FeatureVector
from coverlens.regression import (
    LinearModel,
    TrainConfig,
    evaluate,
    fit,
    fit_scaler,
    gradient,
    load_model,
    mse,
    predict,
    rmse,
    save_model,
)


def _examples(X, y):
    return [TrainingExample(FeatureVector("mfcc", x, f"p{i}", 1), float(t)) for i, (x, t) in enumerate(zip(X, y))]


def _model(w, b=0.0, means=None, stds=None):
    w = np.asarray(w, float)
    return LinearModel(w, b, np.zeros_like(w) if means is None else means,
                       np.ones_like(w) if stds is None else stds, FeatureKind.MFCC)


def _linear_data(rng, n=60, d=5, noise=0.0):
    X = rng.normal(size=(n, d)) * rng.uniform(0.5, 5, d) + rng.uniform(-3, 3, d)
    w = rng.normal(size=d)
    y = np.clip(50 + 5 * (X - X.mean(0)) / X.std(0) @ w / np.sqrt(d) + rng.normal(0, noise, n), 0, 100)
    return X, y


def test_predict_cases():
    assert predict(_model(np.zeros(3), 7.5), np.ones(3)) == 7.5
    assert predict(_model([1.0, 0.0]), np.array([2.5, -4.0])) == 2.5
    m = _model([0.3, -1.2], 4.0, means=np.array([1.0, 2.0]), stds=np.array([2.0, 0.5]))
    a, b = np.array([1.0, 5.0]), np.array([-3.0, 0.5])
    assert predict(m, (a + b) / 2) == pytest.approx((predict(m, a) + predict(m, b)) / 2)
    with pytest.raises(DimensionError):
        predict(m, np.ones(3))


def test_mse_cases():
    X = np.eye(3)
    m = _model([1.0, 2.0, 3.0])
    assert mse(m, _examples(X, [1.0, 2.0, 3.0])) == 0.0
    assert mse(_model(np.zeros(3)), _examples(X, [10.0] * 3)) == 100.0
    ex = _examples(X, [0.0, 5.0, 9.0])
    assert rmse(m, ex) == pytest.approx(np.sqrt(mse(m, ex)))


def test_evaluate_constant_model(rng):
    X, y = _linear_data(rng)
    ex = _examples(X, y)
    r = evaluate(_model(np.zeros(5), y.mean()), ex)
    assert r["rmse"] == pytest.approx(np.std(y)) and r["n"] == len(y)
    assert evaluate(_model(np.zeros(5), y.mean()), ex) == r


def _loss(Z, y, w, b, alpha):
    return np.mean((y - Z @ w - b) ** 2) + alpha * w @ w


def test_gradient_finite_differences(rng):
    h = 1e-6
    worst = 0.0
    for _ in range(20):
        X, y = _linear_data(rng, n=10, d=6, noise=3.0)
        means, stds, _ = fit_scaler(X)
        m = _model(rng.normal(size=6), rng.uniform(30, 70), means, stds)
        gw, gb = gradient(m, _examples(X, y), l2_alpha=0.01)
        Z = (X - means) / stds
        num = np.zeros(7)
        for j in range(6):
            e = np.zeros(6)
            e[j] = h
            num[j] = (_loss(Z, y, m.weights + e, m.bias, 0.01) - _loss(Z, y, m.weights - e, m.bias, 0.01)) / (2 * h)
        num[6] = (_loss(Z, y, m.weights, m.bias + h, 0.01) - _loss(Z, y, m.weights, m.bias - h, 0.01)) / (2 * h)
        ana = np.append(gw, gb)
        rel = np.abs(ana - num) / np.maximum(np.maximum(np.abs(ana), np.abs(num)), 1e-12)
        worst = max(worst, rel.max())
    assert worst < 1e-5


def test_gradient_zero_at_optimum(rng):
    X, y = _linear_data(rng, n=40, d=4, noise=5.0)
    means, stds, _ = fit_scaler(X)
    Z = (X - means) / stds
    A = np.column_stack([Z, np.ones(len(y))])
    coef = np.linalg.solve(A.T @ A, A.T @ y)
    gw, gb = gradient(_model(coef[:-1], coef[-1], means, stds), _examples(X, y), l2_alpha=0.0)
    assert np.sqrt(gw @ gw + gb * gb) < 1e-8


def test_gradient_zero_residuals():
    X = np.eye(3)
    gw, gb = gradient(_model([1.0, 2.0, 3.0]), _examples(X, [1.0, 2.0, 3.0]), l2_alpha=0.0)
    assert np.all(gw == 0) and gb == 0


def test_noiseless_mfcc_converges():
    ex, _ = generate_synthetic(40, FeatureKind.MFCC, seed=0, noise_sigma=0.0)
    train, val = split(ex, 0.2, seed=0)
    model, hist = fit(None, train, val, TrainConfig())
    assert len(hist) <= 100 and not hist.diverged
    assert rmse(model, val) < 0.5


def test_learning_rate_zero_is_flat(rng):
    X, y = _linear_data(rng)
    ex = _examples(X, y)
    model, hist = fit(None, ex[:48], ex[48:], TrainConfig(learning_rate=0.0, max_epochs=6, patience=10))
    assert np.all(model.weights == 0) and model.bias == pytest.approx(y[:48].mean())
    assert len(set(hist.train_mse)) == 1 and len(set(hist.val_mse)) == 1


def test_warm_start_not_worse(rng):
    X, y = _linear_data(rng, noise=1.0)
    ex = _examples(X, y)
    train, val = ex[:48], ex[48:]
    first, _ = fit(None, train, val, TrainConfig(max_epochs=20, patience=20))
    one = TrainConfig(max_epochs=1)
    _, cold = fit(None, train, val, one)
    warm_model, warm = fit(first, train, val, TrainConfig(max_epochs=1, warm_start=True))
    assert warm.val_mse[0] <= cold.val_mse[0]
    np.testing.assert_array_equal(warm_model.scaler_means, first.scaler_means)


def test_warm_start_dimension_mismatch(rng):
    X, y = _linear_data(rng)
    m, _ = fit(None, _examples(X, y), [], TrainConfig(max_epochs=2))
    with pytest.raises(DimensionError):
        fit(m, _examples(X[:, :3], y), [], TrainConfig(warm_start=True))


def test_full_batch_loss_non_increasing(rng):
    X, y = _linear_data(rng, noise=2.0)
    ex = _examples(X, y)
    cfg = TrainConfig(learning_rate=0.05, l2_alpha=0.0, batch_size=len(ex), max_epochs=40, patience=50)
    _, hist = fit(None, ex, [], cfg)
    assert np.all(np.diff(hist.train_mse) <= 1e-12)


def test_same_seed_identical_history(rng):
    X, y = _linear_data(rng, noise=2.0)
    ex = _examples(X, y)
    cfg = TrainConfig(max_epochs=15, patience=20, batch_size=4, seed=3)
    a_model, a = fit(None, ex[:48], ex[48:], cfg)
    b_model, b = fit(None, ex[:48], ex[48:], cfg)
    assert a.train_mse == b.train_mse and a.val_mse == b.val_mse
    assert a_model.weights.tobytes() == b_model.weights.tobytes()


def test_raw_scaling_invariance(rng):
    X, y = _linear_data(rng, noise=2.0)
    cfg = TrainConfig(max_epochs=10, patience=20)
    m1, _ = fit(None, _examples(X, y), [], cfg)
    m10, _ = fit(None, _examples(10 * X, y), [], cfg)
    np.testing.assert_allclose(predict(m1, X), predict(m10, 10 * X), rtol=0, atol=1e-8)


def test_constant_column_pinned(rng):
    X, y = _linear_data(rng)
    X[:, 2] = 4.0
    m, _ = fit(None, _examples(X, y), [], TrainConfig(max_epochs=5))
    assert m.pinned[2] and m.weights[2] == 0.0 and m.scaler_stds[2] == 1.0


def test_divergence_flag(rng):
    X, y = _linear_data(rng)
    X *= np.array([1e150, 1, 1, 1, 1])
    X[:, 0] += rng.normal(size=len(y)) * 1e150
    ex = _examples(X, y)
    model, hist = fit(None, ex[:48], ex[48:], TrainConfig(learning_rate=1e3, max_epochs=50))
    assert hist.diverged
    assert np.all(np.isfinite(model.weights))


def test_early_stopping_returns_best(rng):
    X, y = _linear_data(rng, noise=8.0)
    ex = _examples(X, y)
    model, hist = fit(None, ex[:40], ex[40:], TrainConfig(learning_rate=0.02, patience=3))
    assert hist.best_epoch >= 1
    assert mse(model, ex[40:]) == pytest.approx(hist.val_mse[hist.best_epoch - 1])
    assert mse(model, ex[40:]) == pytest.approx(min(hist.val_mse))


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=-1)
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)


def test_model_json_roundtrip(tmp_path, rng):
    X, y = _linear_data(rng)
    m, hist = fit(None, _examples(X, y)[:50], _examples(X, y)[50:], TrainConfig(max_epochs=3, patience=5))
    save_model(m, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    np.testing.assert_array_equal(back.weights, m.weights)
    np.testing.assert_array_equal(back.scaler_stds, m.scaler_stds)
    assert back.bias == m.bias and back.kind is m.kind
    assert back.train_config == m.train_config
    assert back.history.val_mse == hist.val_mse
    np.testing.assert_array_equal(predict(back, X), predict(m, X))


def test_model_file_errors(tmp_path):
    (tmp_path / "a.json").write_text("{not json")
    (tmp_path / "b.json").write_text(json.dumps({"format": "other"}))
    (tmp_path / "c.json").write_text(json.dumps({"format": "coverlens_model_v1", "kind": "mfcc"}))
    for name in ("a.json", "b.json", "c.json", "missing.json"):
        with pytest.raises(ModelFileError):
            load_model(tmp_path / name)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(1, 30), d=st.integers(1, 8), batch=st.integers(1, 12), seed=st.integers(0, 1000))
def test_sgd_kernels_agree(n, d, batch, seed):
    if _backend.compiled is None:
        pytest.skip("compiled kernels not built")
    r = np.random.default_rng(seed)
    Z = np.ascontiguousarray(r.normal(size=(n, d)))
    y = r.uniform(0, 100, n)
    order = r.permutation(n).astype(np.intp)
    active = (r.uniform(size=d) > 0.2).astype(np.uint8)
    t1, t2 = np.zeros(d), np.zeros(d)
    b1 = _kernels_py.sgd_epoch(Z, y, order, t1, 50.0, 0.01, 1e-4, batch, active)
    b2 = _backend.compiled.sgd_epoch(Z, y, order, t2, 50.0, 0.01, 1e-4, batch, active)
    np.testing.assert_allclose(t1, t2, rtol=1e-12, atol=1e-12)
    assert b1 == pytest.approx(b2, rel=1e-12)
    assert np.all(t1[active == 0] == 0)
