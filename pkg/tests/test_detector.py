import numpy as np
import pytest

from oracles import triangle_band_for

from airgap.audio import AudioBuffer
from airgap.detector import (
    LOG_FLOOR,
    DetectorModel,
    FeatureConfig,
    TrainConfig,
    extract_features,
    logistic_loss_grad,
    score,
    train,
)
from airgap.errors import DomainError
from airgap.metrics import ScoreRecord, accuracy_at_threshold, eer_from_scores
from airgap.synthetic import make_item


def _separable(seed=0, n=100, dim=6):
    rng = np.random.default_rng(seed)
    direction = rng.normal(size=dim)
    X = rng.normal(size=(n, dim))
    margin = X @ direction
    keep = np.abs(margin) > 0.3
    X, margin = X[keep], margin[keep]
    return X, (margin > 0).astype(int)


def test_silence_features():
    feats = extract_features(AudioBuffer(np.zeros(16000), 16000))
    assert feats.shape == (80,)
    # equal up to the rounding of a 61-frame mean
    np.testing.assert_allclose(feats[:40], LOG_FLOOR, rtol=1e-14, atol=0)
    assert np.all(np.abs(feats[40:]) < 1e-12)


@pytest.mark.parametrize("freq", [1000.0, 300.0, 3000.0, 6500.0])
def test_tone_peaks_in_matching_band(freq):
    t = np.arange(16000) / 16000
    feats = extract_features(AudioBuffer(0.5 * np.sin(2 * np.pi * freq * t), 16000))
    assert int(np.argmax(feats[:40])) == triangle_band_for(freq, 40, 8000.0)


def test_features_deterministic():
    x = make_item("spoof", 2, 3)
    assert np.array_equal(extract_features(x), extract_features(x))


def test_feature_errors():
    with pytest.raises(DomainError):
        extract_features(AudioBuffer(np.zeros(100), 16000))
    with pytest.raises(ValueError):
        extract_features(AudioBuffer(np.zeros(16000), 8000))


def test_separable_training_accuracy():
    X, y = _separable()
    model = train(X, y)
    p = score(model, X)
    records = [ScoreRecord(str(i), s, "spoof" if lab else "bona fide") for i, (s, lab) in enumerate(zip(p, y))]
    assert accuracy_at_threshold(records, 0.5) == 1.0


def test_zero_learning_rate_keeps_zero_weights():
    X, y = _separable(1)
    model = train(X, y, TrainConfig(learning_rate=0.0, epochs=50))
    assert not model.weights.any() and model.bias == 0.0
    assert np.all(score(model, X) == 0.5)


def test_zero_model_scores_half_and_bias_is_monotone():
    dim = 4
    zero = DetectorModel(np.zeros(dim), 0.0, np.zeros(dim), np.ones(dim))
    assert score(zero, np.ones(dim)) == 0.5
    prev = 0.5
    for b in [1, 5, 10, 20, 40]:
        s = score(DetectorModel(np.zeros(dim), float(b), np.zeros(dim), np.ones(dim)), np.ones(dim))
        assert prev < s <= 1.0
        prev = s
    assert prev == pytest.approx(1.0, abs=1e-15)


def test_gradient_matches_central_differences():
    rng = np.random.default_rng(20)
    X = rng.normal(size=(50, 8))
    y = (rng.random(50) > 0.5).astype(float)
    h = 1e-6
    worst = 0.0
    for _ in range(20):
        w = rng.normal(size=8)
        b = float(rng.normal())
        _, gw, gb = logistic_loss_grad(w, b, X, y)
        numeric = np.empty(9)
        for k in range(8):
            e = np.zeros(8)
            e[k] = h
            numeric[k] = (logistic_loss_grad(w + e, b, X, y)[0] - logistic_loss_grad(w - e, b, X, y)[0]) / (2 * h)
        numeric[8] = (logistic_loss_grad(w, b + h, X, y)[0] - logistic_loss_grad(w, b - h, X, y)[0]) / (2 * h)
        analytic = np.append(gw, gb)
        rel = np.abs(analytic - numeric) / np.maximum(np.abs(analytic) + np.abs(numeric), 1e-8)
        worst = max(worst, float(rel.max()))
    assert worst < 1e-4


def test_small_step_loss_is_non_increasing():
    X, y = _separable(2)
    model = train(X, y, TrainConfig(learning_rate=1e-3, epochs=100, tol=-np.inf))
    hist = np.array(model.loss_history)
    assert len(hist) == 100
    assert np.all(np.diff(hist) <= 0)


def test_training_is_deterministic():
    X, y = _separable(3)
    a, b = train(X, y), train(X, y)
    assert np.array_equal(a.weights, b.weights) and a.bias == b.bias


def test_training_input_checks():
    X, y = _separable(4)
    with pytest.raises(ValueError):
        train(X, y[:-1])
    with pytest.raises(DomainError):
        train(X, np.ones(len(y)))


def test_dimension_mismatch():
    X, y = _separable(5)
    model = train(X, y)
    with pytest.raises(ValueError):
        score(model, np.zeros(X.shape[1] + 1))


def test_model_json_round_trip(tmp_path):
    X, y = _separable(6)
    model = train(X, y, feature_config=FeatureConfig(n_bands=3))
    p = tmp_path / "m.json"
    model.save(p)
    back = DetectorModel.load(p)
    assert back.feature_config == model.feature_config
    assert np.array_equal(score(back, X), score(model, X))


def test_positive_rescale_keeps_eer():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(200, 5))
    y = (X[:, 0] + 0.8 * rng.normal(size=200) > 0).astype(int)
    model = train(X, y)
    scaled = DetectorModel(3.0 * model.weights, 3.0 * model.bias, model.means, model.stds)
    p, q = score(model, X), score(scaled, X)
    e1 = eer_from_scores(p[y == 1], p[y == 0]).eer
    e2 = eer_from_scores(q[y == 1], q[y == 0]).eer
    assert e1 == pytest.approx(e2, abs=1e-12)
