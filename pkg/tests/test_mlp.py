import numpy as np
import pytest

from fairpm.mlp import (MlpModel, TrainConfig, fine_tune, gradients, init_weights,
                        load_model, loss, predict, predict_index, predict_proba,
                        save_model, train)


def separable_data(rng, n=100):
    """Two Gaussian blobs separated by a wide margin along a random direction."""
    w = rng.normal(size=4)
    w /= np.linalg.norm(w)
    X = rng.normal(size=(n, 4))
    side = rng.integers(0, 2, size=n)
    X += np.outer(3.0 * (2 * side - 1), w)
    Y = np.zeros((n, 2))
    Y[np.arange(n), side] = 1.0
    return X, Y, side


def test_separable_toy_reaches_high_accuracy(rng):
    X, Y, side = separable_data(rng)
    # independent oracle: a closed-form least-squares linear classifier
    # already separates this data perfectly, so the MLP must get >= 0.99
    A = np.hstack([X, np.ones((len(X), 1))])
    beta, *_ = np.linalg.lstsq(A, 2.0 * side - 1.0, rcond=None)
    assert np.mean((A @ beta > 0) == (side == 1)) == 1.0

    model = train((X, Y), TrainConfig(epochs=10), seed=0)
    acc = np.mean(predict_index(model, X) == side)
    assert acc >= 0.99


def test_memorizing_single_example_loss_non_increasing():
    X = np.tile([[0.2, 0.8, 0.1]], (8, 1))
    Y = np.tile([[0.0, 1.0]], (8, 1))
    model = train((X, Y), TrainConfig(epochs=10), seed=1, hidden_sizes=(8,))
    diffs = np.diff(model.loss_history)
    assert np.all(diffs <= 1e-9)


def test_loss_decreases_on_memorizable_set(rng):
    X = rng.normal(size=(10, 6))
    Y = np.zeros((10, 3))
    Y[np.arange(10), rng.integers(0, 3, 10)] = 1.0
    model = train((X, Y), TrainConfig(epochs=10), seed=2, hidden_sizes=(32, 16))
    assert model.loss_history[-1] < model.loss_history[0]


def test_softmax_outputs_normalized(rng):
    model = train((rng.normal(size=(30, 5)), np.eye(4)[rng.integers(0, 4, 30)]),
                  TrainConfig(epochs=2), seed=3, hidden_sizes=(8,))
    probs = predict_proba(model, rng.normal(size=(200, 5)) * 50)
    assert np.all(probs >= 0)
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-6)


def test_zero_weight_model_is_uniform():
    weights = tuple((np.zeros_like(W), np.zeros_like(b))
                    for W, b in init_weights(6, 4, seed=0, hidden_sizes=(8,)))
    model = MlpModel(weights=weights, seed=0, config=TrainConfig(),
                     hidden_sizes=(8,))
    probs = predict_proba(model, np.ones(6))
    assert np.allclose(probs, 0.25, atol=1e-12)


def test_exact_tie_breaks_to_lowest_index():
    weights = tuple((np.zeros_like(W), np.zeros_like(b))
                    for W, b in init_weights(3, 2, seed=0, hidden_sizes=(4,)))
    model = MlpModel(weights=weights, seed=0, config=TrainConfig(),
                     hidden_sizes=(4,))
    assert predict_index(model, np.ones(3)) == 0


def test_gradients_match_finite_differences(rng):
    # 5-unit micro-network, central differences at 1e-6
    weights = init_weights(3, 2, seed=4, hidden_sizes=(5,))
    X = rng.normal(size=(7, 3))
    Y = np.eye(2)[rng.integers(0, 2, 7)]
    grads = gradients(weights, X, Y)
    eps = 1e-6
    for layer in range(len(weights)):
        for part in (0, 1):
            arr = weights[layer][part]
            g = grads[layer][part]
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                orig = arr[idx]
                arr[idx] = orig + eps
                up = loss(weights, X, Y)
                arr[idx] = orig - eps
                down = loss(weights, X, Y)
                arr[idx] = orig
                numeric = (up - down) / (2 * eps)
                denom = max(abs(numeric), abs(g[idx]), 1e-8)
                assert abs(numeric - g[idx]) / denom <= 1e-4


def test_predict_agrees_with_argmax(rng, cs_model):
    X = rng.uniform(size=(1000, cs_model.input_width))
    probs = predict_proba(cs_model, X)
    assert np.array_equal(predict_index(cs_model, X), probs.argmax(axis=1))
    labels = predict(cs_model, X[:5])
    assert labels == [cs_model.schema.prediction_alphabet[i]
                      for i in probs[:5].argmax(axis=1)]


def test_training_is_bit_deterministic(rng):
    X = rng.normal(size=(64, 7))
    Y = np.eye(3)[rng.integers(0, 3, 64)]
    a = train((X, Y), TrainConfig(epochs=3), seed=9, hidden_sizes=(16, 8))
    b = train((X, Y), TrainConfig(epochs=3), seed=9, hidden_sizes=(16, 8))
    for (Wa, ba), (Wb, bb) in zip(a.weights, b.weights):
        assert np.array_equal(Wa, Wb) and np.array_equal(ba, bb)


def test_fine_tune_preserves_original(rng):
    X = rng.normal(size=(40, 5))
    Y = np.eye(2)[rng.integers(0, 2, 40)]
    model = train((X, Y), TrainConfig(epochs=2), seed=5, hidden_sizes=(8,))
    snapshot = [(W.copy(), b.copy()) for W, b in model.weights]
    tuned = fine_tune(model, (X, Y), TrainConfig(epochs=2))
    for (W0, b0), (W1, _) in zip(snapshot, model.weights):
        assert np.array_equal(W0, W1)
    assert any(not np.array_equal(W0, W2)
               for (W0, _), (W2, _) in zip(snapshot, tuned.weights))


def test_self_distillation_is_stable(cs_model, cs_encoded, cs_prefixes,
                                     cs_schema):
    X, _ = cs_encoded
    own = predict_index(cs_model, X)
    Y_own = np.zeros((len(own), cs_model.n_classes))
    Y_own[np.arange(len(own)), own] = 1.0
    tuned = fine_tune(cs_model, (X, Y_own), TrainConfig(epochs=3))
    targets = np.array([p.target_activity for p in cs_prefixes])
    before = np.mean(np.array(predict(cs_model, X)) == targets)
    after = np.mean(np.array(predict(tuned, X)) == targets)
    assert abs(after - before) < 0.01


def test_dimension_mismatches_rejected(cs_model, rng):
    with pytest.raises(ValueError):
        predict_proba(cs_model, np.ones(cs_model.input_width + 1))
    with pytest.raises(ValueError):
        fine_tune(cs_model, (rng.normal(size=(4, 3)), np.eye(4)[:4]),
                  TrainConfig(epochs=1))
    with pytest.raises(ValueError):
        train((np.zeros((0, 3)), np.zeros((0, 2))), TrainConfig(epochs=1))


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0.0)


def test_checkpoint_round_trip(tmp_path, cs_model, rng):
    path = tmp_path / "model.json"
    save_model(cs_model, path)
    again = load_model(path)
    assert again.seed == cs_model.seed
    assert again.hidden_sizes == cs_model.hidden_sizes
    for (Wa, ba), (Wb, bb) in zip(cs_model.weights, again.weights):
        assert np.array_equal(Wa, Wb) and np.array_equal(ba, bb)
    X = rng.uniform(size=(20, cs_model.input_width))
    assert np.array_equal(predict_index(cs_model, X), predict_index(again, X))
    assert again.schema == cs_model.schema
