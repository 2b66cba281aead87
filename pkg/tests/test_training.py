import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from birdsdm.errors import DataError, NumericError
from birdsdm.nn import (Adam, CnnDescriptor, Dataset, ReduceLROnPlateau, Tensor, TrainConfig, build_cnn,
                        cross_entropy, cross_entropy_loss, load_checkpoint, loss_weights, predict, save_checkpoint,
                        train, weighted_loss, write_train_log)
from birdsdm.nn.gradcheck import numeric_gradient
from birdsdm.nn.losses import per_hotspot_cross_entropy


def naive_ce(pred, y):
    return np.mean([sum(-y[b, s] * math.log(pred[b, s]) - (1 - y[b, s]) * math.log(1 - pred[b, s])
                        for s in range(y.shape[1])) for b in range(y.shape[0])])


def test_cross_entropy_closed_form():
    loss, grad = cross_entropy(np.array([[0.5]]), np.array([[0.5]]))
    assert loss == pytest.approx(math.log(2), abs=1e-15)
    np.testing.assert_allclose(grad, 0.0, atol=1e-15)


def test_cross_entropy_matches_naive(rng):
    pred, y = rng.uniform(0.05, 0.95, (3, 4)), rng.uniform(size=(3, 4))
    loss, grad = cross_entropy(pred, y)
    assert loss == pytest.approx(naive_ce(pred, y), abs=1e-12)
    np.testing.assert_allclose(grad, (pred - y) / 3, atol=1e-12)


@given(st.integers(0, 2**31))
def test_cross_entropy_minimized_at_target(seed):
    r = np.random.default_rng(seed)
    y = r.uniform(0.01, 0.99, (2, 3))
    loss, grad = cross_entropy(y, y)
    np.testing.assert_allclose(grad, 0.0, atol=1e-12)
    assert loss <= cross_entropy(np.clip(y + 0.01, 0.001, 0.999), y)[0]


def test_loss_weights_examples():
    np.testing.assert_array_equal(loss_weights([1, 3], "identity"), [0.5, 1.5])
    per_h = Tensor(np.array([1.0, 1.0]))
    assert float(weighted_loss(per_h, [1, 3], "identity").data) == 1.0
    np.testing.assert_allclose(loss_weights([1, 3], "log"), np.log1p([1, 3]) / np.log1p([1, 3]).mean())
    with pytest.raises(DataError):
        loss_weights([0, 3], "sqrt")


@given(st.integers(1, 500), st.integers(1, 20), st.sampled_from(["identity", "log", "sqrt"]))
def test_equal_counts_give_unweighted_loss(n, batch, f):
    L = Tensor(np.random.default_rng(n).random(batch))
    assert float(weighted_loss(L, [n] * batch, f).data) == float(weighted_loss(L).data)


def test_weighted_gradient_scales_per_hotspot(rng):
    z0, y, n = rng.normal(size=(3, 4)), rng.uniform(size=(3, 4)), np.array([2, 5, 11])
    z = Tensor(z0.copy(), requires_grad=True)
    weighted_loss(per_hotspot_cross_entropy(z, y), n, "sqrt").backward()
    (num,) = numeric_gradient(lambda: float(weighted_loss(per_hotspot_cross_entropy(Tensor(z0), y), n, "sqrt").data),
                              [z0])
    np.testing.assert_allclose(z.grad, num, rtol=1e-6, atol=1e-9)
    w = loss_weights(n, "sqrt")
    sig = 1 / (1 + np.exp(-z0))
    np.testing.assert_allclose(z.grad, w[:, None] * (sig - y) / 3, atol=1e-12)


def test_adam_first_step_matches_formula():
    p = Tensor(np.array([1.0, -2.0]), requires_grad=True)
    p.grad = np.array([0.5, -0.1])
    Adam([p], lr=0.1).step()
    # bias-corrected first step moves each coordinate by lr * sign(g)
    np.testing.assert_allclose(p.data, [0.9, -1.9], atol=1e-7)


def test_plateau_halves_lr():
    p = Tensor(np.zeros(1), requires_grad=True)
    opt = Adam([p], lr=3e-4)
    sched = ReduceLROnPlateau(opt, 0.5, patience=2)
    assert not sched.step(1.0)
    assert not sched.step(1.0)
    assert sched.step(1.0)
    assert opt.lr == 1.5e-4
    for _ in range(100):
        sched.step(1.0)
    assert opt.lr == 1e-6


def tiny_data(seed=0, n=32, c=3, s=4):
    r = np.random.default_rng(seed)
    x = r.normal(size=(n, c, 6, 6))
    y = 1 / (1 + np.exp(-(x.mean(axis=(2, 3)) @ r.normal(size=(c, s)) * 3)))
    return Dataset(x, y, n_checklists=np.full(n, 9))


def tiny_model(seed=0, **kw):
    return build_cnn(CnnDescriptor(in_channels=3, n_species=4, conv_channels=(4,), **kw), seed)


def test_train_loss_decreases():
    model, hist = train(tiny_model(), tiny_data(), TrainConfig(batch_size=8, learning_rate=1e-2, epochs=5,
                                                               augment=False))
    losses = [h["train_loss"] for h in hist]
    assert all(b < a for a, b in zip(losses, losses[1:]))


def test_training_is_deterministic():
    cfg = TrainConfig(batch_size=8, learning_rate=1e-2, epochs=2, seed=4)
    a, _ = train(tiny_model(1, use_location=True, loc_width=4, loc_blocks=1), Dataset(**{**vars(tiny_data()),
                 "loc": np.zeros((32, 2))}), cfg)
    b, _ = train(tiny_model(1, use_location=True, loc_width=4, loc_blocks=1), Dataset(**{**vars(tiny_data()),
                 "loc": np.zeros((32, 2))}), cfg)
    for k in a.params:
        np.testing.assert_array_equal(a.params[k].data, b.params[k].data)


def test_predict_shape_range_and_batch_invariance(rng):
    m = tiny_model()
    x = rng.normal(size=(10, 3, 6, 6))
    p = predict(m, x, batch_size=3)
    assert p.shape == (10, 4) and np.all((p > 0) & (p < 1))
    np.testing.assert_array_equal(p, predict(m, x, batch_size=256))
    np.testing.assert_array_equal(p[4:7], predict(m, x[4:7]))


def test_nan_loss_raises():
    d = tiny_data()
    d.x[0, 0, 0, 0] = np.nan
    with pytest.raises(NumericError):
        train(tiny_model(), d, TrainConfig(epochs=1, augment=False))


def test_checkpoint_round_trip(tmp_path, rng):
    m = tiny_model(2, use_location=True, loc_width=3, loc_blocks=2)
    save_checkpoint(tmp_path / "m.sdmc", m)
    back = load_checkpoint(tmp_path / "m.sdmc")
    assert back.descriptor == m.descriptor
    for k in m.params:
        np.testing.assert_array_equal(back.params[k].data, m.params[k].data)
    raw = (tmp_path / "m.sdmc").read_bytes()
    (tmp_path / "bad.sdmc").write_bytes(raw[:-3])
    with pytest.raises(DataError):
        load_checkpoint(tmp_path / "bad.sdmc")


def test_train_log(tmp_path):
    write_train_log(tmp_path / "log.csv", [{"epoch": 1, "train_loss": 0.5, "val_loss": 0.25, "lr": 3e-4}])
    assert (tmp_path / "log.csv").read_text() == "epoch,train_loss,val_loss,lr\n1,0.5,0.25,0.0003\n"


def test_cross_entropy_loss_is_mean_of_rows(rng):
    z, y = rng.normal(size=(4, 3)), rng.uniform(size=(4, 3))
    rows = per_hotspot_cross_entropy(Tensor(z), y).data
    assert float(cross_entropy_loss(Tensor(z), y).data) == pytest.approx(rows.mean(), abs=1e-15)
