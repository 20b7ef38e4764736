import math

import numpy as np
import pytest

from qnoise.circuit import random_circuit
from qnoise.errors import InvalidArgument, InvalidState, NumericError, ParseError
from qnoise.features import grid_batch
from qnoise.learners import (ALGORITHMS, AdamState, ConvNet, DenseNet, GbdtConfig, HistGBDT, LinearRegression,
                             NewtonGBDT, adam_step, evaluate, gbdt_fit, gradient_check, linreg_fit,
                             load_model, lr_schedule, mae, make_model, rmse)
from qnoise.learners.nn import conv3x3, maxpool2


def grids(n, seed=0):
    return grid_batch([random_circuit(4 + i % 5, 2 + (7 * i) % 40, seed * 1000 + i) for i in range(n)])


# --- linear regression -------------------------------------------------------

def test_linreg_exact_line():
    x = np.arange(10.0).reshape(-1, 1)
    m = linreg_fit(x, 3 * x[:, 0] + 1)
    assert abs(m.weights[0] - 3) < 1e-8 and abs(m.intercept - 1) < 1e-8


def test_linreg_constant():
    X = np.random.default_rng(0).normal(size=(30, 3))
    m = linreg_fit(X, np.full(30, 0.25))
    assert np.max(np.abs(m.weights)) < 1e-8 and abs(m.intercept - 0.25) < 1e-8


@pytest.mark.parametrize("seed", range(5))
def test_linreg_matches_pseudo_inverse(seed):
    rng = np.random.default_rng(seed)
    X, y = rng.normal(size=(50, 5)), rng.normal(size=50)
    A = np.hstack([X, np.ones((50, 1))])
    want = A @ (np.linalg.pinv(A) @ y)
    assert np.max(np.abs(linreg_fit(X, y).predict(X) - want)) < 1e-6


def test_fit_input_errors():
    with pytest.raises(InvalidArgument):
        linreg_fit(np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(InvalidArgument):
        linreg_fit(np.zeros((3, 2)), np.array([1.0, np.nan, 0.0]))
    with pytest.raises(InvalidArgument):
        linreg_fit(np.zeros((3, 2)), np.zeros(4))
    with pytest.raises(InvalidState):
        LinearRegression().predict(np.zeros((1, 2)))


# --- gradient boosting ---------------------------------------------------------

def brute_force_root(X, y, min_leaf, lam):
    """Best (gain, feature, threshold) over every midpoint between distinct values."""
    r = np.mean(y) - y  # gradient of squared error at the base prediction
    G, n = r.sum(), len(y)
    best = None
    for j in range(X.shape[1]):
        u = np.unique(X[:, j])
        for t in (u[:-1] + u[1:]) / 2:
            left = X[:, j] <= t
            nl = int(left.sum())
            if nl < min_leaf or n - nl < min_leaf:
                continue
            gl = r[left].sum()
            gain = gl ** 2 / (nl + lam) + (G - gl) ** 2 / (n - nl + lam) - G ** 2 / (n + lam)
            if gain > 0 and (best is None or gain > best[0] + 1e-12):
                best = (gain, j, t)
    return best


@pytest.mark.parametrize("mode", ["hist-first-order", "newton"])
def test_root_split_matches_brute_force(mode):
    for seed in range(20):
        rng = np.random.default_rng(seed)
        n, d = int(rng.integers(60, 201)), int(rng.integers(1, 6))
        X = rng.normal(size=(n, d)).round(2)
        y = X[:, 0] * rng.normal() + np.sin(X[:, -1]) + 0.1 * rng.normal(size=n)
        model = gbdt_fit(X, y, GbdtConfig(mode=mode, iterations=1), seed=seed)
        tree = model.trees[0]
        want = brute_force_root(X, y, 20, model.config.l2_reg)
        assert (int(tree.feature[0]), float(tree.threshold[0])) == (want[1], pytest.approx(want[2], abs=1e-12))


def test_zero_iterations_predict_mean():
    rng = np.random.default_rng(1)
    X, y = rng.normal(size=(80, 3)), rng.random(80)
    for mode in ("hist-first-order", "newton"):
        p = gbdt_fit(X, y, GbdtConfig(mode=mode, iterations=0)).predict(rng.normal(size=(7, 3)))
        assert np.max(np.abs(p - y.mean())) < 1e-12


def test_step_function_single_stump():
    x = np.concatenate([np.linspace(-2, -0.1, 20), np.linspace(0, 2, 20)]).reshape(-1, 1)
    y = (x[:, 0] >= 0).astype(float)
    m = gbdt_fit(x, y, GbdtConfig(iterations=1, max_leaves=2, learning_rate=1.0))
    assert np.max(np.abs(m.predict(x) - y)) < 1e-12


def test_newton_leaf_values_shrink_with_l2():
    x = np.concatenate([np.zeros(20), np.ones(20)]).reshape(-1, 1)
    y = x[:, 0].copy()
    m = gbdt_fit(x, y, GbdtConfig(mode="newton", iterations=1, learning_rate=1.0, l2_reg=1.0, max_depth=1))
    # leaf value = -G/(H+lam) with residuals of +-0.5 on 20 rows
    assert m.predict(np.array([[1.0]]))[0] == pytest.approx(0.5 + 10 / 21, abs=1e-12)


def test_training_loss_non_increasing():
    rng = np.random.default_rng(3)
    X = rng.integers(0, 20, size=(500, 6)).astype(float)
    y = 0.01 * X[:, 0] + 0.002 * X[:, 1] * X[:, 2] + 0.01 * rng.random(500)
    for cls in (HistGBDT, NewtonGBDT):
        loss = cls(iterations=30).fit(X, y).train_loss
        assert all(b <= a + 1e-15 for a, b in zip(loss, loss[1:]))
        assert loss[-1] < 0.2 * loss[0]


def test_gbdt_config_validation():
    with pytest.raises(InvalidArgument):
        GbdtConfig(mode="xgb")
    with pytest.raises(InvalidArgument):
        GbdtConfig(max_bins=1)
    c = GbdtConfig(mode="newton")
    assert (c.learning_rate, c.l2_reg, c.max_depth) == (0.3, 1.0, 6)
    c = GbdtConfig()
    assert (c.learning_rate, c.l2_reg, c.max_leaves) == (0.1, 0.0, 31)


# --- neural networks -----------------------------------------------------------

def test_parameter_counts():
    dense = 1530 * 80 + 80 + 80 * 40 + 40 + 40 * 1 + 1 + 10 * 3
    assert DenseNet().parameter_count() == dense == 125_791
    cnn = (3 * 16 * 9 + 16) + (16 * 16 * 9 + 16) + 2000 * 80 + 80 + 80 * 40 + 40 + 40 + 1 + 10 * 3
    assert ConvNet().parameter_count() == cnn == 166_159


def test_init_ranges():
    m = DenseNet()
    m.init_params(5)
    emb = m.params["embedding"]
    assert not emb[0].any() and np.abs(emb[1:]).max() <= 0.05
    w = m.params["dense0.w"]
    assert np.abs(w).max() <= math.sqrt(6 / (1530 + 80))
    assert not m.params["dense0.b"].any()


def test_conv_and_pool_kernels_against_loops():
    rng = np.random.default_rng(0)
    x, w, b = rng.normal(size=(2, 3, 5, 4)), rng.normal(size=(4, 3, 3, 3)), rng.normal(size=4)
    out = conv3x3(x, w, b)[0] if isinstance(conv3x3(x, w, b), tuple) else conv3x3(x, w, b)
    pad = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    want = np.zeros((2, 4, 5, 4))
    for n in range(2):
        for o in range(4):
            for i in range(5):
                for j in range(4):
                    want[n, o, i, j] = np.sum(pad[n, :, i:i + 3, j:j + 3] * w[o]) + b[o]
    assert np.allclose(out, want, atol=1e-12)
    pooled = maxpool2(x)
    pooled = pooled[0] if isinstance(pooled, tuple) else pooled
    assert pooled.shape == (2, 3, 2, 2)
    assert pooled[1, 2, 1, 0] == x[1, 2, 2:4, 0:2].max()


@pytest.mark.parametrize("cls,batch", [(DenseNet, 8), (ConvNet, 4)])
def test_gradient_check_at_init_and_after_training_steps(cls, batch):
    X = grids(batch, seed=1)
    y = np.linspace(0.05, 0.3, batch)
    m = cls()
    m.init_params(2)
    assert gradient_check(m, X, y) < 1e-4
    state = AdamState()
    for _ in range(5):
        _, g, _ = m.loss_and_grads(X, y)
        adam_step(m.params, g, state, 1e-3)
    assert gradient_check(m, X, y, seed=1) < 1e-4


@pytest.mark.parametrize("cls", [DenseNet, ConvNet])
def test_padding_row_gets_no_gradient(cls):
    m = cls()
    m.init_params(0)
    X = np.zeros((3, 51, 10), dtype=np.int64)
    _, g, _ = m.loss_and_grads(X, np.ones(3))
    assert not g["embedding"].any()
    X = grids(3)
    _, g, _ = m.loss_and_grads(X, np.ones(3))
    assert not g["embedding"][0].any() and g["embedding"][1:].any()


def test_first_adam_step_descends():
    X, y = grids(16, seed=3), np.full(16, 0.2)
    m = DenseNet()
    m.init_params(4)
    before, g, _ = m.loss_and_grads(X, y)
    adam_step(m.params, g, AdamState(), 1e-3)
    assert m.loss(X, y) < before


@pytest.fixture(scope="module")
def constant_fit():
    X, c = grids(200, seed=5), 0.3
    m = DenseNet().fit(X, np.full(200, c), seed=1)
    return m, m.predict(X) - c


def test_constant_fit_on_average(constant_fit):
    m, err = constant_fit
    assert np.mean(np.abs(err)) < 0.05
    assert m.loss_history[-1] < 0.01 * m.loss_history[0]


@pytest.mark.xfail(strict=True, reason="lr halves to ~1e-6 by epoch 50; a few grids keep residuals near 0.065")
def test_constant_fit_every_prediction(constant_fit):
    _, err = constant_fit
    assert np.max(np.abs(err)) < 0.05


def test_grid_shape_checked():
    m = DenseNet(epochs=1)
    with pytest.raises(InvalidArgument):
        m.fit(np.zeros((2, 50, 10)), np.zeros(2))
    with pytest.raises(InvalidArgument):
        m.fit(np.full((2, 51, 10), 11), np.zeros(2))


# --- optimiser and schedule ------------------------------------------------------

def test_lr_schedule():
    assert lr_schedule(0) == 1e-3
    assert lr_schedule(4) == 1e-3
    assert lr_schedule(5) == 5e-4
    assert lr_schedule(49) == 1e-3 / 512
    assert lr_schedule(50) == lr_schedule(60) == lr_schedule(99) == 1e-3 / 1024


def test_adam_first_step():
    p = {"w": np.array([0.0])}
    adam_step(p, {"w": np.array([10.0])}, AdamState(), 1e-3)
    assert p["w"][0] == pytest.approx(-1e-3 * 10 / (10 + 1e-8), rel=1e-15)
    assert p["w"][0] == pytest.approx(-9.99999999e-4, abs=1e-15)


def test_adam_zero_and_symmetric_gradients():
    p = {"a": np.array([1.0, 2.0]), "b": np.array([0.0, 0.0])}
    s = AdamState()
    for _ in range(5):
        adam_step(p, {"a": np.zeros(2), "b": np.array([3.0, -3.0])}, s, 1e-2)
    assert p["a"].tolist() == [1.0, 2.0]
    assert p["b"][0] == -p["b"][1] and p["b"][0] < 0


def test_adam_rejects_non_finite():
    with pytest.raises(NumericError):
        adam_step({"w": np.zeros(1)}, {"w": np.array([np.inf])}, AdamState(), 1e-3)


# --- metrics and persistence ---------------------------------------------------------

def test_metric_examples():
    assert mae([1, 2, 3], [1, 2, 3]) == 0.0
    assert mae([0, 0], [1, -3]) == 2.0
    assert rmse([0, 0], [3, 4]) == pytest.approx(math.sqrt(12.5), abs=1e-15)
    with pytest.raises(InvalidArgument):
        mae([], [])
    with pytest.raises(InvalidArgument):
        rmse([1], [1, 2])


def test_evaluate_constant_mean_model():
    rng = np.random.default_rng(0)
    y = rng.random(100)
    X = np.zeros((100, 1))
    m = linreg_fit(X, y)
    ticks = iter([1.0, 1.5])
    rep = evaluate(m, X, y, timer=lambda: next(ticks), preset="preset-a", split_fraction=0.8, ablation="none")
    assert rep.rmse == pytest.approx(np.std(y), abs=1e-9)
    assert rep.predict_seconds == 0.5
    assert list(rep.row()) == ["algorithm", "preset", "split_fraction", "ablation", "mae", "rmse", "fit_seconds",
                               "predict_seconds"]
    with pytest.raises(InvalidState):
        evaluate(LinearRegression(), X, y)


def fitted_models():
    rng = np.random.default_rng(7)
    X, y = rng.integers(0, 10, size=(120, 10)).astype(float), rng.random(120)
    G, gy = grids(12), rng.random(12)
    return [(linreg_fit(X, y), X), (HistGBDT(iterations=5).fit(X, y), X), (NewtonGBDT(iterations=5).fit(X, y), X),
            (DenseNet(epochs=1).fit(G, gy), G), (ConvNet(epochs=1, batch_size=4).fit(G, gy), G)]


def test_save_load_round_trip_is_bit_identical(tmp_path):
    models = fitted_models()
    assert sorted(m.algorithm for m, _ in models) == sorted(ALGORITHMS)
    for model, X in models:
        path = tmp_path / f"{model.algorithm}.json"
        model.save(path)
        back = load_model(path)
        assert type(back) is type(model)
        assert np.array_equal(back.predict(X), model.predict(X))
        assert back.parameter_count() == model.parameter_count()
        back.save(tmp_path / "again.json")
        assert (tmp_path / "again.json").read_bytes() == path.read_bytes()


def test_load_rejects_bad_files(tmp_path):
    (tmp_path / "a.json").write_text('{"format": "other"}')
    with pytest.raises(ParseError):
        load_model(tmp_path / "a.json")
    (tmp_path / "b.json").write_text('{"format": "qnoise-model", "version": 99}')
    with pytest.raises(ParseError, match="version"):
        load_model(tmp_path / "b.json")
    with pytest.raises(InvalidState):
        LinearRegression().save(tmp_path / "c.json")


def test_training_is_deterministic():
    G, y = grids(10), np.linspace(0, 0.2, 10)
    a = DenseNet(epochs=2, batch_size=4).fit(G, y, seed=3).predict(G)
    b = DenseNet(epochs=2, batch_size=4).fit(G, y, seed=3).predict(G)
    assert np.array_equal(a, b)
    X = np.random.default_rng(0).random((100, 4))
    assert np.array_equal(HistGBDT(iterations=3).fit(X, X[:, 0]).predict(X),
                          HistGBDT(iterations=3).fit(X, X[:, 0]).predict(X))


def test_make_model():
    assert isinstance(make_model("newton-gbdt", {"iterations": 3}), NewtonGBDT)
    with pytest.raises(InvalidArgument, match="linreg"):
        make_model("xgboost")
