import numpy as np
import pytest

from autodiff import ops
from autodiff.checkpoint import (
    check_against,
    load_checkpoint,
    load_training_state,
    save_checkpoint,
    save_training_state,
)
from autodiff.checks import LAYER_CHECKS, check_dense
from autodiff.gradcheck import gradient_check, relative_error
from autodiff.optim import SGD, Adam, OptimizerConfig, OptimizerKind, build_optimizer
from autodiff.params import ParamSet
from autodiff.tensor import Tensor, default_dtype, no_grad, precision
from core.exceptions import AutodiffStateError, CheckpointError, ConfigurationError, ShapeError


@pytest.fixture
def f64():
    with precision("float64"):
        yield


def naive_conv(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Same-size cross-correlation with explicit loops."""
    batch, channels, height, width = x.shape
    out_channels, _, k, _ = kernel.shape
    pad = k // 2
    padded = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    out = np.zeros((batch, out_channels, height, width))
    for b in range(batch):
        for o in range(out_channels):
            for y in range(height):
                for x_ in range(width):
                    out[b, o, y, x_] = np.sum(padded[b, :, y:y + k, x_:x_ + k] * kernel[o])
    return out


def test_default_dtype_follows_settings(settings) -> None:
    settings.MEMNAV_FLOAT_DTYPE = "float64"
    assert default_dtype() == np.float64
    settings.MEMNAV_FLOAT_DTYPE = "float32"
    assert Tensor([1.0]).data.dtype == np.float32
    with precision("float64"):
        assert Tensor([1.0]).data.dtype == np.float64


def test_precision_rejects_other_dtypes() -> None:
    with pytest.raises(ConfigurationError):
        with precision("float16"):
            pass


def test_conv2d_matches_loops(f64, rng: np.random.Generator) -> None:
    x = rng.normal(size=(2, 3, 5, 4))
    kernel = rng.normal(size=(4, 3, 3, 3))
    bias = rng.normal(size=4)
    out = ops.conv2d(Tensor(x), Tensor(kernel), Tensor(bias))
    expected = naive_conv(x, kernel) + bias[None, :, None, None]
    np.testing.assert_allclose(out.data, expected, atol=1e-12)


def test_conv2d_unbatched_and_shape_errors(f64, rng: np.random.Generator) -> None:
    x = rng.normal(size=(1, 4, 4))
    kernel = rng.normal(size=(2, 1, 3, 3))
    out = ops.conv2d(Tensor(x), Tensor(kernel))
    assert out.shape == (2, 4, 4)
    np.testing.assert_allclose(out.data, naive_conv(x[None], kernel)[0], atol=1e-12)
    with pytest.raises(ShapeError):
        ops.conv2d(Tensor(rng.normal(size=(1, 2, 4, 4))), Tensor(kernel))
    with pytest.raises(ConfigurationError):
        ops.conv2d(Tensor(x), Tensor(rng.normal(size=(2, 1, 2, 2))))


def test_dense_matches_matmul(f64, rng: np.random.Generator) -> None:
    x = rng.normal(size=(3, 5))
    weight = rng.normal(size=(2, 5))
    bias = rng.normal(size=2)
    out = ops.dense(Tensor(x), Tensor(weight), Tensor(bias))
    expected = np.array([[sum(x[i, k] * weight[j, k] for k in range(5)) + bias[j] for j in range(2)] for i in range(3)])
    np.testing.assert_allclose(out.data, expected, atol=1e-12)
    with pytest.raises(ShapeError):
        ops.dense(Tensor(rng.normal(size=(3, 4))), Tensor(weight))


def test_channel_max_and_its_gradient(f64) -> None:
    x = Tensor(np.array([[[1.0, 5.0]], [[3.0, 5.0]], [[2.0, 0.0]]]), requires_grad=True)
    value, argmax = ops.channel_max(x)
    assert value.data.tolist() == [[3.0, 5.0]]
    assert argmax.tolist() == [[1, 0]]
    total = ops.dense(ops.reshape(value, (2,)), Tensor(np.ones((1, 2))))
    ops.reshape(total, ()).backward()
    assert x.grad[:, 0, 0].tolist() == [0.0, 1.0, 0.0]
    assert x.grad[:, 0, 1].tolist() == [1.0, 0.0, 0.0]


def test_max_pool_matches_loops(f64, rng: np.random.Generator) -> None:
    x = rng.normal(size=(1, 2, 4, 6))
    out = ops.max_pool2d(Tensor(x))
    assert out.shape == (1, 2, 2, 3)
    for c in range(2):
        for y in range(2):
            for x_ in range(3):
                assert out.data[0, c, y, x_] == x[0, c, 2 * y:2 * y + 2, 2 * x_:2 * x_ + 2].max()
    with pytest.raises(ShapeError):
        ops.max_pool2d(Tensor(rng.normal(size=(1, 1, 3, 4))))


def test_upsample_pad_crop(f64) -> None:
    x = Tensor(np.arange(4.0).reshape(1, 1, 2, 2))
    up = ops.upsample2d(x)
    assert up.data[0, 0].tolist() == [[0, 0, 1, 1], [0, 0, 1, 1], [2, 2, 3, 3], [2, 2, 3, 3]]
    padded = ops.pad2d(x, 1, 2)
    assert padded.shape == (1, 1, 3, 4)
    assert ops.crop2d(padded, 2, 2).data.tolist() == x.data.tolist()


def test_softmax_and_sigmoid_are_stable(f64) -> None:
    probs = ops.softmax(Tensor(np.array([[1000.0, 1000.0, -1000.0]])))
    np.testing.assert_allclose(probs.data, [[0.5, 0.5, 0.0]])
    squashed = ops.sigmoid(Tensor(np.array([-800.0, 0.0, 800.0])))
    np.testing.assert_allclose(squashed.data, [0.0, 0.5, 1.0])


def test_losses(f64) -> None:
    bce = ops.bce_loss(Tensor(np.array([0.5, 0.5])), np.array([1.0, 0.0]))
    assert bce.item() == pytest.approx(np.log(2.0))
    ce = ops.cross_entropy_loss(Tensor(np.zeros((2, 4))), np.array([0, 3]))
    assert ce.item() == pytest.approx(np.log(4.0))
    with pytest.raises(ShapeError):
        ops.bce_loss(Tensor(np.array([0.5])), np.array([1.0, 0.0]))


def test_backward_requires_a_graph_and_scalar(f64) -> None:
    with pytest.raises(AutodiffStateError):
        Tensor([1.0, 2.0]).backward()
    x = Tensor(np.ones(3), requires_grad=True)
    doubled = x * 2.0
    with pytest.raises(AutodiffStateError):
        doubled.backward()
    doubled.backward(np.ones(3))
    assert x.grad.tolist() == [2.0, 2.0, 2.0]


def test_gradients_accumulate_over_shared_inputs(f64) -> None:
    x = Tensor(np.array([3.0]), requires_grad=True)
    y = x + x * 4.0
    ops.reshape(y, ()).backward()
    assert x.grad.tolist() == [5.0]


def test_no_grad_records_nothing(f64) -> None:
    x = Tensor(np.ones(2), requires_grad=True)
    with no_grad():
        y = x * 3.0
    assert not y.needs_grad
    with pytest.raises(AutodiffStateError):
        y.backward(np.ones(2))


def test_param_set_names_are_unique(rng: np.random.Generator) -> None:
    params = ParamSet()
    params.add_dense("enc.fc", 4, 3, rng)
    assert list(params) == ["enc.fc.weight", "enc.fc.bias"]
    assert params.count() == 15
    with pytest.raises(ConfigurationError):
        params.add("enc.fc.bias", np.zeros(3))
    with pytest.raises(ShapeError):
        params.assign("enc.fc.bias", np.zeros(4))
    other = ParamSet()
    other.add("dec.w", np.zeros(2))
    assert list(params.merged(other).with_prefix("dec")) == ["dec.w"]


@pytest.mark.parametrize("check", LAYER_CHECKS, ids=lambda c: c.__name__)
def test_layer_gradients_float64(check) -> None:
    with precision("float64"):
        report = check(np.random.default_rng(7), None)
    assert report.passed, report.summary()
    assert report.tolerance == 1e-6


def test_dense_gradient_float32() -> None:
    with precision("float32"):
        report = check_dense(np.random.default_rng(7), None)
    assert report.tolerance == 1e-3
    assert report.passed, report.summary()


def test_gradient_check_catches_wrong_gradient(f64) -> None:
    params = ParamSet()
    params.add("w", np.array([0.7, -0.2]))

    def loss() -> Tensor:
        # backward reports twice the true gradient
        w = params["w"]
        out = Tensor.from_op(np.array(np.sum(w.data**2)), (w,), "square")
        if out.needs_grad:
            def _backward() -> None:
                w.accumulate(out.grad * 4 * w.data)

            out._backward = _backward
        return out

    report = gradient_check(loss, params, "broken")
    assert not report.passed
    assert report.worst_param == "w"


def test_relative_error_floor() -> None:
    assert relative_error(1e-9, 0.0) == pytest.approx(1e-6)
    assert relative_error(2.0, 1.0) == pytest.approx(0.5)


def _quadratic_params() -> ParamSet:
    params = ParamSet()
    params.add("w", np.array([1.0, -2.0]))
    return params


def _descend(params: ParamSet, config: OptimizerConfig, steps: int) -> None:
    optimizer = build_optimizer(params, config)
    for _ in range(steps):
        row = ops.reshape(params["w"], (1, 2))
        loss = ops.dense(row, row)
        ops.reshape(loss, ()).backward()
        optimizer.step()


@pytest.mark.parametrize("kind", [OptimizerKind.SGD, OptimizerKind.ADAM])
def test_optimizers_reduce_a_quadratic(f64, kind: OptimizerKind) -> None:
    params = _quadratic_params()
    _descend(params, OptimizerConfig(kind=kind, learning_rate=0.05), 50)
    assert np.abs(params["w"].data).max() < 1.0
    assert params["w"].grad is None


def test_optimizer_step_without_gradients(f64) -> None:
    params = _quadratic_params()
    with pytest.raises(AutodiffStateError):
        SGD(params, OptimizerConfig(kind="sgd")).step()
    with pytest.raises(ConfigurationError):
        OptimizerConfig(learning_rate=0.0)


def test_adam_state_round_trip(f64, tmp_path) -> None:
    params = _quadratic_params()
    optimizer = Adam(params, OptimizerConfig())
    params["w"].grad = np.array([0.5, 0.5])
    optimizer.step()
    rng = np.random.default_rng(3)
    rng.random(4)
    save_training_state(tmp_path, optimizer.state(), epoch=2, rng=rng)

    state, epoch, rng_state = load_training_state(tmp_path)
    restored = Adam(params, OptimizerConfig())
    restored.load_state(state)
    assert epoch == 2
    assert restored.steps == 1
    np.testing.assert_allclose(restored.first["w"], optimizer.first["w"], rtol=1e-6)
    resumed = np.random.default_rng()
    resumed.bit_generator.state = rng_state
    assert resumed.random() == rng.random()


def test_checkpoint_round_trip_and_validation(tmp_path, rng: np.random.Generator) -> None:
    params = ParamSet()
    params.add_conv("enc.conv1", 1, 2, 3, rng)
    save_checkpoint(params, tmp_path, {"kind": "test"})
    first_bytes = (tmp_path / "model.bin").read_bytes()
    save_checkpoint(params, tmp_path, {"kind": "test"})
    assert (tmp_path / "model.bin").read_bytes() == first_bytes

    loaded, metadata = load_checkpoint(tmp_path)
    assert metadata == {"kind": "test"}
    np.testing.assert_allclose(loaded["enc.conv1.weight"].data, params["enc.conv1.weight"].data, rtol=1e-6)
    check_against(loaded, params, tmp_path)

    wrong = ParamSet()
    wrong.add_conv("enc.conv1", 1, 3, 3, rng)
    with pytest.raises(CheckpointError):
        check_against(loaded, wrong, tmp_path)

    (tmp_path / "model.bin").write_bytes(first_bytes[:-4])
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path)


def test_missing_checkpoint(tmp_path) -> None:
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "nowhere")
