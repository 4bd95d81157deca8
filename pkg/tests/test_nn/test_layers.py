import numpy as np
import pytest

from nn import Tensor, ops, lstm_step, LSTM, Linear, Conv2d, MLP, init_parameters, grad_check, AdamState, \
    adam_step, save_checkpoint, load_checkpoint, set_default_dtype, FORGET_BIAS
from utils.exceptions import ShapeMismatchError, CheckpointError


def test_lstm_zero_weights_give_zero_state():
    x = Tensor(np.random.default_rng(0).normal(size=(2, 5)))
    zeros = Tensor(np.zeros((2, 3)))
    h, c = lstm_step(x, zeros, zeros, Tensor(np.zeros((5, 12))), Tensor(np.zeros((3, 12))), Tensor(np.zeros(12)))
    assert np.all(h.value == 0.0) and np.all(c.value == 0.0)


def test_saturated_forget_gate_keeps_cell():
    rng = np.random.default_rng(1)
    hidden = 3
    b = np.zeros(4 * hidden)
    b[:hidden] = -50.0                      # input gate off
    b[hidden:2 * hidden] = 50.0             # forget gate on
    c = rng.normal(size=(2, hidden))
    _, c_next = lstm_step(Tensor(rng.normal(size=(2, 4))), Tensor(rng.normal(size=(2, hidden))), Tensor(c),
                          Tensor(np.zeros((4, 4 * hidden))), Tensor(np.zeros((hidden, 4 * hidden))), Tensor(b))
    assert np.allclose(c_next.value, c, atol=1e-9)


def test_lstm_dimension_mismatch():
    with pytest.raises(ShapeMismatchError):
        lstm_step(Tensor(np.zeros((1, 4))), Tensor(np.zeros((1, 3))), Tensor(np.zeros((1, 3))),
                  Tensor(np.zeros((5, 12))), Tensor(np.zeros((3, 12))), Tensor(np.zeros(12)))


def test_lstm_stack_gradient():
    lstm = LSTM(3, 4, n_layers=3)
    init_parameters(lstm, seed=2)
    rng = np.random.default_rng(2)
    weights = rng.normal(size=(2, 4))

    def loss(x, *params):
        # run on the given tensors so their gradients are recorded
        for layer_index, layer in enumerate(lstm.layers):
            layer.w_x, layer.w_h, layer.b = params[3 * layer_index:3 * layer_index + 3]
        return ops.sum(ops.mul(lstm([x[k] for k in range(12)]), weights))

    inputs = [rng.normal(size=(12, 2, 3))] + [p.value.copy() for p in lstm.parameters().values()]
    assert grad_check(loss, inputs) < 1e-4


def test_forget_bias_initialized_to_one():
    lstm = LSTM(3, 4)
    init_parameters(lstm, seed=0)
    b = lstm.layers[0].b.value
    assert np.all(b[4:8] == FORGET_BIAS)
    assert np.all(b[:4] == 0.0) and np.all(b[8:] == 0.0)


def test_initialization_depends_on_name_and_seed():
    a, b = MLP([4, 8, 2]), MLP([4, 8, 2])
    init_parameters(a, seed=3)
    init_parameters(b, seed=3)
    for (name, p), q in zip(a.named_parameters(), b.parameters().values()):
        assert np.array_equal(p.value, q.value), name
    bound = np.sqrt(3.0 / 4)
    assert np.all(np.abs(a.parameters()["layers.0.weight"].value) <= bound)
    init_parameters(b, seed=4)
    assert not np.array_equal(a.parameters()["layers.0.weight"].value, b.parameters()["layers.0.weight"].value)


def test_parameter_names():
    conv = Conv2d(4, 8, 3, groups=4)
    assert set(conv.parameters()) == {"weight", "bias"}
    assert conv.weight.shape == (8, 1, 3, 3)
    assert set(MLP([3, 5, 2]).parameters()) == {"layers.0.weight", "layers.0.bias", "layers.1.weight",
                                                 "layers.1.bias"}


def test_linear_rejects_wrong_width():
    with pytest.raises(ShapeMismatchError):
        Linear(3, 2)(Tensor(np.zeros((1, 4))))


def test_adam_zero_gradient_leaves_parameters():
    w = Tensor(np.array([1.0, -2.0]), requires_grad=True)
    w.grad = np.zeros(2)
    adam_step({"w": w}, AdamState(lr=0.1))
    assert np.array_equal(w.value, [1.0, -2.0])


def test_adam_first_step_moves_by_lr_against_gradient():
    w = Tensor(np.array([0.0, 0.0, 0.0]), requires_grad=True)
    w.grad = np.array([3.0, -0.01, 250.0])
    state = AdamState(lr=0.01)
    adam_step({"w": w}, state)
    assert state.step == 1
    assert np.allclose(w.value, [-0.01, 0.01, -0.01], atol=1e-7)
    assert w.grad is not None


def test_adam_converges_on_quadratic():
    w = Tensor(np.array([0.0]), requires_grad=True)
    state = AdamState(lr=0.1)
    for _ in range(200):
        w.zero_grad()
        ops.square(ops.sub(w, 3.0)).backward()
        adam_step({"w": w}, state)
    assert abs(w.value[0] - 3.0) < 0.05


@pytest.mark.parametrize('precision', ['float64', 'float32'])
def test_checkpoint_round_trip_is_bit_exact(tmp_path, precision):
    rng = np.random.default_rng(9)
    tensors = {"a.weight": rng.normal(size=(3, 4)), "b": rng.normal(size=(7,)), "scalar": np.array(1.5)}
    if precision == "float32":
        tensors = {k: v.astype(np.float32) for k, v in tensors.items()}
    path = save_checkpoint(str(tmp_path / "model.ckpt"), tensors, {"variant": "M0", "dims": [1, 2]}, precision)
    loaded, meta = load_checkpoint(path)
    assert meta == {"variant": "M0", "dims": [1, 2]}
    for name, value in tensors.items():
        assert loaded[name].tobytes() == value.astype(loaded[name].dtype).tobytes()
        assert loaded[name].shape == value.shape


def test_checkpoint_rejects_foreign_and_truncated_files(tmp_path):
    path = tmp_path / "bogus.ckpt"
    path.write_bytes(b"not a checkpoint")
    with pytest.raises(CheckpointError):
        load_checkpoint(str(path))
    good = save_checkpoint(str(tmp_path / "good.ckpt"), {"w": np.ones(100)})
    data = open(good, "rb").read()
    (tmp_path / "cut.ckpt").write_bytes(data[:-10])
    with pytest.raises(CheckpointError, match="truncated"):
        load_checkpoint(str(tmp_path / "cut.ckpt"))


def test_float32_tensors():
    set_default_dtype(np.float32)
    try:
        layer = Linear(3, 2)
        init_parameters(layer, seed=0)
        out = layer(Tensor(np.ones((1, 3))))
        assert out.value.dtype == np.float32
    finally:
        set_default_dtype(np.float64)
