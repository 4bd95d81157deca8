import math

import numpy as np
import pytest

from models import heteroscedastic_loss, mse_loss, trajectory_loss, ModelOutput
from nn import Tensor
from utils.exceptions import ShapeMismatchError


@pytest.mark.parametrize('residual, log_var, expected', [
    (0.0, 0.0, 0.0),
    (1.0, 0.0, 0.5),
    (2.0, math.log(4.0), 0.5 + math.log(4.0) / 2),
])
def test_loss_values(residual, log_var, expected):
    truth = np.zeros((22, 3))
    loss = heteroscedastic_loss(np.full((22, 3), residual), truth, np.full((22, 3), log_var))
    assert float(loss.value) == pytest.approx(expected, abs=1e-12)


def test_loss_minimized_at_log_squared_residual():
    residual = 0.7
    grid = np.linspace(-3.0, 3.0, 6001)
    losses = [float(heteroscedastic_loss(np.full((1, 3), residual), np.zeros((1, 3)), np.full((1, 3), lv)).value)
              for lv in grid]
    assert grid[int(np.argmin(losses))] == pytest.approx(math.log(residual ** 2), abs=1e-3)


def test_zero_log_var_is_half_mse():
    rng = np.random.default_rng(0)
    prediction, truth = rng.normal(size=(4, 22, 3)), rng.normal(size=(4, 22, 3))
    a = heteroscedastic_loss(prediction, truth, np.zeros((4, 22, 3))).value
    b = mse_loss(prediction, truth).value
    assert a == b
    assert b == pytest.approx(0.5 * np.mean((prediction - truth) ** 2))


def test_log_var_clamped():
    truth = np.zeros((22, 3))
    high = heteroscedastic_loss(np.ones((22, 3)), truth, np.full((22, 3), 50.0)).value
    assert high == pytest.approx(0.5 * math.exp(-10.0) + 5.0)
    log_var = Tensor(np.full((22, 3), -40.0), requires_grad=True)
    heteroscedastic_loss(np.ones((22, 3)), truth, log_var).backward()
    assert np.all(log_var.grad == 0.0)


def test_frozen_log_var_ignores_head():
    prediction = Tensor(np.ones((2, 22, 3)), requires_grad=True)
    log_var = Tensor(np.full((2, 22, 3), 3.0), requires_grad=True)
    loss = trajectory_loss(ModelOutput(prediction, log_var), np.zeros((2, 22, 3)), freeze_log_var=True)
    loss.backward()
    assert float(loss.value) == 0.5
    assert log_var.grad is None


def test_shape_mismatch():
    with pytest.raises(ShapeMismatchError):
        mse_loss(np.zeros((22, 3)), np.zeros((21, 3)))
