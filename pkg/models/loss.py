import numpy as np

from nn import ops, Tensor
from nn.tensor import as_tensor
from utils.exceptions import ShapeMismatchError

LOG_VAR_CLAMP = 10.0


def _check(prediction: Tensor, truth: Tensor, what: str = "prediction"):
    if prediction.shape != truth.shape:
        raise ShapeMismatchError(f"{what} {prediction.shape} and ground truth {truth.shape} differ")


def heteroscedastic_loss(trajectory, truth, log_var, clamp: float = LOG_VAR_CLAMP) -> Tensor:
    """
    Mean over all elements of r^2 / (2 exp(lv)) + lv / 2, with r = trajectory - truth and lv the predicted
    log-variance clamped to [-clamp, clamp].
    """
    trajectory, truth, log_var = as_tensor(trajectory), as_tensor(truth), as_tensor(log_var)
    _check(trajectory, truth)
    _check(log_var, truth, "log-variance")
    lv = ops.clip(log_var, -clamp, clamp)
    scaled = ops.mul(ops.mul(ops.square(ops.sub(trajectory, truth)), 0.5), ops.exp(ops.mul(lv, -1.0)))
    return ops.mean(ops.add(scaled, ops.mul(lv, 0.5)))


def mse_loss(trajectory, truth) -> Tensor:
    """Mean of r^2 / 2"""
    trajectory, truth = as_tensor(trajectory), as_tensor(truth)
    _check(trajectory, truth)
    return ops.mean(ops.mul(ops.square(ops.sub(trajectory, truth)), 0.5))


def trajectory_loss(output, truth, freeze_log_var: bool = False, clamp: float = LOG_VAR_CLAMP) -> Tensor:
    """
    Loss of a ModelOutput: heteroscedastic when the model predicts a log-variance, half MSE otherwise.
    With freeze_log_var the log-variance is held at 0, which makes the heteroscedastic loss equal half MSE.
    """
    if output.log_var is None:
        return mse_loss(output.trajectory, truth)
    log_var = Tensor(np.zeros(output.log_var.shape)) if freeze_log_var else output.log_var
    return heteroscedastic_loss(output.trajectory, truth, log_var, clamp)
