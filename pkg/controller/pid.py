import math
from dataclasses import dataclass
from typing import Optional

from utils.exceptions import InvalidArgumentError


@dataclass(frozen=True)
class PidGains:
    kp: float = 0.0
    ki: float = 0.0
    kd: float = 0.0
    integral_limit: float = math.inf
    output_limit: float = math.inf

    def __post_init__(self):
        for name in ("kp", "ki", "kd"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise InvalidArgumentError(f"PID gain {name} must be finite and nonnegative, got {value}")
        if not (self.integral_limit > 0 and self.output_limit > 0):
            raise InvalidArgumentError(f"PID clamps must be positive, got {self.integral_limit}, {self.output_limit}")


@dataclass
class PidState:
    integral: float = 0.0
    previous_error: Optional[float] = None

    def reset(self) -> None:
        self.integral, self.previous_error = 0.0, None


def pid_step(gains: PidGains, error: float, dt: float, state: PidState) -> float:
    """
    Textbook PID with a clamped integrator and the derivative taken on the error (zero on the first call).
    Updates `state` in place.
    """
    if not dt > 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")
    state.integral = min(max(state.integral + error * dt, -gains.integral_limit), gains.integral_limit)
    derivative = 0.0 if state.previous_error is None else (error - state.previous_error) / dt
    state.previous_error = error
    output = gains.kp * error + gains.ki * state.integral + gains.kd * derivative
    return min(max(output, -gains.output_limit), gains.output_limit)
