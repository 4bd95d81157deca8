"""
Trajectory sources for closed-loop driving: a trained network, and two scripted references used to check the
benchmark harness itself.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from expert import ExpertDriver, ExpertConfig, TARGET_SPEED
from geometry import Trajectory, FRAME_DT, HORIZON, world_to_body
from models import TrajectoryNet, load_model
from sim_world import Route, WorldState, Command, step_world
from utils.exceptions import ExpertLostError


@dataclass
class Plan:
    trajectory: Trajectory
    log_var: Optional[np.ndarray] = None        # (22, 3)
    attention: Optional[np.ndarray] = None      # (12,)


class Planner:
    """Produces a body-frame trajectory every tick"""
    name = "planner"
    needs_observations = False
    has_uncertainty = False
    image_size: Optional[Tuple[int, int]] = None

    def reset(self, route: Route) -> None:
        pass

    def plan(self, world: WorldState, images: Optional[np.ndarray], motion: np.ndarray, command: Command) -> Plan:
        """
        :param world:   current world (scripted planners only; a model sees nothing but its inputs)
        :param images:  (12, H, W, 3) observation history, or None when needs_observations is False
        :param motion:  (12, 3) body-frame motion history
        :param command: route command of the tick
        """
        raise NotImplementedError


class ModelPlanner(Planner):
    needs_observations = True

    def __init__(self, model: TrajectoryNet, name: str = None):
        self.model = model
        self.name = name or model.variant.value
        self.has_uncertainty = model.variant.has_uncertainty
        self.image_size = tuple(model.config.image_size)

    @classmethod
    def from_checkpoint(cls, path: str) -> "ModelPlanner":
        model, _ = load_model(path)
        return cls(model)

    def plan(self, world, images, motion, command) -> Plan:
        out = self.model.predict(images[None], motion[None], np.array([int(command)]))
        return Plan(trajectory=Trajectory.from_prediction(out.trajectory[0]),
                    log_var=None if out.log_var is None else out.log_var[0],
                    attention=None if out.attention is None else out.attention[0])


class ExpertReplayPlanner(Planner):
    """The expert's own next 22 ticks, simulated noise-free from the current world"""
    name = "expert-replay"

    def __init__(self, config: ExpertConfig = None):
        self.config = config or ExpertConfig()
        self.route = None
        self.progress = None

    def reset(self, route: Route) -> None:
        self.route, self.progress = route, None

    def plan(self, world, images, motion, command) -> Plan:
        driver = ExpertDriver(self.route, self.config)
        driver.progress = self.progress
        rows, ahead = [], world
        for k in range(HORIZON):
            try:
                action = driver.act(ahead)
            except ExpertLostError:
                break
            if k == 0:
                self.progress = action.progress
            ahead = step_world(ahead, (action.accel, action.steer), FRAME_DT)
            rows.append((ahead.ego.speed, ahead.ego.pose.x, ahead.ego.pose.y))
        if not rows:
            rows.append((world.ego.speed, world.ego.pose.x, world.ego.pose.y))
        rows += [rows[-1]] * (HORIZON - len(rows))
        rows = np.array(rows)
        body = world_to_body(rows[:, 1:], world.ego.pose)
        return Plan(Trajectory(np.column_stack([rows[:, 0], body])))


class NullPlanner(Planner):
    """Straight ahead at a constant speed, whatever happens"""
    name = "null"

    def __init__(self, speed: float = TARGET_SPEED):
        t = FRAME_DT * np.arange(1, HORIZON + 1)
        self.trajectory = Trajectory(np.column_stack([np.full(HORIZON, speed), np.zeros(HORIZON), speed * t]))

    def plan(self, world, images, motion, command) -> Plan:
        return Plan(self.trajectory)
