import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from geometry import world_to_body
from sim_world.agents import AgentKind
from sim_world.route import Route
from sim_world.world import WorldState
from utils.exceptions import ExpertLostError

TARGET_SPEED = 40.0 / 3.6


@dataclass(frozen=True)
class ExpertConfig:
    target_speed: float = TARGET_SPEED
    lookahead_base: float = 1.2
    lookahead_gain: float = 0.2
    lookahead_min: float = 3.0
    lookahead_max: float = 12.0
    speed_gain: float = 0.8
    lateral_accel: float = 2.0
    comfort_decel: float = 2.0
    preview_distance: float = 60.0
    corridor_length: float = 12.0
    pedestrian_margin: float = 1.0
    lost_distance: float = 4.0
    stop_margin: float = 1.0

    def lookahead(self, speed: float) -> float:
        return min(max(self.lookahead_base + self.lookahead_gain * speed, self.lookahead_min), self.lookahead_max)


@dataclass(frozen=True)
class ExpertAction:
    accel: float
    steer: float
    progress: float
    lateral: float
    blocked: bool


def pure_pursuit_steer(world: WorldState, route: Route, s: float, config: ExpertConfig) -> float:
    ego = world.ego
    tx, ty, _ = route.point_at(s + config.lookahead(ego.speed))
    x_b, y_b = world_to_body([(tx, ty)], ego.pose)[0]
    distance = math.hypot(x_b, y_b)
    if distance < 1e-6:
        return 0.0
    alpha = math.atan2(-x_b, y_b)
    return math.atan2(2.0 * world.profile.wheelbase * math.sin(alpha), distance)


def speed_target(route: Route, s: float, config: ExpertConfig) -> float:
    """
    Highest speed from which the ego can still slow down, at comfort_decel, to the curvature-limited
    speed of every point of the next preview_distance meters, and to a stop at the route end.
    """
    ahead = np.arange(0.0, config.preview_distance, 1.0)
    kappa = np.abs(route.curvature_at(np.minimum(s + ahead, route.length)))
    v_curve = np.minimum(np.sqrt(config.lateral_accel / np.maximum(kappa, 1e-9)), config.target_speed)
    v_allowed = np.sqrt(v_curve ** 2 + 2.0 * config.comfort_decel * ahead)
    v_end = math.sqrt(2.0 * config.comfort_decel * max(route.length - s - config.stop_margin, 0.0))
    return float(min(config.target_speed, v_allowed.min(), v_end))


def corridor_blocked(world: WorldState, route: Route, s: float, config: ExpertConfig) -> bool:
    """True when an active agent lies on the route within corridor_length of the ego's front bumper"""
    profile = world.profile
    s_front = s + profile.length - profile.rear_overhang
    half_lane = world.network.lane_width / 2.0
    for agent in world.active_agents:
        if np.hypot(*(agent.pose.position - world.ego.pose.position)) > config.corridor_length + 15.0:
            continue
        s_agent, lateral = route.project(agent.pose.position, s_hint=s, back=0.0,
                                         ahead=profile.length + config.corridor_length + 5.0)
        half = half_lane + agent.width / 2.0
        if agent.kind == AgentKind.PEDESTRIAN:
            half += config.pedestrian_margin
        if abs(lateral) > half:
            continue
        x, y, _ = route.point_at(s_agent)
        if math.hypot(agent.pose.x - x, agent.pose.y - y) > half:
            continue
        if s_agent + agent.length / 2.0 >= s_front - 0.5 and s_agent - agent.length / 2.0 <= s_front + config.corridor_length:
            return True
    return False


def expert_action(world: WorldState, route: Route, config: ExpertConfig = None,
                  s_hint: Optional[float] = None) -> ExpertAction:
    config = config or ExpertConfig()
    profile = world.profile
    s, lateral = route.project(world.ego.pose.position, s_hint)
    x, y, _ = route.point_at(s)
    if math.hypot(world.ego.pose.x - x, world.ego.pose.y - y) > config.lost_distance:
        raise ExpertLostError(f"Expert lost the route at t={world.time:.2f}s: {abs(lateral):.2f} m off, s={s:.1f} m")

    steer = pure_pursuit_steer(world, route, s, config)
    blocked = corridor_blocked(world, route, s, config)
    if blocked:
        accel = -profile.max_decel
    else:
        accel = config.speed_gain * (speed_target(route, s, config) - world.ego.speed)
    accel = min(max(accel, -profile.max_decel), profile.max_accel)
    steer = min(max(steer, -profile.max_steer), profile.max_steer)
    return ExpertAction(accel=accel, steer=steer, progress=s, lateral=lateral, blocked=blocked)


def expert_controls(world: WorldState, route: Route, config: ExpertConfig = None,
                    s_hint: Optional[float] = None) -> Tuple[float, float]:
    """
    The rule-based expert's (accel_cmd, steer_cmd) for the current world.

    Steering is pure pursuit on the route centerline with a speed-dependent lookahead; acceleration is a
    proportional law toward min(target speed, curvature-limited speed), replaced by full braking while
    an agent occupies the corridor ahead.

    :param world:   Current world
    :param route:   Route the ego follows
    :param config:  Expert parameters
    :param s_hint:  Last known route progress, see Route.project
    :return:        (accel_cmd, steer_cmd) within the ego profile limits
    """
    action = expert_action(world, route, config, s_hint)
    return action.accel, action.steer


class ExpertDriver:
    """Expert that keeps track of its route progress from tick to tick"""

    def __init__(self, route: Route, config: ExpertConfig = None):
        self.route = route
        self.config = config or ExpertConfig()
        self.progress = None

    def act(self, world: WorldState) -> ExpertAction:
        action = expert_action(world, self.route, self.config, self.progress)
        self.progress = action.progress
        return action

    def arrived(self, arrival_margin: float = 2.0) -> bool:
        return self.progress is not None and self.progress >= self.route.length - arrival_margin
