"""
Scripted roaming agents: vehicles following a lane path and pedestrians crossing a road.
Agent policies are immutable; advancing an agent returns a new Agent.
"""

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import List, Sequence

import numpy as np

from geometry import Pose2D, world_to_body
from logger.logger import logger
from sim_world.route import Route
from sim_world.vehicle import VehicleState, VehicleProfile

HOLD_DISTANCE = 8.0
VEHICLE_SPEED_RANGE = (5.0, 8.0)
PEDESTRIAN_SPEED_RANGE = (1.2, 1.6)
SPAWN_CLEARANCE = 25.0


class AgentKind(str, Enum):
    VEHICLE = "vehicle"
    PEDESTRIAN = "pedestrian"


@dataclass(frozen=True)
class Agent:
    agent_id: int
    kind: AgentKind
    pose: Pose2D
    speed: float
    length: float
    width: float
    height: float
    progress: float = 0.0
    active: bool = True
    policy: "AgentPolicy" = field(default=None, compare=False, repr=False)

    def advance(self, time: float, dt: float, ego: VehicleState, ego_profile: VehicleProfile) -> "Agent":
        if not self.active or self.policy is None:
            return self
        return self.policy.advance(self, time, dt, ego, ego_profile)


class AgentPolicy:
    def advance(self, agent: Agent, time: float, dt: float, ego: VehicleState,
                ego_profile: VehicleProfile) -> Agent:
        raise NotImplementedError


def _ego_blocks(agent: Agent, ego: VehicleState, ego_profile: VehicleProfile) -> bool:
    """True when the ego body sits in the next few meters of the agent's path"""
    ego_center = ego.pose.position + ego.pose.heading * (ego_profile.length / 2 - ego_profile.rear_overhang)
    x, y = world_to_body(ego_center, agent.pose)[0]
    reach = agent.length / 2 + ego_profile.length / 2 + HOLD_DISTANCE
    return 0.0 < y < reach and abs(x) < (agent.width + ego_profile.width) / 2 + 0.5


class LaneFollowerPolicy(AgentPolicy):
    """Constant-speed travel along a polyline path; holds while the ego is in the way, retires at the path end"""

    def __init__(self, path: np.ndarray):
        self.path = np.asarray(path, dtype=np.float64)
        steps = np.linalg.norm(np.diff(self.path, axis=0), axis=1)
        self.s = np.concatenate([[0.0], np.cumsum(steps)])
        self.headings = np.unwrap(np.arctan2(np.diff(self.path[:, 1]), np.diff(self.path[:, 0])))

    @property
    def length(self) -> float:
        return float(self.s[-1])

    def pose_at(self, progress: float) -> Pose2D:
        progress = min(max(progress, 0.0), self.length)
        x = float(np.interp(progress, self.s, self.path[:, 0]))
        y = float(np.interp(progress, self.s, self.path[:, 1]))
        i = min(int(np.searchsorted(self.s, progress, side="right")) - 1, len(self.headings) - 1)
        return Pose2D(x, y, float(self.headings[max(i, 0)]))

    def advance(self, agent, time, dt, ego, ego_profile):
        if _ego_blocks(agent, ego, ego_profile):
            return agent
        progress = agent.progress + agent.speed * dt
        if progress >= self.length:
            return replace(agent, progress=self.length, pose=self.pose_at(self.length), active=False)
        return replace(agent, progress=progress, pose=self.pose_at(progress))


class CrosserPolicy(AgentPolicy):
    """
    Walks across a road from one side to the other, waits, walks back, waits, and repeats.
    The position is a closed-form function of the time since spawn.
    """

    def __init__(self, side_a: Sequence[float], side_b: Sequence[float], wait: float, spawn_time: float,
                 phase: float = 0.0):
        self.side_a = np.asarray(side_a, dtype=np.float64)
        self.side_b = np.asarray(side_b, dtype=np.float64)
        self.width = float(np.linalg.norm(self.side_b - self.side_a))
        self.wait = wait
        self.spawn_time = spawn_time
        self.phase = phase

    def state_at(self, elapsed: float, speed: float):
        cross = self.width / speed
        cycle = 2 * (cross + self.wait)
        tau = (elapsed + self.phase) % cycle
        forward = math.atan2(*(self.side_b - self.side_a)[::-1])
        if tau < self.wait:
            return self.side_a, forward, 0.0
        if tau < self.wait + cross:
            w = (tau - self.wait) / cross
            return self.side_a + w * (self.side_b - self.side_a), forward, speed
        if tau < 2 * self.wait + cross:
            return self.side_b, forward + math.pi, 0.0
        w = (tau - 2 * self.wait - cross) / cross
        return self.side_b + w * (self.side_a - self.side_b), forward + math.pi, speed

    def advance(self, agent, time, dt, ego, ego_profile):
        position, yaw, moving = self.state_at(time - self.spawn_time, agent.speed)
        return replace(agent, pose=Pose2D(float(position[0]), float(position[1]), yaw),
                       progress=agent.progress + moving * dt)


def make_vehicle(agent_id: int, path: np.ndarray, speed: float) -> Agent:
    policy = LaneFollowerPolicy(path)
    return Agent(agent_id=agent_id, kind=AgentKind.VEHICLE, pose=policy.pose_at(0.0), speed=speed,
                 length=4.5, width=1.9, height=1.5, policy=policy)


def make_pedestrian(agent_id: int, side_a, side_b, speed: float, wait: float, spawn_time: float = 0.0,
                    phase: float = 0.0) -> Agent:
    policy = CrosserPolicy(side_a, side_b, wait, spawn_time, phase)
    position, yaw, _ = policy.state_at(0.0, speed)
    return Agent(agent_id=agent_id, kind=AgentKind.PEDESTRIAN, pose=Pose2D(float(position[0]), float(position[1]), yaw),
                 speed=speed, length=0.5, width=0.6, height=1.75, policy=policy)


def _straight_stretches(route: Route, margin: float) -> np.ndarray:
    """Arc-length values on straight lane portions, away from junction connectors and from the ego spawn point"""
    ok = np.ones(len(route.s), dtype=bool)
    for turn in route.turns:
        ok &= ~((route.s > turn.entry_s - margin) & (route.s < turn.exit_s + margin))
    ok &= (route.s > SPAWN_CLEARANCE) & (route.s < route.length - 20.0)
    ok &= np.linalg.norm(route.points - route.points[0], axis=1) > SPAWN_CLEARANCE
    return route.s[ok]


def spawn_agents(route: Route, rng: np.random.Generator, vehicles_per_km: float = 6.0,
                 pedestrians_per_km: float = 6.0, start_id: int = 0) -> List[Agent]:
    """
    Place roaming agents along a route: vehicles ahead in the ego lane (travelling a stretch of the route
    then turning off), vehicles oncoming on the opposite lane, and pedestrians crossing route roads.
    Nothing spawns within SPAWN_CLEARANCE of the route start, where the ego spawns.

    :param route:               Ego route
    :param rng:                 Stream dedicated to spawning
    :param vehicles_per_km:     Vehicle density per km of route
    :param pedestrians_per_km:  Pedestrian density per km of route
    :param start_id:            First agent id
    :return:                    List of Agents
    """
    network = route.network
    agents = []
    next_id = start_id
    candidates = _straight_stretches(route, margin=12.0)
    if len(candidates) == 0:
        return agents
    ego_start = route.points[0]

    n_vehicles = int(round(vehicles_per_km * route.length / 1000.0))
    for k in range(n_vehicles):
        speed = float(rng.uniform(*VEHICLE_SPEED_RANGE))
        if k % 2 == 0:
            s0 = float(rng.choice(candidates))
            stretch = float(rng.uniform(60.0, 150.0))
            mask = (route.s >= s0) & (route.s <= min(s0 + stretch, route.length))
            path = route.points[mask]
        else:
            s0 = float(rng.choice(candidates))
            lane_id = route.lane_ids[route.lane_index_at(s0)]
            lane = network.lanes[lane_id]
            opposite = network.lanes.get(f"{lane.end_node}>{lane.start_node}")
            if opposite is None:
                continue
            path = np.array([opposite.start, opposite.end])
            along = float(rng.uniform(0.0, max(opposite.length - 30.0, 1.0)))
            direction = (path[1] - path[0]) / opposite.length
            path = np.array([path[0] + along * direction, path[1]])
            if np.linalg.norm(path[0] - ego_start) < SPAWN_CLEARANCE:
                continue
        if len(path) < 2:
            continue
        agents.append(make_vehicle(next_id, path, speed))
        next_id += 1

    n_pedestrians = int(round(pedestrians_per_km * route.length / 1000.0))
    for _ in range(n_pedestrians):
        s0 = float(rng.choice(candidates))
        x, y, heading = route.point_at(s0)
        lane = network.lanes[route.lane_ids[route.lane_index_at(s0)]]
        right = np.array([math.sin(heading), -math.cos(heading)])
        axis = np.array([x, y]) - right * lane.width / 2.0
        half = network.lane_width + network.shoulder + 0.5
        sides = [axis + right * half, axis - right * half]
        if rng.random() < 0.5:
            sides.reverse()
        speed = float(rng.uniform(*PEDESTRIAN_SPEED_RANGE))
        wait = float(rng.uniform(2.0, 4.0))
        phase = float(rng.uniform(0.0, 2 * (2 * half / speed + wait)))
        agents.append(make_pedestrian(next_id, sides[0], sides[1], speed, wait, phase=phase))
        next_id += 1

    logger.debug(f"Spawned {len(agents)} agents along a {route.length:.0f} m route")
    return agents

