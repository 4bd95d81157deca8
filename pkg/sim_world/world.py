from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Sequence, Tuple

from geometry import Pose2D
from sim_world.agents import Agent, spawn_agents
from sim_world.road_network import RoadNetwork
from sim_world.route import Route
from sim_world.vehicle import VehicleProfile, VehicleState, step_vehicle
from utils.exceptions import InvalidArgumentError
from utils.utils import derive_rng

DEFAULT_SUBSTEPS = 4


class Weather(str, Enum):
    CLEAR_DAY = "clear-day"
    CLEAR_SUNSET = "clear-sunset"
    FOGGY_DAY = "foggy-day"
    RAINY_DAY = "rainy-day"
    RAINY_SUNSET = "rainy-sunset"

    @classmethod
    def parse(cls, value) -> "Weather":
        if isinstance(value, Weather):
            return value
        try:
            return cls(str(value).strip().lower().replace("_", "-"))
        except ValueError:
            raise InvalidArgumentError(f"Unknown weather `{value}`; expected one of {[w.value for w in cls]}")


@dataclass(frozen=True)
class WorldState:
    """
    Immutable simulator state. `seed` is the episode seed; every random stream used while stepping or
    rendering is derived from (seed, purpose, tick), so the state carries no generator object.
    """
    time: float
    tick: int
    ego: VehicleState
    profile: VehicleProfile
    agents: Tuple[Agent, ...]
    weather: Weather
    seed: int
    network: RoadNetwork = field(compare=False, repr=False)

    @property
    def active_agents(self) -> Tuple[Agent, ...]:
        return tuple(agent for agent in self.agents if agent.active)


def make_world(network: RoadNetwork, profile: VehicleProfile, weather, seed: int, start: Pose2D,
               speed: float = 0.0, agents: Sequence[Agent] = ()) -> WorldState:
    return WorldState(time=0.0, tick=0, ego=VehicleState(start, speed, 0.0), profile=profile,
                      agents=tuple(agents), weather=Weather.parse(weather), seed=int(seed), network=network)


def make_episode_world(route: Route, profile: VehicleProfile, weather, seed: int, dynamic: bool,
                       vehicles_per_km: float = 6.0, pedestrians_per_km: float = 6.0) -> WorldState:
    """World with the ego at rest at the route start and, for dynamic traffic, roaming agents spawned along it"""
    agents = []
    if dynamic:
        agents = spawn_agents(route, derive_rng(seed, "agents"), vehicles_per_km, pedestrians_per_km)
    return make_world(route.network, profile, weather, seed, route.start_pose, 0.0, agents)


def step_world(world: WorldState, controls: Tuple[float, float], dt: float,
               substeps: int = DEFAULT_SUBSTEPS) -> WorldState:
    """
    Advance the world by dt: the ego integrates (accel, steer) in `substeps` Euler steps,
    every agent follows its scripted policy, time advances by dt.

    :param world:       Current state
    :param controls:    (accel_cmd, steer_cmd) for the ego
    :param dt:          Step length, s
    :param substeps:    Kinematic sub-steps per call
    :return:            The next WorldState
    """
    if not dt > 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")
    accel_cmd, steer_cmd = controls
    ego = world.ego
    h = dt / substeps
    for _ in range(substeps):
        ego = step_vehicle(ego, accel_cmd, steer_cmd, h, world.profile)
    time = world.time + dt
    agents = tuple(agent.advance(time, dt, world.ego, world.profile) for agent in world.agents)
    return replace(world, time=time, tick=world.tick + 1, ego=ego, agents=agents)


def find_agent(world: WorldState, agent_id: int) -> Optional[Agent]:
    for agent in world.agents:
        if agent.agent_id == agent_id:
            return agent
    return None
