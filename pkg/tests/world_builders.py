"""
Small hand-built maps and worlds shared by the tests.
"""

from geometry import Pose2D
from sim_world import RoadNetwork, Route, make_world, CAR, RenderConfig

GRID_SPACING = 150.0


def grid_network(props: float = 0.0) -> RoadNetwork:
    """
    3 x 2 junction grid, 150 m blocks:

        B0 ---- B1 ---- B2
        |       |       |
        A0 ---- A1 ---- A2
    """
    s = GRID_SPACING
    nodes = {"A0": (0, 0), "A1": (s, 0), "A2": (2 * s, 0), "B0": (0, s), "B1": (s, s), "B2": (2 * s, s)}
    roads = [("A0", "A1"), ("A1", "A2"), ("B0", "B1"), ("B1", "B2"), ("A0", "B0"), ("A1", "B1"), ("A2", "B2")]
    return RoadNetwork("grid", nodes, roads, lane_width=4.0, junction_half_size=10.0, prop_density=props,
                       prop_seed=3)


def straight_route(network: RoadNetwork) -> Route:
    """A0 -> A1 -> A2, heading east, no turns"""
    return Route(network, ["A0>A1", "A1>A2"])


def right_turn_route(network: RoadNetwork) -> Route:
    """A0 -> B0 (north) then B0 -> B1 (east): one right turn"""
    return Route(network, ["A0>B0", "B0>B1"])


def left_turn_route(network: RoadNetwork) -> Route:
    """A0 -> A1 (east) then A1 -> B1 (north): one left turn"""
    return Route(network, ["A0>A1", "A1>B1"])


def lane_center_y() -> float:
    """y of the eastbound A0 -> A1 lane centerline"""
    return -2.0


def straight_world(x: float = 60.0, speed: float = 0.0, agents=(), weather="clear-day", seed: int = 0,
                   y: float = None):
    """Ego heading east on the A0 -> A1 lane"""
    network = grid_network()
    pose = Pose2D(x, lane_center_y() if y is None else y, 0.0)
    return make_world(network, CAR, weather, seed, pose, speed, agents)


def small_render_config(**kwargs) -> RenderConfig:
    return RenderConfig(**{"height": 32, "width": 32, **kwargs})
