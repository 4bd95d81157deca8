import math
from dataclasses import dataclass
from enum import IntEnum
from typing import List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from geometry import Pose2D, normalize_angle
from logger.logger import logger
from sim_world.road_network import RoadNetwork
from utils.exceptions import InvalidArgumentError, OffRouteError

COMMAND_LEAD = 15.0             # meters before junction entry where a turn command starts
COMMAND_RELEASE = 0.7           # fraction of the turn angle after which the command reverts
OFF_ROUTE_DISTANCE = 6.0
PATH_SPACING = 0.25
CONNECTOR_MIN_FRACTION = 1.0       # lower bound of a connector length, in junction half-sizes


class Command(IntEnum):
    KEEP_STRAIGHT = 0
    TURN_LEFT = 1
    TURN_RIGHT = 2


@dataclass(frozen=True)
class TurnEvent:
    """A turn through a junction: arc-length span of the connector, signed angle (left positive)"""
    node: str
    entry_s: float
    exit_s: float
    angle: float
    heading_in: float

    @property
    def command(self) -> Command:
        return Command.TURN_LEFT if self.angle > 0 else Command.TURN_RIGHT


def _bezier(p0: np.ndarray, c: np.ndarray, p2: np.ndarray, spacing: float) -> np.ndarray:
    estimate = np.linalg.norm(c - p0) + np.linalg.norm(p2 - c)
    t = np.linspace(0.0, 1.0, max(int(math.ceil(estimate / spacing)), 2) + 1)[:, None]
    return (1 - t) ** 2 * p0 + 2 * (1 - t) * t * c + t ** 2 * p2


def _segment(p0: np.ndarray, p1: np.ndarray, spacing: float) -> np.ndarray:
    n = max(int(math.ceil(np.linalg.norm(p1 - p0) / spacing)), 1)
    t = np.linspace(0.0, 1.0, n + 1)[:, None]
    return p0 + t * (p1 - p0)


class Route:
    """
    A drivable reference path built from an ordered sequence of lanes.

    Lanes are straight; consecutive lanes are joined through their junction plaza by a
    quadratic Bezier whose control point is the crossing of the two lane lines
    (a straight line when the lanes are collinear).
    The path is sampled densely and indexed by arc length `s`.
    """

    def __init__(self, network: RoadNetwork, lane_ids: Sequence[str], spacing: float = PATH_SPACING):
        if len(lane_ids) == 0:
            raise InvalidArgumentError("A route needs at least one lane")
        for lane_id in lane_ids:
            if lane_id not in network.lanes:
                raise InvalidArgumentError(f"Unknown lane {lane_id} on map {network.name}")
        for a, b in zip(lane_ids[:-1], lane_ids[1:]):
            if not network.lane_graph.has_edge(a, b):
                raise InvalidArgumentError(f"Lane {b} does not follow lane {a} on map {network.name}")

        self.network = network
        self.lane_ids = tuple(lane_ids)
        pieces = []
        turn_spans = []
        for i, lane_id in enumerate(self.lane_ids):
            lane = network.lanes[lane_id]
            pieces.append(_segment(np.array(lane.start), np.array(lane.end), spacing))
            if i + 1 < len(self.lane_ids):
                nxt = network.lanes[self.lane_ids[i + 1]]
                angle = normalize_angle(nxt.heading - lane.heading)
                p0, p2 = np.array(lane.end), np.array(nxt.start)
                if abs(angle) < 1e-9:
                    connector = _segment(p0, p2, spacing)
                else:
                    d1 = np.array([math.cos(lane.heading), math.sin(lane.heading)])
                    d2 = np.array([math.cos(nxt.heading), math.sin(nxt.heading)])
                    a, _ = np.linalg.solve(np.column_stack([d1, d2]), p2 - p0)
                    connector = _bezier(p0, p0 + a * d1, p2, spacing)
                    turn_spans.append((len(pieces), lane.end_node, angle, lane.heading))
                pieces.append(connector)

        # drop the duplicated joint point at the start of every piece after the first
        starts = np.cumsum([0] + [len(p) - (1 if k else 0) for k, p in enumerate(pieces)])
        self.points = np.concatenate([p if k == 0 else p[1:] for k, p in enumerate(pieces)])
        steps = np.linalg.norm(np.diff(self.points, axis=0), axis=1)
        self.s = np.concatenate([[0.0], np.cumsum(steps)])
        self.length = float(self.s[-1])

        deltas = np.diff(self.points, axis=0)
        headings = np.arctan2(deltas[:, 1], deltas[:, 0])
        self.headings = np.unwrap(np.concatenate([headings, headings[-1:]]))
        self.curvature = np.gradient(self.headings, self.s) if len(self.s) > 2 else np.zeros(len(self.s))

        # lane i is piece 2i
        self.lane_spans = [(float(self.s[max(starts[2 * i] - 1, 0)]), float(self.s[starts[2 * i + 1] - 1]))
                           for i in range(len(self.lane_ids))]
        self.turns: List[TurnEvent] = []
        for piece_index, node, angle, heading_in in turn_spans:
            first = starts[piece_index] - 1
            last = starts[piece_index + 1] - 1
            self.turns.append(TurnEvent(node=node, entry_s=float(self.s[first]), exit_s=float(self.s[last]),
                                        angle=float(angle), heading_in=float(heading_in)))

    @property
    def start_pose(self) -> Pose2D:
        return Pose2D(float(self.points[0, 0]), float(self.points[0, 1]), float(self.headings[0]))

    @property
    def end_point(self) -> np.ndarray:
        return self.points[-1]

    def point_at(self, s: float) -> Tuple[float, float, float]:
        """(x, y, heading) at arc length s, clamped to the path ends"""
        s = min(max(s, 0.0), self.length)
        x = float(np.interp(s, self.s, self.points[:, 0]))
        y = float(np.interp(s, self.s, self.points[:, 1]))
        return x, y, normalize_angle(float(np.interp(s, self.s, self.headings)))

    def curvature_at(self, s) -> np.ndarray:
        return np.interp(s, self.s, self.curvature)

    def project(self, point, s_hint: Optional[float] = None, back: float = 10.0,
                ahead: float = 30.0) -> Tuple[float, float]:
        """
        Nearest path sample to a world point.

        :param point:   (x, y)
        :param s_hint:  Last known arc length; when given, only [s_hint - back, s_hint + ahead] is searched,
                        which keeps the projection on the right pass when a route crosses itself
        :return:        (s, signed lateral offset; right of the path positive)
        """
        point = np.asarray(point, dtype=np.float64)
        if s_hint is None:
            lo, hi = 0, len(self.s)
        else:
            lo = min(int(np.searchsorted(self.s, s_hint - back)), len(self.s) - 1)
            hi = max(int(np.searchsorted(self.s, s_hint + ahead, side="right")), lo + 1)
        d = self.points[lo:hi] - point
        i = lo + int(np.argmin(np.einsum("ij,ij->i", d, d)))
        rel = point - self.points[i]
        h = self.headings[i]
        lateral = rel[0] * math.sin(h) - rel[1] * math.cos(h)
        return float(self.s[i]), float(lateral)

    def lane_index_at(self, s: float) -> int:
        """Index into lane_ids of the last lane starting at or before arc length s"""
        starts = [span[0] for span in self.lane_spans]
        return max(int(np.searchsorted(starts, s, side="right")) - 1, 0)

    def turn_at(self, s: float) -> Optional[TurnEvent]:
        for turn in self.turns:
            if turn.entry_s - COMMAND_LEAD <= s < turn.exit_s:
                return turn
        return None


def route_command(route: Route, pose: Pose2D, s_hint: Optional[float] = None) -> Command:
    """
    The high-level planner's command for the ego at `pose`.

    A turn command starts COMMAND_LEAD meters before the junction entry and reverts to
    KEEP_STRAIGHT when the heading has turned by more than COMMAND_RELEASE of the turn angle,
    or at the connector exit, whichever comes first.

    :param route:   Planned route
    :param pose:    Ego pose
    :param s_hint:  Optional arc-length hint (see Route.project)
    :return:        Command
    """
    s, _ = route.project(pose.position, s_hint)
    x, y, _ = route.point_at(s)
    distance = math.hypot(pose.x - x, pose.y - y)
    if distance > OFF_ROUTE_DISTANCE:
        raise OffRouteError(f"Ego at ({pose.x:.2f}, {pose.y:.2f}) is {distance:.2f} m off the route")
    turn = route.turn_at(s)
    if turn is None:
        return Command.KEEP_STRAIGHT
    if s >= turn.entry_s and abs(normalize_angle(pose.yaw - turn.heading_in)) > COMMAND_RELEASE * abs(turn.angle):
        return Command.KEEP_STRAIGHT
    return turn.command


def plan_random_route(network: RoadNetwork, rng: np.random.Generator, min_length: float = 300.0,
                      max_length: float = 1500.0, start_lane: str = None) -> Route:
    """
    Random walk over the lane graph until the route length reaches a target drawn uniformly
    from [min_length, max_length].
    """
    if not 0 < min_length <= max_length:
        raise InvalidArgumentError(f"Invalid route length range [{min_length}, {max_length}]")
    target = rng.uniform(min_length, max_length)
    lanes = sorted(network.lanes)
    current = start_lane if start_lane is not None else lanes[int(rng.integers(len(lanes)))]
    lane_ids = [current]
    length = network.lanes[current].length
    while length < target:
        options = network.next_lanes(current)
        current = options[int(rng.integers(len(options)))]
        lane_ids.append(current)
        length += network.lanes[current].length + CONNECTOR_MIN_FRACTION * network.junction_half_size
    route = Route(network, lane_ids)
    logger.debug(f"Planned route of {route.length:.1f} m over {len(lane_ids)} lanes with {len(route.turns)} turns")
    return route


def plan_route(network: RoadNetwork, start_lane: str, goal_lane: str) -> Route:
    """Shortest route (by lane length) from start_lane to goal_lane"""
    try:
        lane_ids = nx.shortest_path(network.lane_graph, start_lane, goal_lane,
                                    weight=lambda a, b, _: network.lanes[b].length)
    except (nx.NetworkXNoPath, nx.NodeNotFound) as e:
        raise InvalidArgumentError(f"No route from {start_lane} to {goal_lane} on map {network.name}: {e}")
    return Route(network, lane_ids)


def timeout_for(route_length: float, reference_speed: float = 0.5 * 40.0 / 3.6, grace: float = 10.0) -> float:
    """Time limit for driving a route: its length at half the target speed, plus a grace period"""
    return route_length / reference_speed + grace
