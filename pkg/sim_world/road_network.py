import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import networkx as nx
import numpy as np

from logger.logger import logger
from sim_world.vehicle import PROFILES
from utils.exceptions import MapFormatError, InvalidArgumentError
from utils.utils import derive_rng

MAPS_FOLDER = os.path.join(os.path.dirname(os.path.abspath(__file__)), "maps")
BUNDLED_MAPS = ("town-a", "town-b")


@dataclass(frozen=True)
class Lane:
    """
    Directed lane between two junction plazas, centerline offset to the right of the road axis.
    `start`/`end` sit on the plaza edges.
    """
    lane_id: str
    start_node: str
    end_node: str
    start: Tuple[float, float]
    end: Tuple[float, float]
    width: float

    @property
    def heading(self) -> float:
        return math.atan2(self.end[1] - self.start[1], self.end[0] - self.start[0])

    @property
    def length(self) -> float:
        return math.hypot(self.end[0] - self.start[0], self.end[1] - self.start[1])


@dataclass(frozen=True)
class Intersection:
    name: str
    center: Tuple[float, float]
    half_size: float
    incoming: Tuple[str, ...]
    outgoing: Tuple[str, ...]


@dataclass(frozen=True)
class Box:
    """A static or moving box: footprint center, yaw, length, width, height"""
    x: float
    y: float
    yaw: float
    length: float
    width: float
    height: float


class RoadNetwork:
    """
    Grid-style town: junction plazas (axis-aligned squares) joined by straight two-lane roads.

    The drivable region is the union of the plaza squares and the road rectangles.
    Every lane starts and ends on a plaza edge, so every lane endpoint attaches to an intersection.
    """

    def __init__(self, name: str, nodes: Dict[str, Tuple[float, float]], roads: List[Tuple[str, str]],
                 lane_width: float = 4.0, junction_half_size: float = 10.0, shoulder: float = 1.0,
                 prop_density: float = 0.0, prop_seed: int = 0):
        """
        :param name:                Map id, e.g. "town-a"
        :param nodes:               Junction name -> (x, y) center in world meters
        :param roads:               Pairs of junction names; every road must be axis-aligned
        :param lane_width:          Width of one lane, meters (a road carries one lane per direction)
        :param junction_half_size:  Half the side of a junction plaza, meters
        :param shoulder:            Paved strip outside each edge line that still counts as drivable, meters
        :param prop_density:        Roadside props per meter of road side
        :param prop_seed:           Seed for the roadside props layout
        """
        self.name = name
        self.nodes = dict(nodes)
        self.lane_width = float(lane_width)
        self.junction_half_size = float(junction_half_size)
        self.shoulder = float(shoulder)
        self.prop_density = float(prop_density)
        self.prop_seed = int(prop_seed)
        self.roads = []
        self.lanes: Dict[str, Lane] = {}
        self.graph = nx.Graph()
        self.lane_graph = nx.DiGraph()

        widest = max(profile.width for profile in PROFILES.values())
        if not self.lane_width > widest:
            raise MapFormatError(f"Map {name}: lane width {self.lane_width} must exceed every vehicle width ({widest})")

        for node, xy in self.nodes.items():
            self.graph.add_node(node, pos=tuple(map(float, xy)))
        for a, b in roads:
            self._add_road(a, b)
        for node in self.graph.nodes:
            if self.graph.degree[node] < 2:
                raise MapFormatError(f"Map {name}: junction {node} needs at least two roads, "
                                     f"has {self.graph.degree[node]}")

        for lane in self.lanes.values():
            self.lane_graph.add_node(lane.lane_id)
        for lane in self.lanes.values():
            for nxt in self.outgoing_lanes(lane.end_node):
                if nxt.end_node != lane.start_node:         # no U-turns
                    self.lane_graph.add_edge(lane.lane_id, nxt.lane_id)

        self.intersections = {
            node: Intersection(name=node, center=self.nodes[node], half_size=self.junction_half_size,
                               incoming=tuple(l.lane_id for l in self.lanes.values() if l.end_node == node),
                               outgoing=tuple(l.lane_id for l in self.lanes.values() if l.start_node == node))
            for node in self.nodes
        }
        self._build_region_arrays()
        self.props = self._generate_props()
        logger.debug(f"Road network {name}: {len(self.nodes)} junctions, {len(self.roads)} roads, "
                     f"{len(self.props)} roadside props")

    def _add_road(self, a: str, b: str):
        for node in (a, b):
            if node not in self.nodes:
                raise MapFormatError(f"Map {self.name}: road {a}-{b} references unknown junction {node}")
        (ax, ay), (bx, by) = self.nodes[a], self.nodes[b]
        if ax != bx and ay != by:
            raise MapFormatError(f"Map {self.name}: road {a}-{b} is not axis-aligned")
        length = math.hypot(bx - ax, by - ay)
        if length < 2 * self.junction_half_size + 10.0:
            raise MapFormatError(f"Map {self.name}: road {a}-{b} is too short ({length} m)")
        if self.graph.has_edge(a, b):
            raise MapFormatError(f"Map {self.name}: duplicate road {a}-{b}")
        self.graph.add_edge(a, b, length=length)
        self.roads.append((a, b))
        for start_node, end_node in ((a, b), (b, a)):
            lane = self._make_lane(start_node, end_node)
            self.lanes[lane.lane_id] = lane

    def _make_lane(self, start_node: str, end_node: str) -> Lane:
        p0, p1 = np.array(self.nodes[start_node], float), np.array(self.nodes[end_node], float)
        direction = (p1 - p0) / np.linalg.norm(p1 - p0)
        right = np.array([direction[1], -direction[0]])
        offset = right * self.lane_width / 2.0
        h = self.junction_half_size
        start = p0 + direction * h + offset
        end = p1 - direction * h + offset
        return Lane(lane_id=f"{start_node}>{end_node}", start_node=start_node, end_node=end_node,
                    start=(float(start[0]), float(start[1])), end=(float(end[0]), float(end[1])),
                    width=self.lane_width)

    def outgoing_lanes(self, node: str) -> List[Lane]:
        return [lane for lane in self.lanes.values() if lane.start_node == node]

    def next_lanes(self, lane_id: str) -> List[str]:
        return sorted(self.lane_graph.successors(lane_id))

    def _build_region_arrays(self):
        centers, dirs, half_len, half_wid, is_road = [], [], [], [], []
        for a, b in self.roads:
            p0, p1 = np.array(self.nodes[a], float), np.array(self.nodes[b], float)
            d = (p1 - p0) / np.linalg.norm(p1 - p0)
            centers.append((p0 + p1) / 2.0)
            dirs.append(d)
            half_len.append(np.linalg.norm(p1 - p0) / 2.0 - self.junction_half_size)
            half_wid.append(self.lane_width + self.shoulder)
            is_road.append(True)
        for xy in self.nodes.values():
            centers.append(np.array(xy, float))
            dirs.append(np.array([1.0, 0.0]))
            half_len.append(self.junction_half_size)
            half_wid.append(self.junction_half_size)
            is_road.append(False)
        self.rect_centers = np.array(centers)
        self.rect_dirs = np.array(dirs)
        self.rect_half_len = np.array(half_len)
        self.rect_half_wid = np.array(half_wid)
        self.rect_is_road = np.array(is_road)

    def rect_local(self, points: np.ndarray, mask: np.ndarray = None):
        """
        Coordinates of points in every region rectangle's frame.

        :return: (u, w, index) with u along and w across the rectangle, each shaped (N, R)
        """
        idx = np.arange(len(self.rect_centers)) if mask is None else np.flatnonzero(mask)
        rel = points[:, None, :] - self.rect_centers[None, idx, :]
        d = self.rect_dirs[idx]
        u = rel[..., 0] * d[:, 0] + rel[..., 1] * d[:, 1]
        w = -rel[..., 0] * d[:, 1] + rel[..., 1] * d[:, 0]
        return u, w, idx

    def contains(self, points, near: Tuple[float, float] = None, radius: float = None) -> np.ndarray:
        """
        Drivable-region membership for world points.

        :param points:  (N, 2) world points
        :param near:    Optional (x, y); only rectangles within `radius` of it are tested
        :param radius:  Search radius around `near`, meters
        :return:        (N,) bool
        """
        points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        mask = None
        if near is not None:
            reach = np.hypot(self.rect_half_len, self.rect_half_wid)
            mask = np.linalg.norm(self.rect_centers - np.asarray(near, float), axis=1) <= radius + reach
            if not mask.any():
                return np.zeros(len(points), dtype=bool)
        u, w, idx = self.rect_local(points, mask)
        inside = (np.abs(u) <= self.rect_half_len[idx]) & (np.abs(w) <= self.rect_half_wid[idx])
        return inside.any(axis=1)

    def _generate_props(self) -> List[Box]:
        if self.prop_density <= 0:
            return []
        rng = derive_rng(self.prop_seed, "props", self.name)
        props = []
        for a, b in self.roads:
            p0, p1 = np.array(self.nodes[a], float), np.array(self.nodes[b], float)
            length = np.linalg.norm(p1 - p0)
            d = (p1 - p0) / length
            left = np.array([-d[1], d[0]])
            usable = length - 2 * (self.junction_half_size + 4.0)
            for side in (-1.0, 1.0):
                count = rng.poisson(self.prop_density * usable)
                for _ in range(count):
                    along = self.junction_half_size + 4.0 + rng.uniform(0, usable)
                    size_l, size_w = rng.uniform(2.0, 6.0), rng.uniform(1.5, 4.0)
                    across = self.lane_width + self.shoulder + 2.0 + size_w / 2.0 + rng.uniform(0.0, 4.0)
                    c = p0 + d * along + side * left * across
                    corners = c + np.array([[sx * size_l / 2, sy * size_w / 2] for sx in (-1, 1) for sy in (-1, 1)]) \
                        @ np.array([d, left])
                    if self.contains(corners).any():
                        continue
                    props.append(Box(x=float(c[0]), y=float(c[1]), yaw=math.atan2(d[1], d[0]),
                                     length=float(size_l), width=float(size_w),
                                     height=float(rng.uniform(2.0, 8.0))))
        return props

    @property
    def bounds(self) -> Tuple[float, float, float, float]:
        xy = np.array(list(self.nodes.values()), float)
        margin = self.junction_half_size + 20.0
        return (xy[:, 0].min() - margin, xy[:, 1].min() - margin, xy[:, 0].max() + margin, xy[:, 1].max() + margin)

    def in_bounds(self, x: float, y: float) -> bool:
        x0, y0, x1, y1 = self.bounds
        return x0 <= x <= x1 and y0 <= y <= y1


def parse_map(text: str, source: str = "<string>") -> RoadNetwork:
    """
    Parse the plain-text map format (see sim_world/README.md).

    EXAMPLE:
        name = town-x
        lane_width = 4.0
        node A = 0 0
        node B = 120 0
        node C = 120 120
        node D = 0 120
        road = A B C D A

    :param text:    Map file content
    :param source:  Name used in error messages
    :return:        RoadNetwork
    """
    settings = {}
    nodes = {}
    roads = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise MapFormatError(f"{source}:{lineno}: expected `key = value`, got `{raw.strip()}`")
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            if key.startswith("node "):
                name = key[len("node "):].strip()
                x, y = (float(v) for v in value.split())
                if name in nodes:
                    raise MapFormatError(f"{source}:{lineno}: duplicate node {name}")
                nodes[name] = (x, y)
            elif key == "road":
                chain = value.split()
                if len(chain) < 2:
                    raise MapFormatError(f"{source}:{lineno}: a road needs at least two junctions")
                roads.extend(zip(chain[:-1], chain[1:]))
            elif key == "name":
                settings[key] = value
            elif key in ("lane_width", "junction_half_size", "shoulder", "prop_density"):
                settings[key] = float(value)
            elif key == "prop_seed":
                settings[key] = int(value)
            else:
                raise MapFormatError(f"{source}:{lineno}: unknown key `{key}`")
        except ValueError as e:
            raise MapFormatError(f"{source}:{lineno}: cannot parse `{raw.strip()}` ({e})")
    if "name" not in settings:
        raise MapFormatError(f"{source}: missing `name`")
    if not roads:
        raise MapFormatError(f"{source}: no roads defined")
    return RoadNetwork(nodes=nodes, roads=roads, **settings)


_MAP_CACHE = {}


def load_map(map_id: str) -> RoadNetwork:
    """
    Load a bundled map by id ("town-a", "town-b") or a map file by path. Bundled maps are cached.
    """
    if map_id in _MAP_CACHE:
        return _MAP_CACHE[map_id]
    if map_id in BUNDLED_MAPS:
        path = os.path.join(MAPS_FOLDER, f"{map_id}.map")
    elif os.path.isfile(map_id):
        path = map_id
    else:
        raise InvalidArgumentError(f"Unknown map `{map_id}`; bundled maps are {list(BUNDLED_MAPS)}")
    with open(path) as file:
        network = parse_map(file.read(), source=path)
    _MAP_CACHE[map_id] = network
    return network
