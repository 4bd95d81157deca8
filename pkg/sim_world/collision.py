from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from geometry import Pose2D
from sim_world.vehicle import footprint, vehicle_footprint
from sim_world.world import WorldState

OFF_ROAD_SEARCH_RADIUS = 10.0


class CollisionKind(str, Enum):
    AGENT = "agent"
    OFF_ROAD = "off-road"


@dataclass(frozen=True)
class CollisionEvent:
    kind: CollisionKind
    time: float
    other_id: Optional[str] = None


def _axes(polygon: np.ndarray) -> np.ndarray:
    edges = np.roll(polygon, -1, axis=0) - polygon
    normals = np.stack([-edges[:, 1], edges[:, 0]], axis=1)
    return normals / np.linalg.norm(normals, axis=1, keepdims=True)


def polygons_intersect(a: np.ndarray, b: np.ndarray) -> bool:
    """Separating-axis test for two convex polygons given as (N, 2) vertex arrays; touching counts as contact"""
    for axis in np.concatenate([_axes(a), _axes(b)]):
        pa, pb = a @ axis, b @ axis
        if pa.max() < pb.min() or pb.max() < pa.min():
            return False
    return True


def _sample_outline(polygon: np.ndarray) -> np.ndarray:
    """Corners plus edge midpoints"""
    return np.concatenate([polygon, (polygon + np.roll(polygon, -1, axis=0)) / 2.0])


def check_collision(world: WorldState) -> Optional[CollisionEvent]:
    """
    The first contact of the ego this tick: an active agent, a roadside prop, or leaving the drivable region.

    :param world:   World to test
    :return:        CollisionEvent, or None
    """
    ego_box = vehicle_footprint(world.ego, world.profile)
    for agent in world.active_agents:
        if polygons_intersect(ego_box, footprint(agent.pose, agent.length, agent.width)):
            return CollisionEvent(CollisionKind.AGENT, world.time, f"{agent.kind.value}-{agent.agent_id}")

    network = world.network
    for i, prop in enumerate(network.props):
        if abs(prop.x - world.ego.pose.x) > 15.0 or abs(prop.y - world.ego.pose.y) > 15.0:
            continue
        if polygons_intersect(ego_box, footprint(Pose2D(prop.x, prop.y, prop.yaw), prop.length, prop.width)):
            return CollisionEvent(CollisionKind.OFF_ROAD, world.time, f"prop-{i}")

    outline = _sample_outline(ego_box)
    inside = network.contains(outline, near=(world.ego.pose.x, world.ego.pose.y), radius=OFF_ROAD_SEARCH_RADIUS)
    if not inside.all():
        return CollisionEvent(CollisionKind.OFF_ROAD, world.time)
    return None
