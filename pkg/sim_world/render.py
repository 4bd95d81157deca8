"""
Egocentric front-camera rasterizer.

A pinhole camera sits above the ego, pitched down. Every pixel whose ray meets the ground within
`max_range` is classified as road, plaza, lane marking or off-road; agents and roadside props are
drawn as upright billboards at the depth of their nearest corner, far to near. A weather filter is
applied last and the result is quantized to 1/255 steps.
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple

import numpy as np

from geometry import Pose2D, world_to_body
from sim_world.agents import AgentKind
from sim_world.vehicle import footprint
from sim_world.world import Weather, WorldState
from utils.exceptions import InvalidArgumentError, OutOfRangeError
from utils.utils import derive_rng

SKY = np.array([0.55, 0.68, 0.85])
OFF_ROAD = np.array([0.22, 0.36, 0.20])
ROAD = np.array([0.38, 0.38, 0.40])
MARKING = np.array([0.92, 0.92, 0.88])
COLORS = {
    AgentKind.VEHICLE: np.array([0.75, 0.12, 0.10]),
    AgentKind.PEDESTRIAN: np.array([0.95, 0.80, 0.20]),
    "prop": np.array([0.48, 0.36, 0.28]),
}
DASH_PERIOD = 6.0
DASH_LENGTH = 3.0
MARKING_HALF_WIDTH = 0.15


@dataclass(frozen=True)
class RenderConfig:
    height: int = 96
    width: int = 96
    camera_height: float = 1.6
    pitch: float = 0.10
    hfov_deg: float = 90.0
    max_range: float = 60.0
    forward_offset: float = 1.5
    fog_distance: float = 25.0
    fog_gray: float = 0.75
    sunset_gain: Tuple[float, float, float] = (1.15, 0.85, 0.65)
    sunset_brightness: float = 0.8
    rain_darken: float = 0.85
    rain_blur_mix: float = 0.5
    rain_speckle_p: float = 0.02
    rain_speckle_gain: float = 0.45

    def __post_init__(self):
        if self.height < 4 or self.width < 4:
            raise InvalidArgumentError(f"Render size {self.height}x{self.width} is too small")
        if not 0 < self.hfov_deg < 180:
            raise InvalidArgumentError(f"hfov_deg must lie in (0, 180), got {self.hfov_deg}")
        object.__setattr__(self, "sunset_gain", tuple(float(g) for g in self.sunset_gain))

    @property
    def focal(self) -> float:
        return (self.width / 2.0) / math.tan(math.radians(self.hfov_deg) / 2.0)

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.height, self.width, 3


@dataclass(frozen=True, eq=False)
class Observation:
    """H x W x 3 intensities in [0, 1], quantized to 1/255 steps"""
    pixels: np.ndarray
    frame_time: float = 0.0

    def to_uint8(self) -> np.ndarray:
        return np.round(self.pixels * 255.0).astype(np.uint8)

    @classmethod
    def from_uint8(cls, raster: np.ndarray, frame_time: float = 0.0) -> "Observation":
        return cls(np.asarray(raster, dtype=np.float64) / 255.0, frame_time)

    def __eq__(self, other):
        if not isinstance(other, Observation):
            return NotImplemented
        return self.frame_time == other.frame_time and np.array_equal(self.pixels, other.pixels)


@lru_cache(maxsize=8)
def ground_lookup(config: RenderConfig):
    """
    Per-pixel ground intersection in the camera's body frame.

    :return: (lateral, forward, is_ground); lateral/forward are NaN where the ray misses the ground
             or lands beyond max_range
    """
    f, theta, hc = config.focal, config.pitch, config.camera_height
    u = np.arange(config.width) + 0.5 - config.width / 2.0
    v = np.arange(config.height) + 0.5 - config.height / 2.0
    uu, vv = np.meshgrid(u, v)
    denominator = vv * math.cos(theta) + f * math.sin(theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(denominator > 1e-9, hc / denominator, np.nan)
    lateral = uu * t
    forward = (f * math.cos(theta) - vv * math.sin(theta)) * t
    is_ground = np.isfinite(t) & (forward > 0) & (np.hypot(lateral, forward) <= config.max_range)
    lateral = np.where(is_ground, lateral, np.nan)
    forward = np.where(is_ground, forward, np.nan)
    for arr in (lateral, forward, is_ground):
        arr.setflags(write=False)
    return lateral, forward, is_ground


def camera_pose(world: WorldState, config: RenderConfig) -> Pose2D:
    pose = world.ego.pose
    return Pose2D(pose.x + config.forward_offset * math.cos(pose.yaw),
                  pose.y + config.forward_offset * math.sin(pose.yaw), pose.yaw)


def _project(lateral: float, forward: float, up: float, config: RenderConfig) -> Tuple[float, float]:
    """Image-plane (u, v) of a point in camera body coordinates, up measured from the camera"""
    f, theta = config.focal, config.pitch
    depth = forward * math.cos(theta) - up * math.sin(theta)
    return f * lateral / depth, f * (-forward * math.sin(theta) - up * math.cos(theta)) / depth


def _paint_ground(img: np.ndarray, depth: np.ndarray, world: WorldState, cam: Pose2D, config: RenderConfig):
    lateral, forward, is_ground = ground_lookup(config)
    rows, cols = np.nonzero(is_ground)
    x_b, y_b = lateral[rows, cols], forward[rows, cols]
    c, s = math.cos(cam.yaw), math.sin(cam.yaw)
    points = np.stack([cam.x + y_b * c + x_b * s, cam.y + y_b * s - x_b * c], axis=1)
    depth[rows, cols] = np.hypot(x_b, y_b)
    img[rows, cols] = OFF_ROAD

    network = world.network
    inside = network.contains(points, near=(cam.x, cam.y), radius=config.max_range + 5.0)
    img[rows[inside], cols[inside]] = ROAD

    reach = np.hypot(network.rect_half_len, network.rect_half_wid)
    near = network.rect_is_road & (np.linalg.norm(network.rect_centers - (cam.x, cam.y), axis=1)
                                   <= config.max_range + 5.0 + reach)
    if not near.any() or not inside.any():
        return
    on_road = points[inside]
    u, w, idx = network.rect_local(on_road, near)
    half_len, half_wid = network.rect_half_len[idx], network.rect_half_wid[idx]
    in_rect = (np.abs(u) <= half_len) & (np.abs(w) <= half_wid)
    dashed = (np.abs(w) < MARKING_HALF_WIDTH) & (np.mod(u + half_len, DASH_PERIOD) < DASH_LENGTH)
    edge = (np.abs(w) > network.lane_width - 0.35) & (np.abs(w) < network.lane_width - 0.1)
    marking = (in_rect & (dashed | edge)).any(axis=1)
    img[rows[inside][marking], cols[inside][marking]] = MARKING


def _scene_boxes(world: WorldState, cam: Pose2D, config: RenderConfig):
    """(color, pose, length, width, height) for every agent and prop that can appear in view"""
    boxes = []
    for agent in world.active_agents:
        boxes.append((COLORS[agent.kind], agent.pose, agent.length, agent.width, agent.height))
    for prop in world.network.props:
        if math.hypot(prop.x - cam.x, prop.y - cam.y) <= config.max_range + 10.0:
            boxes.append((COLORS["prop"], Pose2D(prop.x, prop.y, prop.yaw), prop.length, prop.width, prop.height))
    return boxes


def _paint_objects(img: np.ndarray, depth: np.ndarray, world: WorldState, cam: Pose2D, config: RenderConfig):
    drawn = []
    for color, pose, length, width, height in _scene_boxes(world, cam, config):
        body = world_to_body(footprint(pose, length, width), cam)
        if body[:, 1].max() < 0.5:
            continue
        d = max(float(body[:, 1].min()), 0.5)
        if d > config.max_range:
            continue
        drawn.append((d, color, float(body[:, 0].min()), float(body[:, 0].max()), height))

    H, W = config.height, config.width
    hc = config.camera_height
    for d, color, x_min, x_max, height in sorted(drawn, key=lambda item: -item[0]):
        u0, v_bottom = _project(x_min, d, -hc, config)
        u1, v_top = _project(x_max, d, -hc + height, config)
        c0 = max(int(math.ceil(u0 + W / 2.0 - 0.5)), 0)
        c1 = min(int(math.floor(u1 + W / 2.0 - 0.5)), W - 1)
        r0 = max(int(math.ceil(v_top + H / 2.0 - 0.5)), 0)
        r1 = min(int(math.floor(v_bottom + H / 2.0 - 0.5)), H - 1)
        if c0 > c1 or r0 > r1:
            continue
        img[r0:r1 + 1, c0:c1 + 1] = color
        depth[r0:r1 + 1, c0:c1 + 1] = d


def blur3(img: np.ndarray) -> np.ndarray:
    """3x3 box blur with edge padding"""
    padded = np.pad(img, ((1, 1), (1, 1), (0, 0)), mode="edge")
    H, W = img.shape[:2]
    return sum(padded[i:i + H, j:j + W] for i in range(3) for j in range(3)) / 9.0


def apply_speckle(img: np.ndarray, rng: np.random.Generator, p: float, gain: float) -> np.ndarray:
    """Brighten a random fraction p of the pixels by `gain` (rain drops)"""
    mask = rng.random(img.shape[:2]) < p
    out = img.copy()
    out[mask] = out[mask] + gain
    return np.clip(out, 0.0, 1.0)


def apply_weather(img: np.ndarray, depth: np.ndarray, weather: Weather, config: RenderConfig,
                  rng: np.random.Generator) -> np.ndarray:
    if weather in (Weather.CLEAR_SUNSET, Weather.RAINY_SUNSET):
        img = img * np.array(config.sunset_gain) * config.sunset_brightness
    if weather == Weather.FOGGY_DAY:
        alpha = (0.2 + 0.8 * (1.0 - np.exp(-depth / config.fog_distance)))[..., None]
        img = (1.0 - alpha) * img + alpha * config.fog_gray
    if weather in (Weather.RAINY_DAY, Weather.RAINY_SUNSET):
        img = img * config.rain_darken
        img = (1.0 - config.rain_blur_mix) * img + config.rain_blur_mix * blur3(img)
        img = apply_speckle(img, rng, config.rain_speckle_p, config.rain_speckle_gain)
    return np.clip(img, 0.0, 1.0)


def quantize(img: np.ndarray) -> np.ndarray:
    return np.round(np.clip(img, 0.0, 1.0) * 255.0) / 255.0


def render_observation(world: WorldState, weather: Weather = None,
                       config: RenderConfig = None) -> Observation:
    """
    Render the ego's front view.

    :param world:   World to render; the ego must be inside the map bounds
    :param weather: Weather styling, defaults to world.weather
    :param config:  Camera and filter parameters
    :return:        Observation of shape config.shape
    """
    config = config or RenderConfig()
    weather = world.weather if weather is None else Weather.parse(weather)
    if not world.network.in_bounds(world.ego.pose.x, world.ego.pose.y):
        raise OutOfRangeError(f"Ego at ({world.ego.pose.x:.1f}, {world.ego.pose.y:.1f}) is outside map "
                              f"{world.network.name}")
    cam = camera_pose(world, config)
    img = np.empty(config.shape, dtype=np.float64)
    img[:] = SKY
    depth = np.full(config.shape[:2], config.max_range, dtype=np.float64)
    _paint_ground(img, depth, world, cam, config)
    _paint_objects(img, depth, world, cam, config)
    img = apply_weather(img, depth, weather, config, derive_rng(world.seed, "rain", world.tick))
    return Observation(quantize(img), world.time)
