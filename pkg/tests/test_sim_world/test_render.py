import numpy as np
import pytest

from geometry import Pose2D
from sim_world import render_observation, RenderConfig, Agent, AgentKind, Weather, apply_speckle
from sim_world.render import ROAD, OFF_ROAD, COLORS, quantize
from tests.world_builders import straight_world, lane_center_y, small_render_config
from utils.exceptions import OutOfRangeError


def car_ahead(world, distance, config):
    """A parked car whose rear bumper sits `distance` meters in front of the camera"""
    x = world.ego.pose.x + config.forward_offset + distance + 2.25
    return Agent(agent_id=1, kind=AgentKind.VEHICLE, pose=Pose2D(x, lane_center_y(), 0.0), speed=0.0,
                 length=4.5, width=1.9, height=1.5)


def color_mask(pixels, color):
    return np.all(np.abs(pixels - quantize(color)) < 1e-9, axis=2)


def test_straight_road_is_mirror_symmetric():
    config = RenderConfig(max_range=30.0)
    obs = render_observation(straight_world(x=60.0, y=0.0), Weather.CLEAR_DAY, config)
    pixels = obs.pixels
    assert pixels.shape == (96, 96, 3)
    assert color_mask(pixels, ROAD).sum() > 100
    assert color_mask(pixels, OFF_ROAD).sum() > 100
    assert np.abs(pixels - pixels[:, ::-1]).max() <= 1.0 / 255.0 + 1e-12


def test_fog_lowers_contrast():
    world = straight_world()
    clear = render_observation(world, Weather.CLEAR_DAY).pixels
    foggy = render_observation(world, Weather.FOGGY_DAY).pixels
    assert foggy.std() < clear.std()


def test_near_agent_is_larger():
    config = RenderConfig()
    base = straight_world(x=40.0)
    near = straight_world(x=40.0, agents=[car_ahead(base, 5.0, config)])
    far = straight_world(x=40.0, agents=[car_ahead(base, 20.0, config)])
    vehicle = COLORS[AgentKind.VEHICLE]
    n_near = color_mask(render_observation(near, config=config).pixels, vehicle).sum()
    n_far = color_mask(render_observation(far, config=config).pixels, vehicle).sum()
    assert n_near > n_far > 0


@pytest.mark.parametrize('weather', list(Weather))
def test_render_is_pure_and_bounded(weather):
    world = straight_world(seed=4)
    config = small_render_config()
    a = render_observation(world, weather, config)
    b = render_observation(world, weather, config)
    assert a == b
    assert a.pixels.shape == (32, 32, 3)
    assert a.pixels.min() >= 0.0 and a.pixels.max() <= 1.0
    np.testing.assert_array_equal(np.round(a.pixels * 255) / 255, a.pixels)


def test_weathers_differ():
    world = straight_world()
    config = small_render_config()
    renders = [render_observation(world, weather, config).pixels for weather in Weather]
    for i in range(len(renders)):
        for j in range(i + 1, len(renders)):
            assert not np.array_equal(renders[i], renders[j])


def test_uint8_round_trip():
    obs = render_observation(straight_world(), config=small_render_config())
    assert obs.to_uint8().dtype == np.uint8
    np.testing.assert_array_equal(type(obs).from_uint8(obs.to_uint8()).pixels, obs.pixels)


def test_speckle_fraction():
    img = np.zeros((200, 200, 3))
    out = apply_speckle(img, np.random.default_rng(0), 0.2, 0.45)
    assert np.mean(out[..., 0] > 0) == pytest.approx(0.2, abs=0.01)


def test_outside_map_bounds():
    with pytest.raises(OutOfRangeError):
        render_observation(straight_world(x=5000.0))
