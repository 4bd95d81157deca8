from sim_world.vehicle import VehicleProfile, VehicleState, CAR, MOTORCYCLE, PROFILES, get_profile, step_vehicle, \
    footprint, vehicle_footprint
from sim_world.road_network import RoadNetwork, Lane, Intersection, Box, parse_map, load_map, BUNDLED_MAPS
from sim_world.route import Route, Command, TurnEvent, route_command, plan_random_route, plan_route, timeout_for
from sim_world.noise import NoiseSchedule, NoiseWindow, inject_steer_noise
from sim_world.agents import Agent, AgentKind, LaneFollowerPolicy, CrosserPolicy, make_vehicle, make_pedestrian, \
    spawn_agents
from sim_world.world import Weather, WorldState, make_world, make_episode_world, step_world
from sim_world.collision import CollisionEvent, CollisionKind, check_collision, polygons_intersect
from sim_world.render import RenderConfig, Observation, render_observation, apply_speckle
