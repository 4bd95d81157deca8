from geometry.pose import Pose2D, TimedSample, BodyPoint, Trajectory, normalize_angle, normalize_angles, \
    world_to_body, body_to_world, interpolate_track, HISTORY_LEN, HORIZON, FRAME_DT
