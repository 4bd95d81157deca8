from controller.pid import PidGains, PidState, pid_step
from controller.tracking import ControllerGains, TrackerState, TrajectoryTracker, DEFAULT_GAINS, default_gains, \
    track_trajectory, preview_target, steering_error, trajectory_from_path
