from expert.driver import ExpertConfig, ExpertAction, ExpertDriver, expert_controls, expert_action, \
    pure_pursuit_steer, speed_target, corridor_blocked, TARGET_SPEED
from expert.episode import TickRecord, EpisodeLog, EpisodeStatus, collect_episode, label_commands, save_episode, \
    load_episode, list_episodes, noise_tick_mask, collision_ticks, is_clean, episode_summary, read_frame, write_frame
from expert.collection import CollectConfig, collect_episodes, collection_totals, episode_seed
