from dataset.records import FrameRecord, Behavior, build_records, behavior_class, drop_noise_windows, motion_history, \
    BRAKE_SPEED_RATIO
from dataset.balance import Quota, BalanceQuotas, balance, cell_of, command_name, command_histogram
from dataset.split import DatasetManifest, split, split_counts, SPLITS
from dataset.store import Dataset, FrameStore, save_dataset, load_dataset
from dataset.pipeline import DatasetConfig, build_dataset
