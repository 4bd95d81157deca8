from evaluation.metrics import METRIC_COLUMNS, MetricsReport, open_loop_metrics, batch_metrics, aggregate_metrics, \
    accelerations, displacements, comparison_table
from evaluation.style import driving_style, style_comparison, STYLE_COLUMNS
from evaluation.uncertainty import scalar_uncertainty, calibrate_threshold, uncertainty_capture, CaptureReport, \
    corrupt_observations, corruption_probe, UNCERTAINTY_SUMMARIES, CAPTURE_WINDOW, CORRUPTION_FACTOR
from evaluation.open_loop import Predictions, predict_records, predict_split, sample_table, evaluate_predictions, \
    breakdown
from evaluation.planners import Plan, Planner, ModelPlanner, ExpertReplayPlanner, NullPlanner
from evaluation.benchmark import BenchmarkConfig, BenchmarkResult, EpisodeSpec, EpisodeResult, Outcome, \
    run_addnoise_benchmark, run_episode, episode_specs, benchmark_preset, BENCHMARK_PRESETS, REFERENCE_SUCCESS, \
    TRAFFIC, SETUPS
from evaluation.diagnostics import attention_table, feature_maps, save_feature_maps, to_raster
from sim_world import timeout_for
