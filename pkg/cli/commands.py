"""
One function per subcommand. Each takes the parsed arguments and the resolved RunConfig, writes its outputs plus
resolved_config.yaml and run_meta.json into its output directory, and returns the process exit code.
"""

import json
import os
from dataclasses import replace
from datetime import datetime, timezone

import numpy as np
import pandas as pd

from cli.config import RunConfig, RESOLVED_CONFIG_FILE
from dataset import build_dataset, load_dataset
from evaluation import (predict_split, sample_table, evaluate_predictions, breakdown,
                        comparison_table, style_comparison, run_addnoise_benchmark, ModelPlanner, ExpertReplayPlanner,
                        NullPlanner, scalar_uncertainty, calibrate_threshold, uncertainty_capture, corruption_probe,
                        attention_table, feature_maps, save_feature_maps)
from expert import collect_episodes, collection_totals, list_episodes
from logger.logger import logger
from models import TrajectoryNet, DatasetData, load_model, train
from nn import run_grad_checks
from utils import version_string, write_json, summarize_dataframe
from utils.exceptions import ConfigError, ShapeMismatchError, VerificationError

RUN_META_FILE = "run_meta.json"
EXIT_OK = 0
EXIT_GATE = 5


def output_folder(args, run: RunConfig, command: str) -> str:
    directory = args.output or os.path.join(run.output_dir, command)
    os.makedirs(directory, exist_ok=True)
    return directory


def write_run_files(directory: str, run: RunConfig, command: str, **extra) -> None:
    """resolved_config.yaml and run_meta.json; created_at is the only wall-clock field"""
    with open(os.path.join(directory, RESOLVED_CONFIG_FILE), "w") as f:
        f.write(run.dump())
    write_json(os.path.join(directory, RUN_META_FILE),
               {"version": version_string(), "seed": run.seed, "command": command, "config": run.tree, **extra,
                "created_at": datetime.now(timezone.utc).isoformat()})


def _check_image_size(model: TrajectoryNet, dataset) -> None:
    expected = (*model.config.image_size, 3)
    if tuple(dataset.manifest.obs_shape) != expected:
        raise ShapeMismatchError(f"Dataset observations are {tuple(dataset.manifest.obs_shape)} but the model "
                                 f"expects {expected}")


def cmd_collect(args, run: RunConfig) -> int:
    config = run.collect()
    if args.episodes is not None:
        config = replace(config, episodes_per_weather=args.episodes)
    if args.weathers:
        config = replace(config, weathers=tuple(args.weathers))
    directory = output_folder(args, run, "episodes")
    summary = collect_episodes(config, directory, run.seed, run.jobs)
    summary.to_csv(os.path.join(directory, "collection_summary.csv"), index=False)
    hours, km = collection_totals(summary)
    print(f"{len(summary)} episodes, {hours:.2f} h, {km:.2f} km")
    write_run_files(directory, run, "collect", episodes=len(summary), hours=hours, km=km)
    return EXIT_OK


def cmd_build_dataset(args, run: RunConfig) -> int:
    directory = output_folder(args, run, "dataset")
    records, manifest = build_dataset(list_episodes(args.episodes), directory, run.dataset(), run.seed, run.jobs)
    for name, indices in manifest.splits.items():
        logger.info(f"{name}: {len(indices)} records from {len(manifest.episodes[name])} episodes")
    write_run_files(directory, run, "build-dataset", records=len(records))
    return EXIT_OK


def cmd_train(args, run: RunConfig) -> int:
    dataset = load_dataset(args.dataset)
    model = TrajectoryNet(run.model(args.variant), seed=run.seed)
    _check_image_size(model, dataset)
    directory = output_folder(args, run, f"train-{model.variant.value}")
    result = train(model, DatasetData(dataset), run.train(), run.seed, directory)
    logger.info(f"Best validation loss {result.best_val_loss:.5f} at step {result.best_step}"
                f"{' (stopped early)' if result.stopped_early else ''}")
    write_run_files(directory, run, "train", variant=model.variant.value, best_step=result.best_step,
                    best_val_loss=result.best_val_loss, checkpoint=result.checkpoint)
    return EXIT_OK


def _style_groups(predictions, trajectories: np.ndarray, by: str = "weather") -> dict:
    return {value: list(trajectories[rows]) for value, rows in predictions.samples.groupby(by).indices.items()}


def cmd_eval_open(args, run: RunConfig) -> int:
    dataset = load_dataset(args.dataset)
    directory = output_folder(args, run, "eval-open")
    reports = {}
    for path in args.checkpoints:
        model, _ = load_model(path)
        _check_image_size(model, dataset)
        name = args.names[len(reports)] if args.names else model.variant.value
        if name in reports:
            name = f"{name}-{len(reports)}"
        predictions = predict_split(model, dataset, args.split, max_samples=args.max_samples)
        reports[name] = evaluate_predictions(predictions)
        table = sample_table(predictions)
        table.to_csv(os.path.join(directory, f"samples_{name}.csv"), index=False)
        for by in ("weather", "command", "behavior"):
            breakdown(table, by).to_csv(os.path.join(directory, f"by_{by}_{name}.csv"), index=False)
        reports[name].horizon_curves().to_csv(os.path.join(directory, f"horizon_{name}.csv"), index=False)
        style = style_comparison(_style_groups(predictions, predictions.truth),
                                 _style_groups(predictions, predictions.trajectory))
        style.to_csv(os.path.join(directory, f"style_{name}.csv"), index=False)
    table = comparison_table(reports)
    table.to_csv(os.path.join(directory, "metrics_table.csv"), index=False)
    summarize_dataframe(table, f"open-loop metrics on the {args.split} split")
    write_run_files(directory, run, "eval-open", checkpoints=list(args.checkpoints), split=args.split)
    return EXIT_OK


def _planner(args):
    if args.planner == "expert-replay":
        return ExpertReplayPlanner(), None
    if args.planner == "null":
        return NullPlanner(), None
    if not args.checkpoint:
        raise ConfigError("eval-closed with the model planner needs --checkpoint")
    planner = ModelPlanner.from_checkpoint(args.checkpoint)
    return planner, planner.model


def _threshold(args, run: RunConfig, model: TrajectoryNet):
    """The configured uncertainty threshold, or one calibrated on the validation split; None without either"""
    section = run.section("benchmark")
    if section["threshold"] is not None:
        return float(section["threshold"]), None
    if not args.dataset:
        if section["takeover"]:
            raise ConfigError("Takeover needs benchmark.threshold or a --dataset to calibrate it on")
        logger.warning("No threshold and no --dataset: the uncertainty capture analysis is skipped")
        return None, None
    dataset = load_dataset(args.dataset)
    _check_image_size(model, dataset)
    predictions = predict_split(model, dataset, "val")
    threshold = calibrate_threshold([scalar_uncertainty(predictions.log_var, section["uncertainty_summary"])],
                                    section["calibration_percentile"])
    logger.info(f"Uncertainty threshold {threshold:.4f} ({section['calibration_percentile']}th percentile of "
                f"{len(predictions)} validation samples)")
    return threshold, dataset


def cmd_eval_closed(args, run: RunConfig) -> int:
    section = run.section("benchmark")
    planner, model = _planner(args)
    threshold, dataset = None, None
    if model is not None and model.variant.has_uncertainty:
        threshold, dataset = _threshold(args, run, model)
    elif section["takeover"]:
        raise ConfigError(f"benchmark.takeover needs a model with an uncertainty head, not {planner.name}")
    config = run.benchmark(takeover_threshold=threshold if section["takeover"] else None)
    directory = output_folder(args, run, "eval-closed")
    target = args.checkpoint if model is not None else planner
    result = run_addnoise_benchmark(target, config, run.seed, directory, run.jobs)
    summarize_dataframe(result.success_grid(), "success rate (%)")
    extra = {"model": result.model, "threshold": threshold}

    if threshold is not None:
        capture = uncertainty_capture(result, threshold, section["capture_window"])
        write_json(os.path.join(directory, "capture.json"), capture.to_dict())
        logger.info(f"{capture.n_captured} of {capture.n_failures} failures announced by the uncertainty "
                    f"(false alarm rate {capture.false_alarm_rate:.3f})")
        dataset = dataset or (load_dataset(args.dataset) if args.dataset else None)
        if dataset is not None:
            records = dataset.split("test")[:section["corruption_samples"]]
            if records:
                probe = corruption_probe(model, np.stack([dataset.observations(r) for r in records]),
                                         np.stack([r.motion for r in records]),
                                         np.array([int(r.command) for r in records]), threshold, seed=run.seed,
                                         factor=section["corruption_factor"],
                                         summary=section["uncertainty_summary"], render=run.render())
                probe.to_csv(os.path.join(directory, "corruption.csv"), index=False)

    write_run_files(directory, run, "eval-closed", **extra)
    if not result.passes_gate():
        logger.error(f"Success rate below the gate of {config.min_success_rate}%")
        return EXIT_GATE
    return EXIT_OK


def cmd_grad_check(args, run: RunConfig) -> int:
    directory = output_folder(args, run, "grad-check")
    table = run_grad_checks(tuple(range(args.seeds)))
    table.to_csv(os.path.join(directory, "grad_check.csv"), index=False)
    worst = table.groupby("op")["max_rel_error"].max()
    for op, error in worst.items():
        print(f"{op:24s} {error:.3e}")
    write_run_files(directory, run, "grad-check", passed=bool(table["passed"].all()))
    failed = sorted(set(table.loc[~table["passed"], "op"]))
    if failed:
        raise VerificationError(f"Gradient check failed for {failed}")
    return EXIT_OK


def _selected(dataset, split: str, count: int, start: int = 0):
    records = dataset.split(split)[start:start + count]
    if not records:
        raise ConfigError(f"No {split} records from index {start}")
    return records


def cmd_dump_attention(args, run: RunConfig) -> int:
    model, _ = load_model(args.checkpoint)
    dataset = load_dataset(args.dataset)
    _check_image_size(model, dataset)
    records = _selected(dataset, args.split, args.samples, args.start)
    directory = output_folder(args, run, "attention")
    table = attention_table(model, np.stack([dataset.observations(r) for r in records]),
                            np.stack([r.motion for r in records]), np.array([int(r.command) for r in records]),
                            ids=[f"{r.episode_id}@{r.tick}" for r in records])
    table.to_csv(os.path.join(directory, "attention.csv"), index=False)
    for _, row in table.iterrows():
        logger.info(f"{row['sample']}: entropy {row['entropy']:.3f} nats")
    write_run_files(directory, run, "dump-attention", checkpoint=args.checkpoint)
    return EXIT_OK


def cmd_dump_features(args, run: RunConfig) -> int:
    model, _ = load_model(args.checkpoint)
    dataset = load_dataset(args.dataset)
    _check_image_size(model, dataset)
    directory = output_folder(args, run, "features")
    written = []
    for record in _selected(dataset, args.split, args.samples, args.start):
        maps = feature_maps(model, dataset.observations(record)[-1], int(record.command))
        written += save_feature_maps(maps, directory, prefix=f"{record.episode_id}-{record.tick}-")
    logger.info(f"Wrote {len(written)} feature maps to {directory}")
    write_run_files(directory, run, "dump-features", checkpoint=args.checkpoint, files=len(written))
    return EXIT_OK


REPORT_TABLES = (("metrics_table.csv", "Open-loop metrics"), ("summary.csv", "Closed-loop benchmark"),
                 ("corruption.csv", "Corruption probe"), ("grad_check.csv", "Gradient checks"),
                 ("collection_summary.csv", "Collection"))


def cmd_report(args, run: RunConfig) -> int:
    """Gather the tables of earlier runs into one markdown file"""
    lines = [f"# Run report ({version_string()})", ""]
    for folder in args.runs:
        lines += [f"## {folder}", ""]
        for file_name, title in REPORT_TABLES:
            path = os.path.join(folder, file_name)
            if os.path.isfile(path):
                lines += [f"### {title}", "", "```", pd.read_csv(path).to_string(index=False), "```", ""]
        capture = os.path.join(folder, "capture.json")
        if os.path.isfile(capture):
            with open(capture) as f:
                content = json.load(f)
            lines += ["### Uncertainty capture", "",
                      f"{content['n_captured']} of {content['n_failures']} failures captured at threshold "
                      f"{content['threshold']:.4f}, false alarm rate {content['false_alarm_rate']:.3f}", ""]
    directory = output_folder(args, run, "report")
    with open(os.path.join(directory, "report.md"), "w") as f:
        f.write("\n".join(lines))
    write_run_files(directory, run, "report", runs=list(args.runs))
    return EXIT_OK
