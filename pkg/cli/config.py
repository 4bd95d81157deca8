"""
Run configuration: one YAML tree per run, sections mapped onto the configuration dataclasses of each package.

The defaults of every section are taken from those dataclasses, so a missing key always means "package default".
Keys that no section knows raise ConfigError with their full dotted path.
"""

from dataclasses import dataclass, asdict, field
from typing import Any, Dict, List

import yaml

from controller import ControllerGains, PidGains, DEFAULT_GAINS
from dataset import DatasetConfig, BalanceQuotas, Quota
from evaluation import BenchmarkConfig, benchmark_preset, CAPTURE_WINDOW, CORRUPTION_FACTOR
from expert import CollectConfig, ExpertConfig
from logger.logger import logger
from models import TrainConfig, NetConfig, preset
from sim_world import RenderConfig, load_map
from utils import to_jsonable
from utils.exceptions import ConfigError, InvalidArgumentError, UnsupportedVariantError

SECTIONS = ("sim", "collect", "dataset", "model", "train", "benchmark", "controller")
RESOLVED_CONFIG_FILE = "resolved_config.yaml"


def _collect_defaults() -> dict:
    content = asdict(CollectConfig())
    content.pop("render")
    return content


def _benchmark_defaults() -> dict:
    content = asdict(BenchmarkConfig())
    for key in ("render", "gains", "episodes", "takeover_threshold"):
        content.pop(key)
    content.update(preset="desk", episodes=None, takeover=False, threshold=None, calibration_percentile=99.0,
                   capture_window=CAPTURE_WINDOW, corruption_factor=CORRUPTION_FACTOR, corruption_samples=64)
    return content


def default_tree() -> Dict[str, Any]:
    """The full configuration tree with every default filled in"""
    tree = {
        "seed": 0,
        "output_dir": "runs",
        "jobs": 1,
        "sim": asdict(RenderConfig()),
        "collect": _collect_defaults(),
        "dataset": asdict(DatasetConfig()),
        "model": {"preset": "toy", "variant": "M0", "overrides": {}},
        "train": asdict(TrainConfig()),
        "benchmark": _benchmark_defaults(),
        "controller": {name: asdict(gains) for name, gains in DEFAULT_GAINS.items()},
    }
    return to_jsonable(tree)


def merge(defaults: dict, content: dict, path: str = "") -> dict:
    """
    Overlay `content` on `defaults`. Non-empty default mappings are walked key by key; empty ones (free-form maps
    such as balance cells) and leaves are replaced as a whole.
    """
    if not isinstance(content, dict):
        raise ConfigError(f"Config section `{path or '<root>'}` must be a mapping, got {type(content).__name__}")
    merged = dict(defaults)
    for key, value in content.items():
        where = f"{path}.{key}" if path else str(key)
        if key not in defaults:
            raise ConfigError(f"Unknown config key `{where}`")
        if isinstance(defaults[key], dict) and defaults[key] and value is not None:
            merged[key] = merge(defaults[key], value, where)
        else:
            merged[key] = value
    return merged


def parse_override(text: str) -> dict:
    """`section.key=value` -> nested mapping; the value is read as a YAML scalar or list"""
    if "=" not in text:
        raise ConfigError(f"Override `{text}` is not of the form section.key=value")
    dotted, raw = text.split("=", 1)
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as e:
        raise ConfigError(f"Override `{text}`: unreadable value: {e}")
    if isinstance(value, str):
        # YAML 1.1 reads exponent floats without a dot ("5e-4") as strings
        try:
            value = float(value)
        except ValueError:
            pass
    keys = [k for k in dotted.strip().split(".") if k]
    if not keys:
        raise ConfigError(f"Override `{text}` has no key")
    for key in reversed(keys):
        value = {key: value}
    return value


@dataclass
class RunConfig:
    tree: Dict[str, Any] = field(default_factory=default_tree)

    @classmethod
    def load(cls, path: str = None, overrides: List[str] = ()) -> "RunConfig":
        tree = default_tree()
        if path:
            try:
                with open(path) as f:
                    content = yaml.safe_load(f) or {}
            except OSError as e:
                raise ConfigError(f"Cannot read config file {path}: {e}")
            except yaml.YAMLError as e:
                raise ConfigError(f"Config file {path} is not valid YAML: {e}")
            tree = merge(tree, content)
            logger.debug(f"Loaded run config from {path}")
        for text in overrides:
            tree = merge(tree, parse_override(text))
        run = cls(tree)
        run.validate()
        return run

    @property
    def seed(self) -> int:
        return int(self.tree["seed"])

    @property
    def output_dir(self) -> str:
        return str(self.tree["output_dir"])

    @property
    def jobs(self) -> int:
        return int(self.tree["jobs"])

    def section(self, name: str) -> dict:
        return self.tree[name]

    def validate(self) -> None:
        """Builds every section once, so a bad value fails before any work starts"""
        if self.jobs < 1:
            raise ConfigError(f"jobs must be positive, got {self.jobs}")
        for build in (self.render, self.collect, self.dataset, self.model, self.train, self.benchmark, self.gains):
            build()
        benchmark = self.tree["benchmark"]
        for map_id in sorted({self.tree["collect"]["map_id"], benchmark["training_map"], benchmark["new_map"]}):
            try:
                load_map(map_id)
            except InvalidArgumentError as e:
                raise ConfigError(str(e))

    def dump(self) -> str:
        return yaml.safe_dump(self.tree, sort_keys=True, default_flow_style=False)

    # Section builders

    def render(self) -> RenderConfig:
        return _build(RenderConfig, self.tree["sim"], "sim")

    def collect(self) -> CollectConfig:
        content = dict(self.tree["collect"])
        content["weathers"] = tuple(content["weathers"])
        content["expert"] = _build(ExpertConfig, content["expert"], "collect.expert")
        return _build(CollectConfig, content, "collect", render=self.render())

    def dataset(self) -> DatasetConfig:
        content = dict(self.tree["dataset"])
        quotas = content.pop("quotas") or {}
        balance = BalanceQuotas(default=_build(Quota, quotas.get("default") or {}, "dataset.quotas.default"),
                                cells={pattern: _build(Quota, quota, f"dataset.quotas.cells.{pattern}")
                                       for pattern, quota in (quotas.get("cells") or {}).items()},
                                command_shares=quotas.get("command_shares"))
        content["ratios"] = tuple(content["ratios"])
        content["held_out_weathers"] = tuple(content["held_out_weathers"] or ())
        return _build(DatasetConfig, content, "dataset", quotas=balance)

    def model(self, variant: str = None) -> NetConfig:
        content = self.tree["model"]
        overrides = dict(content.get("overrides") or {})
        try:
            return preset(content["preset"], variant=variant or content["variant"], **overrides)
        except TypeError as e:
            raise ConfigError(f"model.overrides: {e}")
        except (InvalidArgumentError, UnsupportedVariantError) as e:
            raise ConfigError(f"model: {e}")

    def train(self) -> TrainConfig:
        return _build(TrainConfig, self.tree["train"], "train")

    def gains(self) -> Dict[str, ControllerGains]:
        gains = {}
        for name, content in self.tree["controller"].items():
            content = dict(content)
            lateral = _build(PidGains, content.pop("lateral"), f"controller.{name}.lateral")
            longitudinal = _build(PidGains, content.pop("longitudinal"), f"controller.{name}.longitudinal")
            gains[name] = _build(ControllerGains, content, f"controller.{name}", lateral=lateral,
                                 longitudinal=longitudinal)
        return gains

    def benchmark(self, render: RenderConfig = None, takeover_threshold: float = None) -> BenchmarkConfig:
        content = {key: value for key, value in self.tree["benchmark"].items()
                   if key in BenchmarkConfig.__dataclass_fields__ and value is not None}
        for key in ("traffic", "setups", "weathers"):
            content[key] = tuple(content[key])
        content.update(render=render, gains=self.gains(), takeover_threshold=takeover_threshold)
        try:
            return benchmark_preset(self.tree["benchmark"]["preset"], **content)
        except (InvalidArgumentError, TypeError) as e:
            raise ConfigError(f"benchmark: {e}")


def _build(cls, content: dict, path: str, **extra):
    """cls(**content, **extra), turning constructor complaints into ConfigError at `path`"""
    if not isinstance(content, dict):
        raise ConfigError(f"`{path}` must be a mapping")
    unknown = sorted(set(content) - set(cls.__dataclass_fields__))
    if unknown:
        raise ConfigError(f"Unknown config keys under `{path}`: {unknown}")
    try:
        return cls(**{**content, **extra})
    except (InvalidArgumentError, TypeError) as e:
        raise ConfigError(f"`{path}`: {e}")
