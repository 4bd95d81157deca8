from dataclasses import dataclass, field
from fnmatch import fnmatch
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from dataset.records import FrameRecord
from logger.logger import logger
from sim_world import Command
from utils.exceptions import InvalidArgumentError
from utils.utils import derive_rng


@dataclass(frozen=True)
class Quota:
    floor: int = 0
    cap: Optional[int] = None

    def __post_init__(self):
        if self.floor < 0 or (self.cap is not None and self.cap < self.floor):
            raise InvalidArgumentError(f"Invalid quota: floor={self.floor}, cap={self.cap}")


@dataclass(frozen=True)
class BalanceQuotas:
    """
    Bounds on the number of records per (weather, command, behavior) cell.

    cells:          {"<weather>/<command>/<behavior>" pattern: Quota}; patterns use shell wildcards,
                    e.g. "*/keep-straight/cruise". The first matching pattern wins; unmatched cells use `default`.
    command_shares: Optional target share per command name; over-represented commands are subsampled until
                    the command histogram matches the targets.
    """
    default: Quota = field(default_factory=Quota)
    cells: Dict[str, Quota] = field(default_factory=dict)
    command_shares: Optional[Dict[str, float]] = None

    def quota_for(self, cell: str) -> Quota:
        for pattern, quota in self.cells.items():
            if fnmatch(cell, pattern):
                return quota
        return self.default

    @property
    def is_identity(self) -> bool:
        return self.default == Quota() and not self.cells and not self.command_shares


def command_name(command: Command) -> str:
    return command.name.lower().replace("_", "-")


def cell_of(record: FrameRecord) -> str:
    return f"{record.weather.value}/{command_name(record.command)}/{record.behavior.value}"


def _sample(records: List[FrameRecord], n: int, seed: int, key: str) -> List[FrameRecord]:
    if n >= len(records):
        return records
    rng = derive_rng(seed, "balance", key)
    keep = np.sort(rng.choice(len(records), size=n, replace=False))
    return [records[i] for i in keep]


def balance(records: Sequence[FrameRecord], quotas: Optional[BalanceQuotas], seed: int) \
        -> Tuple[List[FrameRecord], pd.DataFrame]:
    """
    Subsample records so every (weather, command, behavior) cell respects its quota.

    Caps are met exactly by seeded sampling without replacement; a floor that the data cannot meet marks
    its cell deficient in the report and changes nothing. When command shares are given, whole commands are
    then subsampled (spread evenly over their cells) to match the target histogram.

    :param records: FrameRecords
    :param quotas:  BalanceQuotas, or None for no balancing
    :param seed:    Run seed
    :return:        (kept records in (episode_id, tick) order, report with one row per cell)
    """
    records = sorted(records, key=lambda r: r.key)
    quotas = quotas or BalanceQuotas()
    cells: Dict[str, List[FrameRecord]] = {}
    for record in records:
        cells.setdefault(cell_of(record), []).append(record)

    kept_cells = {}
    rows = []
    for cell in sorted(cells):
        quota = quotas.quota_for(cell)
        available = cells[cell]
        kept = available if quota.cap is None else _sample(available, quota.cap, seed, cell)
        kept_cells[cell] = kept
        deficient = len(available) < quota.floor
        if deficient:
            logger.warning(f"Balance cell {cell}: {len(available)} records available, floor is {quota.floor}")
        rows.append({"cell": cell, "available": len(available), "floor": quota.floor, "cap": quota.cap,
                     "kept": len(kept), "deficient": deficient})

    if quotas.command_shares:
        kept_cells = _match_command_shares(kept_cells, quotas.command_shares, seed)
        for row in rows:
            row["kept"] = len(kept_cells[row["cell"]])

    kept = sorted((r for cell in kept_cells.values() for r in cell), key=lambda r: r.key)
    report = pd.DataFrame(rows, columns=["cell", "available", "floor", "cap", "kept", "deficient"], dtype=object)
    logger.info(f"Balanced {len(records)} records down to {len(kept)} over {len(rows)} cells")
    return kept, report


def _match_command_shares(cells: Dict[str, List[FrameRecord]], shares: Dict[str, float], seed: int) \
        -> Dict[str, List[FrameRecord]]:
    names = [command_name(c) for c in Command]
    unknown = set(shares) - set(names)
    if unknown:
        raise InvalidArgumentError(f"Unknown commands in command_shares: {sorted(unknown)}; expected {names}")
    total_share = sum(shares.values())
    if total_share <= 0:
        raise InvalidArgumentError(f"command_shares must have a positive sum, got {shares}")
    targets = {name: shares.get(name, 0.0) / total_share for name in names}
    counts = {name: sum(len(v) for k, v in cells.items() if k.split("/")[1] == name) for name in names}
    # largest total for which every command can supply its share
    total = min(counts[name] / share for name, share in targets.items() if share > 0)
    out = {}
    for name in names:
        want = int(round(targets[name] * total))
        own = sorted(k for k in cells if k.split("/")[1] == name)
        have = counts[name]
        for cell in own:
            n = int(round(len(cells[cell]) * want / have)) if have else 0
            out[cell] = _sample(cells[cell], n, seed, f"share/{cell}")
    return out


def command_histogram(records: Sequence[FrameRecord]) -> Dict[str, float]:
    """Share of records per command name"""
    names = [command_name(c) for c in Command]
    if not records:
        return {name: 0.0 for name in names}
    counts = {name: 0 for name in names}
    for record in records:
        counts[command_name(record.command)] += 1
    return {name: counts[name] / len(records) for name in names}
