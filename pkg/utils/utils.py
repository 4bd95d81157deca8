import json
import os
import subprocess
import zlib
from enum import Enum
from pathlib import Path

import numpy as np

from logger.logger import logger

PACKAGE_VERSION = "1.0.0"


def derive_rng(seed: int, *keys) -> np.random.Generator:
    """
    Build an independent random stream from a base seed and any number of keys.
    Strings are hashed with crc32, so the same (seed, keys) always yields the same stream,
    regardless of the order in which other streams were created.

    EXAMPLES:   derive_rng(7, "noise", 3)
                derive_rng(7, "init", "branches.0.lstm.layer0.w_x")

    :param seed:    Base (run) seed, a nonnegative int
    :param keys:    ints or strings
    :return:        A numpy Generator
    """
    entropy = [int(seed) & 0xFFFFFFFF]
    for key in keys:
        if isinstance(key, str):
            entropy.append(zlib.crc32(key.encode("utf-8")))
        else:
            entropy.append(int(key) & 0xFFFFFFFF)
    return np.random.default_rng(entropy)


def version_string() -> str:
    """
    git-describe-style version of the working copy; falls back to the package version
    when git (or a repository) is not available
    """
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                             cwd=os.path.dirname(os.path.abspath(__file__)),
                             capture_output=True, text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    return f"v{PACKAGE_VERSION}"


def to_jsonable(obj):
    """
    Recursively convert numpy scalars/arrays, tuples, enums and Paths into plain json types.
    Floats keep their shortest round-trip repr, so dumps are lossless.
    """
    if isinstance(obj, dict):
        return {str(key): to_jsonable(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(item) for item in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, Enum):
        return obj.value
    return obj


def write_json(path, content, indent=2) -> None:
    with open(path, "w") as file:
        json.dump(to_jsonable(content), file, indent=indent, sort_keys=True)
        file.write("\n")


def read_json(path):
    with open(path) as file:
        return json.load(file)


def write_jsonl(path, records) -> None:
    with open(path, "w") as file:
        for record in records:
            file.write(json.dumps(to_jsonable(record), sort_keys=True))
            file.write("\n")


def entropy(weights) -> float:
    """
    Shannon entropy (nats) of a discrete distribution; zero entries contribute nothing
    """
    p = np.asarray(weights, dtype=np.float64)
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def summarize_dataframe(df, caption="") -> None:
    """
    Log a pandas data frame in full, prefaced by an optional caption

    :param df:      A Pandas data frame
    :param caption: Optional string to preface
    :return:        None
    """
    if caption != "":
        caption = f" `{caption}`"
    if df.empty:
        logger.info(f"Empty table{caption}")
        return
    logger.info(f"Table{caption}:\n{df.to_string()}")
