"""
Single-file parameter checkpoints.

Layout: MAGIC, a little-endian uint64 header length, the UTF-8 JSON header (format version, precision, tensor
directory with shapes and byte offsets, free-form metadata), then the raw little-endian tensor payload.
"""

import json
import os
import struct
from typing import Dict, Tuple

import numpy as np

from utils.exceptions import CheckpointError, InvalidArgumentError

MAGIC = b"C2TCKPT\n"
CHECKPOINT_FORMAT_VERSION = 1
PRECISIONS = {"float64": "<f8", "float32": "<f4"}


def save_checkpoint(path: str, tensors: Dict[str, np.ndarray], meta: dict = None, precision: str = "float64") -> str:
    """
    :param path:        Output file
    :param tensors:     name -> array
    :param meta:        JSON-serializable metadata (model config, training step, ...)
    :param precision:   float64 or float32
    :return:            path
    """
    if precision not in PRECISIONS:
        raise InvalidArgumentError(f"Unknown precision {precision}; use one of {sorted(PRECISIONS)}")
    dtype = np.dtype(PRECISIONS[precision])
    directory, payload, offset = [], [], 0
    for name in sorted(tensors):
        data = np.ascontiguousarray(tensors[name], dtype=dtype).tobytes()
        directory.append({"name": name, "shape": list(np.shape(tensors[name])), "offset": offset,
                          "nbytes": len(data)})
        payload.append(data)
        offset += len(data)
    header = json.dumps({"format_version": CHECKPOINT_FORMAT_VERSION, "precision": precision,
                         "tensors": directory, "meta": meta or {}}, sort_keys=True).encode("utf-8")
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(header)))
        f.write(header)
        for data in payload:
            f.write(data)
    return path


def read_header(path: str) -> Tuple[dict, int]:
    """:return: (header, byte offset where the payload starts)"""
    try:
        with open(path, "rb") as f:
            magic = f.read(len(MAGIC))
            if magic != MAGIC:
                raise CheckpointError(f"{path} is not a checkpoint file")
            size_bytes = f.read(8)
            if len(size_bytes) != 8:
                raise CheckpointError(f"{path}: truncated header")
            (size,) = struct.unpack("<Q", size_bytes)
            header = json.loads(f.read(size).decode("utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"Cannot read checkpoint {path}: {e}")
    if header.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(f"{path}: checkpoint format {header.get('format_version')} is not supported "
                              f"(expected {CHECKPOINT_FORMAT_VERSION})")
    return header, len(MAGIC) + 8 + size


def load_checkpoint(path: str) -> Tuple[Dict[str, np.ndarray], dict]:
    """:return: (name -> array in the stored precision, metadata)"""
    header, start = read_header(path)
    dtype = np.dtype(PRECISIONS.get(header["precision"], "<f8"))
    with open(path, "rb") as f:
        f.seek(start)
        payload = f.read()
    tensors = {}
    for entry in header["tensors"]:
        begin, end = entry["offset"], entry["offset"] + entry["nbytes"]
        if end > len(payload):
            raise CheckpointError(f"{path}: payload truncated inside tensor {entry['name']}")
        tensors[entry["name"]] = np.frombuffer(payload[begin:end], dtype=dtype).reshape(entry["shape"]).copy()
    return tensors, header["meta"]
