"""
Parameter checkpoints.

File layout:
    [8 bytes]  little-endian unsigned header length
    [header]   UTF-8 JSON: format_version, step, seed, config, tensors
    [payload]  float64 little-endian values, tensors back to back

Each entry of the header's tensor table is
{"group": str, "name": str, "shape": [..], "offset": int (in values)}.
Groups hold the generator, both critics and the optimizer accumulators,
which is everything needed to resume training bit-exactly.
"""

import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

import numpy as np

from illumcomp.config import Config
from illumcomp.utils.errors import StorageError

logger = logging.getLogger(__name__)

HEADER_LENGTH_BYTES = 8
PAYLOAD_DTYPE = np.dtype("<f8")

GroupArrays = Dict[str, Dict[str, np.ndarray]]


class Checkpoint:
    """
    Loaded checkpoint contents.

    Attributes:
        step (int): Completed training steps
        seed (int): Training seed
        config (Dict[str, Any]): Training configuration the tensors belong to
        groups (GroupArrays): group -> name -> array
    """

    def __init__(self, step: int, seed: int, config: Dict[str, Any], groups: GroupArrays) -> None:
        self.step = step
        self.seed = seed
        self.config = config
        self.groups = groups

    def group(self, name: str) -> Dict[str, np.ndarray]:
        if name not in self.groups:
            raise StorageError(f"checkpoint has no group '{name}'", details={"groups": sorted(self.groups)})
        return self.groups[name]

    def __repr__(self) -> str:
        return f"Checkpoint(step={self.step}, seed={self.seed}, groups={sorted(self.groups)})"


def save_checkpoint(
    path: Path,
    groups: Mapping[str, Mapping[str, np.ndarray]],
    config: Optional[Dict[str, Any]] = None,
    step: int = 0,
    seed: int = 0
) -> Path:
    """
    Write a checkpoint (atomically, via a temporary file in the same directory).

    Args:
        path: Destination file
        groups: group -> name -> array
        config: JSON-serializable configuration
        step: Completed training steps
        seed: Training seed

    Returns:
        The written path

    Raises:
        StorageError: On filesystem errors or non-finite values
    """
    path = Path(path)
    table = []
    chunks = []
    offset = 0
    for group_name, arrays in groups.items():
        for name, value in arrays.items():
            arr = np.ascontiguousarray(value, dtype=PAYLOAD_DTYPE)
            if not np.all(np.isfinite(arr)):
                raise StorageError(f"refusing to save non-finite tensor {group_name}.{name}", path=str(path))
            table.append({"group": group_name, "name": name, "shape": list(arr.shape), "offset": offset})
            chunks.append(arr.ravel())
            offset += arr.size

    header = json.dumps({
        "format_version": Config.CHECKPOINT_FORMAT_VERSION,
        "step": int(step),
        "seed": int(seed),
        "config": config or {},
        "tensors": table,
    }, sort_keys=True).encode("utf-8")
    payload = np.concatenate(chunks).astype(PAYLOAD_DTYPE) if chunks else np.zeros(0, PAYLOAD_DTYPE)

    tmp = path.with_name(path.name + ".tmp")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(tmp, "wb") as f:
            f.write(len(header).to_bytes(HEADER_LENGTH_BYTES, "little"))
            f.write(header)
            f.write(payload.tobytes())
        os.replace(tmp, path)
    except OSError as e:
        raise StorageError(f"cannot write checkpoint: {e}", path=str(path))

    logger.info(f"Saved checkpoint {path} (step {step}, {offset} values)")
    return path


def load_checkpoint(path: Path) -> Checkpoint:
    """
    Read a checkpoint written by save_checkpoint.

    Raises:
        StorageError: On missing files, truncation, or an unknown format version
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise StorageError(f"cannot read checkpoint: {e}", path=str(path))

    if len(raw) < HEADER_LENGTH_BYTES:
        raise StorageError("checkpoint is truncated", path=str(path))
    header_len = int.from_bytes(raw[:HEADER_LENGTH_BYTES], "little")
    body_start = HEADER_LENGTH_BYTES + header_len
    if body_start > len(raw):
        raise StorageError("checkpoint header is truncated", path=str(path))
    try:
        header = json.loads(raw[HEADER_LENGTH_BYTES:body_start].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise StorageError(f"checkpoint header is not valid JSON: {e}", path=str(path))

    version = header.get("format_version")
    if version != Config.CHECKPOINT_FORMAT_VERSION:
        raise StorageError(
            f"unsupported checkpoint format version {version}",
            path=str(path),
            details={"expected": Config.CHECKPOINT_FORMAT_VERSION}
        )

    if (len(raw) - body_start) % PAYLOAD_DTYPE.itemsize:
        raise StorageError("checkpoint payload is not a whole number of float64 values", path=str(path))
    payload = np.frombuffer(raw[body_start:], dtype=PAYLOAD_DTYPE)
    groups: GroupArrays = {}
    for entry in header.get("tensors", []):
        shape = tuple(int(s) for s in entry["shape"])
        size = int(np.prod(shape)) if shape else 1
        start = int(entry["offset"])
        if start + size > payload.size:
            raise StorageError(f"tensor {entry['group']}.{entry['name']} runs past the payload", path=str(path))
        groups.setdefault(entry["group"], {})[entry["name"]] = (
            payload[start:start + size].astype(np.float64).reshape(shape)
        )

    logger.debug(f"Loaded checkpoint {path}: step {header.get('step')}, {payload.size} values")
    return Checkpoint(
        step=int(header.get("step", 0)),
        seed=int(header.get("seed", 0)),
        config=header.get("config", {}),
        groups=groups,
    )
