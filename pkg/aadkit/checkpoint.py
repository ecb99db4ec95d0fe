"""Named-tensor checkpoint container shared by the network and the linear models."""
from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any
import zipfile

import numpy as np

from .const import ARRAY_DTYPE, CHECKPOINT_HEADER, CHECKPOINT_VERSION
from .exceptions import CheckpointError

_LOGGER = logging.getLogger(__name__)


def save_checkpoint(
    path: str | Path, tensors: dict[str, np.ndarray], meta: dict[str, Any] | None = None
) -> Path:
    """Write tensors as little-endian float32 with a JSON header."""
    path = Path(path)
    if CHECKPOINT_HEADER in tensors:
        raise CheckpointError(f"Tensor name {CHECKPOINT_HEADER} is reserved")
    payload = {
        name: np.ascontiguousarray(value, dtype=ARRAY_DTYPE)
        for name, value in tensors.items()
    }
    header = {
        "format_version": CHECKPOINT_VERSION,
        "tensors": [
            {"name": name, "shape": list(value.shape)} for name, value in payload.items()
        ],
        "meta": meta or {},
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as handle:
        np.savez(handle, **{CHECKPOINT_HEADER: np.array(json.dumps(header))}, **payload)
    _LOGGER.debug("Saved %s tensors to %s", len(payload), path)
    return path


def load_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
    """Read a checkpoint and verify it against its header."""
    path = Path(path)
    try:
        with np.load(path, allow_pickle=False) as archive:
            header = json.loads(str(archive[CHECKPOINT_HEADER]))
            tensors = {
                name: archive[name] for name in archive.files if name != CHECKPOINT_HEADER
            }
    except (OSError, KeyError, ValueError, zipfile.BadZipFile) as err:
        raise CheckpointError(f"Cannot read checkpoint {path}: {err}") from err

    if header.get("format_version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"Unsupported checkpoint version {header.get('format_version')} in {path}"
        )
    declared = {entry["name"]: tuple(entry["shape"]) for entry in header["tensors"]}
    if set(declared) != set(tensors):
        raise CheckpointError(f"Tensor list of {path} does not match its header")
    for name, shape in declared.items():
        if tensors[name].shape != shape:
            raise CheckpointError(
                f"Tensor {name} in {path}: header shape {shape}, "
                f"payload shape {tensors[name].shape}"
            )
        if tensors[name].dtype != np.dtype(ARRAY_DTYPE):
            raise CheckpointError(f"Tensor {name} in {path} is not float32")
    return tensors, header.get("meta", {})
