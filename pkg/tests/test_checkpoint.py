"""Tests for the checkpoint container."""
import json

import numpy as np
import pytest

from aadkit.checkpoint import load_checkpoint, save_checkpoint
from aadkit.const import CHECKPOINT_HEADER
from aadkit.exceptions import CheckpointError


def test_round_trip(tmp_path, rng):
    """Tensors come back as float32 with the same shapes and metadata."""
    tensors = {"g": rng.standard_normal(34), "W_x": rng.standard_normal((5, 2))}
    path = save_checkpoint(tmp_path / "model.npz", tensors, {"method": "lsr", "J": 2})
    loaded, meta = load_checkpoint(path)
    assert meta == {"method": "lsr", "J": 2}
    assert set(loaded) == set(tensors)
    for name, value in tensors.items():
        assert loaded[name].dtype == np.float32
        np.testing.assert_allclose(loaded[name], value, rtol=1e-6)


def test_reserved_name(tmp_path):
    """The header name cannot be used for a tensor."""
    with pytest.raises(CheckpointError):
        save_checkpoint(tmp_path / "x.npz", {CHECKPOINT_HEADER: np.zeros(1)})


def _write_raw(path, header, **arrays):
    with path.open("wb") as handle:
        np.savez(handle, **{CHECKPOINT_HEADER: np.array(json.dumps(header))}, **arrays)


def test_header_shape_mismatch(tmp_path):
    """A payload that disagrees with the declared shape is rejected."""
    path = tmp_path / "bad.npz"
    header = {"format_version": 1, "tensors": [{"name": "g", "shape": [3]}], "meta": {}}
    _write_raw(path, header, g=np.zeros(4, dtype="<f4"))
    with pytest.raises(CheckpointError, match="shape"):
        load_checkpoint(path)


def test_unknown_version(tmp_path):
    """Future format versions are refused."""
    path = tmp_path / "future.npz"
    header = {"format_version": 99, "tensors": [], "meta": {}}
    _write_raw(path, header)
    with pytest.raises(CheckpointError, match="version"):
        load_checkpoint(path)


def test_missing_file(tmp_path):
    """Unreadable files raise a checkpoint error."""
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "missing.npz")
