"""Dataset model, on-disk format and manifest validation."""
from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass, field, replace
import json
import logging
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
import voluptuous as vol

from .const import (
    ARRAY_DTYPE,
    EEG_RATE,
    FORMAT_VERSION,
    MANIFEST_FILE,
    STREAM_A,
    STREAM_B,
    STREAM_KEYS,
)
from .exceptions import DatasetError

_LOGGER = logging.getLogger(__name__)

STREAM_SCHEMA = vol.Schema(
    {
        vol.Required("file"): str,
        vol.Required("stimulus_id"): str,
    }
)

TRIAL_SCHEMA = vol.Schema(
    {
        vol.Required("trial_id"): str,
        vol.Required("eeg_file"): str,
        vol.Required("streams"): {
            vol.Required("a"): STREAM_SCHEMA,
            vol.Required("b"): STREAM_SCHEMA,
        },
        vol.Required("attended"): vol.In(STREAM_KEYS),
        vol.Required("attended_stimulus_id"): str,
        vol.Required("unattended_stimulus_id"): str,
        vol.Required("sample_rate"): vol.All(vol.Coerce(float), vol.Range(min=0, min_included=False)),
        vol.Optional("stream_rate"): vol.All(vol.Coerce(float), vol.Range(min=0, min_included=False)),
        vol.Required("duration"): vol.All(vol.Coerce(float), vol.Range(min=0)),
    }
)

MANIFEST_SCHEMA = vol.Schema(
    {
        vol.Required("format_version"): FORMAT_VERSION,
        vol.Required("name"): str,
        vol.Required("channel_labels"): [str],
        vol.Required("subjects"): [
            {
                vol.Required("subject_id"): str,
                vol.Required("trials"): [TRIAL_SCHEMA],
            }
        ],
    }
)


@dataclass
class Trial:
    """One recording: EEG, both stream envelopes and the attended label."""

    subject_id: str
    trial_id: str
    eeg: np.ndarray
    env_a: np.ndarray
    env_b: np.ndarray
    attended: int
    stimulus_a: str
    stimulus_b: str
    rate: float = EEG_RATE
    stream_rate: float | None = None

    @property
    def key(self) -> tuple[str, str]:
        """Return (subject id, trial id)."""
        return (self.subject_id, self.trial_id)

    @property
    def n_samples(self) -> int:
        """Return the EEG sample count."""
        return self.eeg.shape[1]

    @property
    def duration(self) -> float:
        """Return the EEG duration in seconds."""
        return self.n_samples / self.rate

    @property
    def envelopes(self) -> np.ndarray:
        """Both streams stacked as (2, samples)."""
        return np.stack([self.env_a, self.env_b])

    @property
    def attended_envelope(self) -> np.ndarray:
        """Return the envelope of the attended stream."""
        return self.env_a if self.attended == STREAM_A else self.env_b

    @property
    def unattended_envelope(self) -> np.ndarray:
        """Return the envelope of the ignored stream."""
        return self.env_b if self.attended == STREAM_A else self.env_a

    @property
    def attended_stimulus(self) -> str:
        """Return the stimulus id of the attended stream."""
        return self.stimulus_a if self.attended == STREAM_A else self.stimulus_b

    @property
    def unattended_stimulus(self) -> str:
        """Return the stimulus id of the ignored stream."""
        return self.stimulus_b if self.attended == STREAM_A else self.stimulus_a


@dataclass
class Dataset:
    """A named collection of trials sharing one channel layout."""

    name: str
    channel_labels: tuple[str, ...]
    trials: list[Trial] = field(default_factory=list)

    @property
    def subjects(self) -> list[str]:
        """Subject ids in order of first appearance."""
        return list(dict.fromkeys(trial.subject_id for trial in self.trials))

    @property
    def n_channels(self) -> int:
        """Return the EEG channel count."""
        return len(self.channel_labels)

    def subject_trials(self, subject_id: str) -> list[Trial]:
        """Return the trials of one subject."""
        return [trial for trial in self.trials if trial.subject_id == subject_id]

    def select_channels(self, labels: Iterable[str]) -> Dataset:
        """Keep only the given channels (no re-referencing)."""
        labels = tuple(labels)
        missing = set(labels) - set(self.channel_labels)
        if missing:
            raise DatasetError(f"Unknown channels {sorted(missing)}")
        index = [self.channel_labels.index(label) for label in labels]
        trials = [replace(trial, eeg=trial.eeg[index]) for trial in self.trials]
        return Dataset(self.name, labels, trials)


def _trial_entry(trial: Trial, eeg_file: str, stream_files: tuple[str, str]) -> dict[str, Any]:
    return {
        "trial_id": trial.trial_id,
        "eeg_file": eeg_file,
        "streams": {
            "a": {"file": stream_files[0], "stimulus_id": trial.stimulus_a},
            "b": {"file": stream_files[1], "stimulus_id": trial.stimulus_b},
        },
        "attended": STREAM_KEYS[trial.attended],
        "attended_stimulus_id": trial.attended_stimulus,
        "unattended_stimulus_id": trial.unattended_stimulus,
        "sample_rate": float(trial.rate),
        "stream_rate": float(trial.stream_rate or trial.rate),
        "duration": float(trial.duration),
    }


def save_dataset(dataset: Dataset, path: str | Path) -> Path:
    """Write the manifest and one float32 array file per record."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    subjects: list[dict[str, Any]] = []
    for subject_id in dataset.subjects:
        entries = []
        for trial in dataset.subject_trials(subject_id):
            base = f"{subject_id}/{trial.trial_id}"
            files = (f"{base}_eeg.npy", f"{base}_a.npy", f"{base}_b.npy")
            (root / subject_id).mkdir(exist_ok=True)
            for name, array in zip(files, (trial.eeg, trial.env_a, trial.env_b)):
                np.save(root / name, np.asarray(array, dtype=ARRAY_DTYPE))
            entries.append(_trial_entry(trial, files[0], files[1:]))
        subjects.append({"subject_id": subject_id, "trials": entries})
    manifest = {
        "format_version": FORMAT_VERSION,
        "name": dataset.name,
        "channel_labels": list(dataset.channel_labels),
        "subjects": subjects,
    }
    (root / MANIFEST_FILE).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    _LOGGER.info("Saved dataset %s with %s trials to %s", dataset.name, len(dataset.trials), root)
    return root


def _read_manifest(root: Path) -> dict[str, Any]:
    manifest_path = root / MANIFEST_FILE
    try:
        raw = json.loads(manifest_path.read_text())
    except OSError as err:
        raise DatasetError(f"Cannot read {manifest_path}: {err}") from err
    except json.JSONDecodeError as err:
        raise DatasetError(f"Manifest {manifest_path} is not valid JSON: {err}") from err
    return raw


def _load_array(root: Path, name: str, entry: str, mmap: bool = False) -> np.ndarray:
    try:
        return np.load(root / name, allow_pickle=False, mmap_mode="r" if mmap else None)
    except FileNotFoundError as err:
        raise DatasetError(f"missing file {name}", entry) from err
    except (OSError, ValueError) as err:
        raise DatasetError(f"corrupt array file {name}: {err}", entry) from err


def _entry_violations(
    root: Path, entry: dict[str, Any], key: str, n_channels: int
) -> list[str]:
    """Check one trial entry against its arrays."""
    violations = []
    streams = entry["streams"]
    attended = entry["attended"]
    ignored = STREAM_KEYS[1 - STREAM_KEYS.index(attended)]
    if entry["attended_stimulus_id"] != streams[attended]["stimulus_id"]:
        violations.append(f"{key}: attended stimulus id does not match stream {attended}")
    if entry["unattended_stimulus_id"] != streams[ignored]["stimulus_id"]:
        violations.append(f"{key}: unattended stimulus id does not match stream {ignored}")
    try:
        eeg = _load_array(root, entry["eeg_file"], key, mmap=True)
        env_a = _load_array(root, streams["a"]["file"], key, mmap=True)
        env_b = _load_array(root, streams["b"]["file"], key, mmap=True)
    except DatasetError as err:
        return [*violations, str(err)]
    if eeg.ndim != 2 or eeg.shape[0] != n_channels:
        violations.append(f"{key}: EEG shape {eeg.shape} does not match {n_channels} channels")
        return violations
    if env_a.ndim != 1 or env_b.ndim != 1 or env_a.shape != env_b.shape:
        violations.append(f"{key}: stream arrays must be equal-length vectors")
    expected = entry["duration"] * entry["sample_rate"]
    if abs(eeg.shape[1] - expected) > 1:
        violations.append(
            f"{key}: duration {entry['duration']} s does not match {eeg.shape[1]} samples"
        )
    stream_rate = entry.get("stream_rate", entry["sample_rate"])
    if env_a.ndim == 1 and abs(env_a.shape[0] - entry["duration"] * stream_rate) > 1:
        violations.append(f"{key}: stream length {env_a.shape[0]} does not match duration")
    return violations


def validate_manifest(path: str | Path) -> list[str]:
    """Return every invariant violation of a dataset directory (empty when valid)."""
    root = Path(path)
    if not root.is_dir():
        raise DatasetError(f"Dataset path {root} is not a readable directory")
    raw = _read_manifest(root)
    try:
        manifest = MANIFEST_SCHEMA(raw)
    except vol.Invalid as err:
        return [f"manifest: {err}"]
    violations: list[str] = []
    labels = manifest["channel_labels"]
    if len(set(labels)) != len(labels):
        violations.append("manifest: duplicate channel labels")
    seen_subjects: set[str] = set()
    for subject in manifest["subjects"]:
        subject_id = subject["subject_id"]
        if subject_id in seen_subjects:
            violations.append(f"{subject_id}: duplicate subject id")
        seen_subjects.add(subject_id)
        seen_trials: set[str] = set()
        for entry in subject["trials"]:
            key = f"{subject_id}/{entry['trial_id']}"
            if entry["trial_id"] in seen_trials:
                violations.append(f"{key}: duplicate trial id")
            seen_trials.add(entry["trial_id"])
            violations.extend(_entry_violations(root, entry, key, len(labels)))
    return violations


def load_dataset(path: str | Path) -> Dataset:
    """Read a dataset directory, raising on the first invalid entry."""
    root = Path(path)
    raw = _read_manifest(root)
    try:
        manifest = MANIFEST_SCHEMA(raw)
    except vol.Invalid as err:
        raise DatasetError(f"Invalid manifest: {err}") from err
    labels = tuple(manifest["channel_labels"])
    trials: list[Trial] = []
    seen: set[tuple[str, str]] = set()
    for subject in manifest["subjects"]:
        subject_id = subject["subject_id"]
        for entry in subject["trials"]:
            key = f"{subject_id}/{entry['trial_id']}"
            if (subject_id, entry["trial_id"]) in seen:
                raise DatasetError("duplicate trial id", key)
            seen.add((subject_id, entry["trial_id"]))
            if violations := _entry_violations(root, entry, key, len(labels)):
                raise DatasetError("; ".join(violations), key)
            streams = entry["streams"]
            trials.append(
                Trial(
                    subject_id=subject_id,
                    trial_id=entry["trial_id"],
                    eeg=_load_array(root, entry["eeg_file"], key).astype(np.float64),
                    env_a=_load_array(root, streams["a"]["file"], key).astype(np.float64),
                    env_b=_load_array(root, streams["b"]["file"], key).astype(np.float64),
                    attended=STREAM_A if entry["attended"] == "a" else STREAM_B,
                    stimulus_a=streams["a"]["stimulus_id"],
                    stimulus_b=streams["b"]["stimulus_id"],
                    rate=entry["sample_rate"],
                    stream_rate=entry.get("stream_rate", entry["sample_rate"]),
                )
            )
    _LOGGER.debug("Loaded %s trials from %s", len(trials), root)
    return Dataset(manifest["name"], labels, trials)


def trials_frame(dataset: Dataset) -> pd.DataFrame:
    """Trial metadata as a table."""
    return pd.DataFrame(
        [
            {
                "subject": trial.subject_id,
                "trial": trial.trial_id,
                "attended": STREAM_KEYS[trial.attended],
                "attended_stimulus_id": trial.attended_stimulus,
                "unattended_stimulus_id": trial.unattended_stimulus,
                "sample_rate": trial.rate,
                "duration": trial.duration,
            }
            for trial in dataset.trials
        ]
    )


def export_trials_csv(dataset: Dataset, path: str | Path) -> Path:
    """Write trial metadata as CSV."""
    path = Path(path)
    trials_frame(dataset).to_csv(path, index=False)
    return path
