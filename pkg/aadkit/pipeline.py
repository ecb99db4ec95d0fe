"""Evaluation runs: fit a method per fold, score windowed test decisions, summarize."""
from __future__ import annotations

from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import combinations
import logging
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from .checkpoint import load_checkpoint, save_checkpoint
from .const import (
    ALPHA,
    INNER_FOLDS,
    LOCO_COLUMNS,
    METHOD_AADNET,
    METHOD_CCA,
    METHOD_LSR,
    METHODS,
    MISSING,
    MODE_SI,
    MODE_SS,
    MODES,
    N_FOLDS,
    N_PERMUTATIONS,
    REPORT_COLUMNS,
    RIDGE_LAMBDAS,
    STREAM_A,
    STREAM_B,
    TEST_OVERLAP,
    WINDOW_LENGTHS,
)
from .dataset import Dataset, Trial
from .dsp import rereference
from .exceptions import AadkitError, DecoderError
from .folds import FoldPlan, WindowSpec, non_overlapping_count, split_si_cross_trial, split_ss, trial_windows
from .linear import (
    CcaModel,
    LdaClassifier,
    RidgeDecoder,
    cca_fit_trials,
    decide,
    difference_features,
    grand_J,
    lda_fit,
    lda_training_set,
    pearson_with_flag,
    project_trial,
    select_J,
    ridge_cv_fit,
)
from .metrics import accuracy, bonferroni, chance_level, paired_permutation_test
from .network import AADNet
from .training import TrainConfig, TrainResult, WindowSet, finetune_ss, segment_trials, train

_LOGGER = logging.getLogger(__name__)

SUMMARY_COLUMNS = ("method", "subject", "window_s", "accuracy", "chance", "n_folds")
STATS_COLUMNS = (
    "window_s",
    "method_1",
    "method_2",
    "n_subjects",
    "p_value",
    "p_bonferroni",
    "significant",
)


@dataclass(frozen=True)
class LinearConfig:
    """Settings of the linear decoders."""

    lambdas: tuple[float, ...] = RIDGE_LAMBDAS
    n_components: int | None = None
    inner_folds: int = INNER_FOLDS


@dataclass(frozen=True)
class EvalSettings:
    """Everything one evaluation run depends on."""

    method: str = METHOD_LSR
    mode: str = MODE_SS
    windows: tuple[float, ...] = WINDOW_LENGTHS
    seed: int = 0
    workers: int = 1
    n_folds: int = N_FOLDS
    overlap: float = TEST_OVERLAP
    pretrain: bool = True
    train: TrainConfig = field(default_factory=TrainConfig)
    linear: LinearConfig = field(default_factory=LinearConfig)

    def __post_init__(self) -> None:
        """Validate method, mode and windows."""
        if self.method not in METHODS:
            raise AadkitError(f"Unknown method {self.method}, expected one of {METHODS}")
        if self.mode not in MODES:
            raise AadkitError(f"Unknown mode {self.mode}, expected one of {MODES}")
        if not self.windows or any(w <= 0 for w in self.windows):
            raise AadkitError(f"Window lengths must be positive, got {self.windows}")
        if list(self.windows) != sorted(set(self.windows)):
            raise AadkitError(f"Window lengths must be strictly ascending, got {self.windows}")


@dataclass
class FoldData:
    """Trials of one fold, plus aligned subject-independent trials for pretraining."""

    plan: FoldPlan
    train: list[Trial]
    val: list[Trial]
    test: list[Trial]
    pretrain: tuple[list[Trial], list[Trial]] | None = None

    @property
    def fit(self) -> list[Trial]:
        """Train and validation trials together."""
        return self.train + self.val


class FoldModel:
    """A method fitted on one fold that decides attention per window."""

    name = ""

    def __init__(self, settings: EvalSettings, seed: int) -> None:
        """Store the run settings and the fold seed."""
        self.settings = settings
        self.seed = seed

    def fit(self, data: FoldData) -> None:
        """Fit on the fold's training material."""
        raise NotImplementedError

    def decide(self, trial: Trial, windows: list[tuple[int, int]], window_s: float) -> np.ndarray:
        """Chosen stream per window."""
        raise NotImplementedError

    def tensors(self) -> dict[str, np.ndarray]:
        """Named tensors for a checkpoint."""
        raise NotImplementedError

    def meta(self) -> dict[str, Any]:
        """Metadata stored with the tensors."""
        return {"method": self.name}

    def restore(self, tensors: dict[str, np.ndarray], meta: dict[str, Any]) -> None:
        """Load fitted state from a checkpoint."""
        raise NotImplementedError


class LsrModel(FoldModel):
    """Ridge stimulus reconstruction with leave-one-trial-out lambda."""

    name = METHOD_LSR

    def fit(self, data: FoldData) -> None:
        """Fit on train and validation trials."""
        self.decoder = ridge_cv_fit(data.fit, lambdas=self.settings.linear.lambdas)

    def decide(self, trial: Trial, windows: list[tuple[int, int]], window_s: float) -> np.ndarray:
        """Compare reconstruction correlations with both envelopes."""
        recon = self.decoder.reconstruct(trial.eeg, pad=True)
        choices = []
        for start, end in windows:
            r_a, flag_a = pearson_with_flag(recon[start:end], trial.env_a[start:end])
            r_b, flag_b = pearson_with_flag(recon[start:end], trial.env_b[start:end])
            choices.append(decide(r_a, r_b, flag_a or flag_b).choice)
        return np.array(choices, dtype=int)

    def tensors(self) -> dict[str, np.ndarray]:
        """Return the decoder tensors."""
        return self.decoder.to_tensors()

    def restore(self, tensors: dict[str, np.ndarray], meta: dict[str, Any]) -> None:
        """Rebuild the decoder."""
        self.decoder = RidgeDecoder.from_tensors(tensors)


class CcaMethod(FoldModel):
    """CCA with nested J selection and one LDA per window length."""

    name = METHOD_CCA

    def __init__(self, settings: EvalSettings, seed: int, n_components: int | None = None) -> None:
        """Optionally fix J instead of selecting it."""
        super().__init__(settings, seed)
        self.n_components = n_components or settings.linear.n_components
        self.ldas: dict[float, LdaClassifier] = {}

    def select(self, data: FoldData) -> int:
        """Inner cross-validated J for this fold."""
        selection = select_J(
            data.fit,
            self.settings.windows,
            inner_folds=self.settings.linear.inner_folds,
            seed=self.seed,
        )
        return selection.value

    def fit(self, data: FoldData) -> None:
        """Fit CCA, truncate to J, then fit the per-window LDAs."""
        n_components = self.n_components or self.select(data)
        model = cca_fit_trials(data.fit)
        self.model = model.truncate(min(n_components, model.n_components))
        rate = data.fit[0].rate
        for length in self.settings.windows:
            try:
                features, labels = lda_training_set(self.model, data.fit, int(round(length * rate)))
            except DecoderError:
                _LOGGER.debug("No %s s LDA training windows in fold %s", length, data.plan.fold)
                continue
            self.ldas[length] = lda_fit(features, labels)

    def decide(self, trial: Trial, windows: list[tuple[int, int]], window_s: float) -> np.ndarray:
        """LDA score of the feature difference; ties go to stream A."""
        if not windows:
            return np.array([], dtype=int)
        if window_s not in self.ldas:
            raise DecoderError(f"No LDA was trained for {window_s} s windows")
        u, v_a, v_b = project_trial(self.model, trial)
        scores = self.ldas[window_s].score(difference_features(u, v_a, v_b, windows))
        return np.where(scores >= 0, STREAM_A, STREAM_B)

    def tensors(self) -> dict[str, np.ndarray]:
        """CCA tensors plus one LDA per window, prefixed by its length."""
        tensors = self.model.to_tensors()
        for length, lda in self.ldas.items():
            tensors.update({f"w{length:g}.{name}": value for name, value in lda.to_tensors().items()})
        return tensors

    def meta(self) -> dict[str, Any]:
        """Record J and the window lengths that have an LDA."""
        return {"method": self.name, "J": self.model.n_components, "windows": list(self.ldas)}

    def restore(self, tensors: dict[str, np.ndarray], meta: dict[str, Any]) -> None:
        """Rebuild the CCA model and its LDAs."""
        self.model = CcaModel.from_tensors(tensors)
        self.ldas = {
            float(length): LdaClassifier.from_tensors(
                {
                    name: tensors[f"w{float(length):g}.{name}"]
                    for name in ("lda_weight", "lda_bias", "lda_priors")
                }
            )
            for length in meta["windows"]
        }


class AadnetModel(FoldModel):
    """AADNet trained per fold, optionally pretrained subject-independently."""

    name = METHOD_AADNET

    def __init__(self, settings: EvalSettings, seed: int, n_channels: int = 0) -> None:
        """Create the network for ``n_channels`` EEG channels."""
        super().__init__(settings, seed)
        self.config = replace(settings.train, seed=seed)
        self.n_channels = n_channels
        self.logs: list[TrainResult] = []
        self.net: AADNet | None = None

    def _build(self) -> AADNet:
        return AADNet(
            self.n_channels, hidden=self.config.hidden, dropout=self.config.dropout, seed=self.seed
        )

    def _windows(self, trials: list[Trial]) -> WindowSet:
        return segment_trials(trials, self.config.window_s, self.config.overlap)

    def fit(self, data: FoldData) -> None:
        """Train (or pretrain then fine-tune) on fixed-length windows."""
        self.net = self._build()
        train_set, val_set = self._windows(data.train), self._windows(data.val)
        if data.pretrain is not None:
            pre_train, pre_val = data.pretrain
            self.logs.append(
                train(self.net, self._windows(pre_train), self._windows(pre_val), self.config)
            )
            self.logs.append(finetune_ss(self.net, train_set, val_set, self.config))
        else:
            self.logs.append(train(self.net, train_set, val_set, self.config))

    def decide(self, trial: Trial, windows: list[tuple[int, int]], window_s: float) -> np.ndarray:
        """Argmax of the eval-mode probabilities; ties go to stream A."""
        if not windows:
            return np.array([], dtype=int)
        eeg = np.stack([trial.eeg[:, start:end] for start, end in windows])
        env_a = np.stack([trial.env_a[start:end] for start, end in windows])
        env_b = np.stack([trial.env_b[start:end] for start, end in windows])
        probs = self.net.predict_proba(eeg, env_a, env_b)
        return np.where(probs[:, 0] >= probs[:, 1], STREAM_A, STREAM_B)

    def log_frame(self) -> pd.DataFrame:
        """Training logs of every stage, one stage column."""
        frames = [result.log_frame().assign(stage=idx) for idx, result in enumerate(self.logs)]
        return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame()

    def tensors(self) -> dict[str, np.ndarray]:
        """Network state."""
        return self.net.state_dict()

    def meta(self) -> dict[str, Any]:
        """Network constructor arguments."""
        return {"method": self.name, "model": self.net.config()}

    def restore(self, tensors: dict[str, np.ndarray], meta: dict[str, Any]) -> None:
        """Rebuild the network and load its weights."""
        model = meta["model"]
        self.n_channels = int(model["n_channels"])
        self.net = AADNet(self.n_channels, int(model["hidden"]), float(model["dropout"]), self.seed)
        self.net.load_state_dict({name: value.astype(np.float64) for name, value in tensors.items()})


def build_model(settings: EvalSettings, seed: int, n_channels: int) -> FoldModel:
    """Instantiate the configured method."""
    if settings.method == METHOD_LSR:
        return LsrModel(settings, seed)
    if settings.method == METHOD_CCA:
        return CcaMethod(settings, seed)
    return AadnetModel(settings, seed, n_channels)


def plan_folds(dataset: Dataset, settings: EvalSettings) -> list[FoldData]:
    """Fold data of every subject in the configured mode."""
    by_key = {trial.key: trial for trial in dataset.trials}

    def resolve(refs) -> list[Trial]:
        return [by_key[ref.key] for ref in refs]

    folds = []
    multi = len(dataset.subjects) > 1
    for subject in dataset.subjects:
        own = dataset.subject_trials(subject)
        if settings.mode == MODE_SI:
            plans = split_si_cross_trial(dataset.trials, subject, settings.n_folds, settings.seed)
            si_plans = [None] * len(plans)
        else:
            plans = split_ss(own, settings.n_folds, settings.seed)
            pretrain = settings.method == METHOD_AADNET and settings.pretrain and multi
            si_plans = (
                split_si_cross_trial(dataset.trials, subject, settings.n_folds, settings.seed)
                if pretrain
                else [None] * len(plans)
            )
        for plan, si_plan in zip(plans, si_plans):
            folds.append(
                FoldData(
                    plan,
                    resolve(plan.train),
                    resolve(plan.val),
                    resolve(plan.test),
                    (resolve(si_plan.train), resolve(si_plan.val)) if si_plan else None,
                )
            )
    return folds


def score_fold(model: FoldModel, data: FoldData, settings: EvalSettings) -> list[dict[str, Any]]:
    """Report rows of one fitted fold, one per window length."""
    rows = []
    for length in settings.windows:
        spec = WindowSpec(length, settings.overlap)
        decisions, labels = [], []
        for trial in data.test:
            windows = trial_windows(trial, spec)
            choices = model.decide(trial, windows, length)
            decisions.extend(choices.tolist())
            labels.extend([trial.attended] * len(choices))
        disjoint = non_overlapping_count(data.test, length)
        rows.append(
            {
                "method": model.name,
                "subject": data.plan.test_subject,
                "fold": data.plan.fold,
                "window_s": length,
                "n_windows": len(decisions),
                "accuracy": accuracy(decisions, labels) if decisions else np.nan,
                "chance": chance_level(disjoint) if disjoint else np.nan,
            }
        )
    return rows


def _checkpoint_file(directory: Path, data: FoldData, method: str) -> Path:
    return directory / f"{method}_{data.plan.mode}_{data.plan.test_subject}_fold{data.plan.fold}.npz"


def _fit_fold(
    data: FoldData,
    settings: EvalSettings,
    n_channels: int,
    components: dict[str, int],
    checkpoints: Path | None,
) -> FoldModel:
    model = build_model(settings, settings.seed + data.plan.fold, n_channels)
    if isinstance(model, CcaMethod) and data.plan.test_subject in components:
        model.n_components = components[data.plan.test_subject]
    path = _checkpoint_file(checkpoints, data, settings.method) if checkpoints else None
    if path is not None and path.exists():
        tensors, meta = load_checkpoint(path)
        model.restore(tensors, meta)
        _LOGGER.debug("Loaded %s", path)
        return model
    model.fit(data)
    if path is not None:
        save_checkpoint(path, model.tensors(), model.meta())
        if isinstance(model, AadnetModel):
            model.log_frame().to_csv(path.with_suffix(".log.csv"), index=False)
    return model


def _grand_components(folds: list[FoldData], settings: EvalSettings, pool: ThreadPoolExecutor) -> dict[str, int]:
    """Grand-average J per subject from the per-fold selections."""
    if settings.method != METHOD_CCA or settings.linear.n_components:
        return {}
    selections = list(
        pool.map(
            lambda data: select_J(
                data.fit,
                settings.windows,
                inner_folds=settings.linear.inner_folds,
                seed=settings.seed + data.plan.fold,
            ),
            folds,
        )
    )
    components: dict[str, list] = {}
    for data, selection in zip(folds, selections):
        components.setdefault(data.plan.test_subject, []).append(selection)
    result = {subject: grand_J(found) for subject, found in components.items()}
    _LOGGER.info("Selected CCA components per subject: %s", result)
    return result


def fit_folds(
    dataset: Dataset, settings: EvalSettings, checkpoints: Path | None = None
) -> list[tuple[FoldData, FoldModel]]:
    """Fit the configured method on every fold, in parallel across folds."""
    folds = plan_folds(dataset, settings)
    _LOGGER.info(
        "Fitting %s (%s) on %s folds of %s subjects with %s workers",
        settings.method,
        settings.mode,
        len(folds),
        len(dataset.subjects),
        settings.workers,
    )
    with ThreadPoolExecutor(max_workers=max(1, settings.workers)) as pool:
        components = _grand_components(folds, settings, pool)
        models = list(
            pool.map(
                lambda data: _fit_fold(data, settings, dataset.n_channels, components, checkpoints),
                folds,
            )
        )
    return list(zip(folds, models))


def run_evaluation(
    dataset: Dataset, settings: EvalSettings, checkpoints: Path | None = None
) -> pd.DataFrame:
    """Windowed test accuracy per subject, fold and window length."""
    fitted = fit_folds(dataset, settings, checkpoints)
    with ThreadPoolExecutor(max_workers=max(1, settings.workers)) as pool:
        per_fold = list(pool.map(lambda item: score_fold(item[1], item[0], settings), fitted))
    report = pd.DataFrame([row for rows in per_fold for row in rows], columns=list(REPORT_COLUMNS))
    report = report.sort_values(["subject", "fold", "window_s"], kind="stable").reset_index(drop=True)
    _LOGGER.info("Mean accuracy per window: %s", report.groupby("window_s")["accuracy"].mean().round(3).to_dict())
    return report


def drop_channel(dataset: Dataset, label: str) -> Dataset:
    """Remove one channel and re-reference to the average of the rest."""
    if label not in dataset.channel_labels:
        raise AadkitError(f"Unknown channel {label}")
    if dataset.n_channels <= 1:
        raise AadkitError("Cannot remove the last channel")
    reduced = dataset.select_channels([lab for lab in dataset.channel_labels if lab != label])
    reduced.trials = [replace(trial, eeg=rereference(trial.eeg)) for trial in reduced.trials]
    return reduced


def loco_channel_importance(
    dataset: Dataset, settings: EvalSettings, channels: Sequence[str] | None = None
) -> pd.DataFrame:
    """Accuracy drop when each channel is left out, relative to all channels."""
    baseline = float(run_evaluation(dataset, settings)["accuracy"].mean())
    rows = []
    for label in channels or dataset.channel_labels:
        reduced = float(run_evaluation(drop_channel(dataset, label), settings)["accuracy"].mean())
        _LOGGER.info("Without %s: %.3f (baseline %.3f)", label, reduced, baseline)
        rows.append((label, baseline - reduced))
    return pd.DataFrame(rows, columns=list(LOCO_COLUMNS))


def summarize_reports(reports: Sequence[pd.DataFrame]) -> pd.DataFrame:
    """Fold-averaged accuracy for every (method, subject, window), missing cells as NaN."""
    report = pd.concat(reports, ignore_index=True)
    grouped = (
        report.groupby(["method", "subject", "window_s"])
        .agg(accuracy=("accuracy", "mean"), chance=("chance", "mean"), n_folds=("accuracy", "count"))
    )
    index = pd.MultiIndex.from_product(
        [
            sorted(report["method"].unique()),
            sorted(report["subject"].unique()),
            sorted(report["window_s"].unique()),
        ],
        names=["method", "subject", "window_s"],
    )
    summary = grouped.reindex(index).reset_index()
    summary["n_folds"] = summary["n_folds"].fillna(0).astype(int)
    return summary[list(SUMMARY_COLUMNS)]


def compare_methods(
    summary: pd.DataFrame, n_perm: int = N_PERMUTATIONS, seed: int = 0, alpha: float = ALPHA
) -> pd.DataFrame:
    """Paired permutation tests between methods across subjects, Bonferroni per window.

    A pair is significant when its adjusted p-value is below ``alpha``.
    """
    rows = []
    for length, at_window in summary.groupby("window_s", sort=True):
        table = at_window.pivot(index="subject", columns="method", values="accuracy")
        pairs = list(combinations(sorted(table.columns), 2))
        p_values = []
        for first, second in pairs:
            paired = table[[first, second]].dropna()
            p_values.append(
                paired_permutation_test(paired[first], paired[second], n_perm, seed)
                if len(paired) > 1
                else np.nan
            )
        for (first, second), p_value, adjusted in zip(pairs, p_values, bonferroni(p_values)):
            n_subjects = int(table[[first, second]].dropna().shape[0])
            rows.append((length, first, second, n_subjects, p_value, adjusted, bool(adjusted < alpha)))
    return pd.DataFrame(rows, columns=list(STATS_COLUMNS))


def write_csv(frame: pd.DataFrame, path: str | Path) -> Path:
    """Write a report with explicit missing values."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, na_rep=MISSING)
    return path


def read_report(path: str | Path) -> pd.DataFrame:
    """Read a CSV written by ``write_csv``."""
    try:
        return pd.read_csv(path, na_values=[MISSING])
    except (OSError, pd.errors.ParserError) as err:
        raise AadkitError(f"Cannot read report {path}: {err}") from err
