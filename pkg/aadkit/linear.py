"""Linear attention decoders: ridge stimulus reconstruction and CCA with LDA."""
from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
import logging
import math
import warnings

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
import scipy.linalg
from sklearn.discriminant_analysis import LinearDiscriminantAnalysis

from .const import (
    CCA_EEG_LAGS,
    CCA_ENV_LAGS,
    CCA_SHRINKAGE,
    INNER_FOLDS,
    LSR_LAGS,
    RIDGE_LAMBDAS,
    STREAM_A,
    STREAM_B,
)
from .dataset import Trial
from .exceptions import DecoderError, ShapeError

_LOGGER = logging.getLogger(__name__)

DEGENERATE_STD = 1e-12


def pearson_with_flag(a: np.ndarray, b: np.ndarray) -> tuple[float, bool]:
    """Pearson correlation and whether either input was constant (then r = 0)."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ShapeError("pearson inputs", a.shape, b.shape)
    if a.size < 2:
        raise DecoderError("Pearson correlation needs at least two samples")
    a_c = a - a.mean()
    b_c = b - b.mean()
    norm = np.linalg.norm(a_c) * np.linalg.norm(b_c)
    if norm <= DEGENERATE_STD * max(a.size, 1):
        return 0.0, True
    return float(np.clip(a_c @ b_c / norm, -1.0, 1.0)), False


def pearson(a: np.ndarray, b: np.ndarray) -> float:
    """Pearson correlation; constant inputs give 0."""
    return pearson_with_flag(a, b)[0]


def pearson_columns(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column-wise correlations of two (samples, k) matrices and degenerate flags."""
    a_c = a - a.mean(axis=0)
    b_c = b - b.mean(axis=0)
    norm = np.linalg.norm(a_c, axis=0) * np.linalg.norm(b_c, axis=0)
    degenerate = norm <= DEGENERATE_STD * max(a.shape[0], 1)
    safe = np.where(degenerate, 1.0, norm)
    r = np.where(degenerate, 0.0, (a_c * b_c).sum(axis=0) / safe)
    return np.clip(r, -1.0, 1.0), degenerate


def build_lag_matrix(eeg: np.ndarray, n_lags: int, pad: bool = False) -> np.ndarray:
    """Anticausal lag matrix: row t holds x(t + tau, n) for tau = 0..L-1.

    Columns are ordered channel-major (n * L + tau). Without ``pad`` only rows
    whose lags are all real samples are kept (T - L + 1 rows); with ``pad`` every
    sample gets a row and lags past the end read zeros.
    """
    eeg = np.atleast_2d(np.asarray(eeg, dtype=np.float64))
    n_channels, n_samples = eeg.shape
    if pad:
        eeg = np.pad(eeg, ((0, 0), (0, n_lags - 1)))
    elif n_samples < n_lags:
        raise DecoderError(f"Need at least {n_lags} samples for {n_lags} lags, got {n_samples}")
    windows = sliding_window_view(eeg, n_lags, axis=1)
    return windows.transpose(1, 0, 2).reshape(windows.shape[1], n_channels * n_lags)


def build_envelope_lags(envelope: np.ndarray, n_lags: int, pad: bool = False) -> np.ndarray:
    """Causal lag matrix of an envelope: row r holds s(t - tau) for tau = 0..L_s-1.

    Without ``pad`` row r corresponds to t = r + L_s - 1; with ``pad`` row r is
    t = r and samples before the start read zeros.
    """
    envelope = np.asarray(envelope, dtype=np.float64).ravel()
    if pad:
        envelope = np.pad(envelope, (n_lags - 1, 0))
    elif envelope.size < n_lags:
        raise DecoderError(f"Need at least {n_lags} samples for {n_lags} lags")
    return sliding_window_view(envelope, n_lags)[:, ::-1].copy()


def cca_pair(
    eeg: np.ndarray, envelope: np.ndarray, n_lags: int, n_env_lags: int, pad: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    """Row-aligned EEG and envelope lag matrices."""
    if pad:
        return build_lag_matrix(eeg, n_lags, pad=True), build_envelope_lags(
            envelope, n_env_lags, pad=True
        )
    n_samples = np.atleast_2d(eeg).shape[1]
    rows = n_samples - n_lags - n_env_lags + 2
    if rows < 2:
        raise DecoderError(
            f"Window of {n_samples} samples cannot fill {n_lags} EEG and "
            f"{n_env_lags} envelope lags"
        )
    x = build_lag_matrix(eeg, n_lags)[n_env_lags - 1 : n_env_lags - 1 + rows]
    s = build_envelope_lags(envelope, n_env_lags)[:rows]
    return x, s


@dataclass
class Decision:
    """Outcome of one two-stream classification."""

    choice: int
    score_a: float
    score_b: float
    flagged: bool = False


def decide(score_a: float, score_b: float, flagged: bool = False) -> Decision:
    """Pick the stream with the higher score; exact ties go to stream A."""
    if score_a == score_b:
        return Decision(STREAM_A, score_a, score_b, True)
    choice = STREAM_A if score_a > score_b else STREAM_B
    return Decision(choice, score_a, score_b, flagged)


@dataclass
class RidgeDecoder:
    """Backward model g mapping lagged EEG to the attended envelope."""

    coef: np.ndarray
    lam: float
    n_lags: int = LSR_LAGS
    scores: dict[float, float] = field(default_factory=dict)

    def reconstruct(self, eeg: np.ndarray, pad: bool = False) -> np.ndarray:
        """Reconstructed envelope X g."""
        x = build_lag_matrix(eeg, self.n_lags, pad=pad)
        if x.shape[1] != self.coef.size:
            raise ShapeError("lagged EEG columns", self.coef.size, x.shape[1])
        return x @ self.coef

    def to_tensors(self) -> dict[str, np.ndarray]:
        """Named tensors for the checkpoint container."""
        return {
            "g": self.coef,
            "lambda": np.array([self.lam]),
            "n_lags": np.array([self.n_lags]),
        }

    @classmethod
    def from_tensors(cls, tensors: dict[str, np.ndarray]) -> RidgeDecoder:
        """Rebuild from checkpoint tensors."""
        return cls(
            coef=tensors["g"].astype(np.float64),
            lam=float(tensors["lambda"][0]),
            n_lags=int(tensors["n_lags"][0]),
        )


def _solve_ridge(xtx: np.ndarray, xts: np.ndarray, lam: float) -> np.ndarray:
    system = xtx + lam * np.eye(xtx.shape[0])
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
            return scipy.linalg.solve(system, xts, assume_a="pos")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, scipy.linalg.LinAlgWarning) as err:
        raise DecoderError(
            f"Ridge system is singular at lambda={lam}; use a positive lambda"
        ) from err


def ridge_fit(x: np.ndarray, s: np.ndarray, lam: float) -> RidgeDecoder:
    """Solve (X'X + lambda I) g = X's."""
    if x.shape[0] == 0:
        raise DecoderError("Lag matrix has no rows")
    if lam < 0:
        raise DecoderError(f"lambda must be non-negative, got {lam}")
    s = np.asarray(s, dtype=np.float64).ravel()
    if s.size != x.shape[0]:
        raise ShapeError("envelope length", x.shape[0], s.size)
    return RidgeDecoder(coef=_solve_ridge(x.T @ x, x.T @ s, lam), lam=lam)


def _trial_gram(trial: Trial, n_lags: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    x = build_lag_matrix(trial.eeg, n_lags)
    s = trial.attended_envelope[: x.shape[0]]
    return x, s, x.T @ x, x.T @ s


def ridge_cv_fit(
    trials: Sequence[Trial],
    n_lags: int = LSR_LAGS,
    lambdas: Sequence[float] = RIDGE_LAMBDAS,
) -> RidgeDecoder:
    """Pick lambda by leave-one-trial-out correlation, then refit on all trials."""
    if len(trials) < 2:
        raise DecoderError(f"Ridge cross-validation needs at least 2 trials, got {len(trials)}")
    grams = [_trial_gram(trial, n_lags) for trial in trials]
    xtx_total = sum(gram[2] for gram in grams)
    xts_total = sum(gram[3] for gram in grams)
    lambdas = np.asarray(lambdas, dtype=np.float64)
    scores = np.zeros(lambdas.size)
    for x_held, s_held, xtx, xts in grams:
        eigval, eigvec = np.linalg.eigh(xtx_total - xtx)
        projected = eigvec.T @ (xts_total - xts)
        for idx, lam in enumerate(lambdas):
            coef = eigvec @ (projected / (eigval + lam))
            scores[idx] += pearson(x_held @ coef, s_held)
    scores /= len(grams)
    best = int(np.argmax(scores))
    _LOGGER.debug("Ridge CV scores %s, picked lambda %s", scores.round(4), lambdas[best])
    decoder = RidgeDecoder(
        coef=_solve_ridge(xtx_total, xts_total, float(lambdas[best])),
        lam=float(lambdas[best]),
        n_lags=n_lags,
        scores=dict(zip(lambdas.tolist(), scores.tolist())),
    )
    return decoder


def lsr_classify(
    decoder: RidgeDecoder, eeg_window: np.ndarray, env_a: np.ndarray, env_b: np.ndarray
) -> Decision:
    """Correlate the reconstruction with both envelopes and pick the higher."""
    if len(env_a) != len(env_b) or len(env_a) != np.atleast_2d(eeg_window).shape[1]:
        raise ShapeError("window lengths", len(env_a), (len(env_b), np.shape(eeg_window)))
    recon = decoder.reconstruct(eeg_window)
    r_a, flag_a = pearson_with_flag(recon, env_a[: recon.size])
    r_b, flag_b = pearson_with_flag(recon, env_b[: recon.size])
    if flag_a or flag_b:
        _LOGGER.warning("Degenerate correlation in LSR window, scores set to 0")
    return decide(r_a, r_b, flag_a or flag_b)


@dataclass
class CcaModel:
    """EEG decoder bank W_x and envelope encoder bank W_s, strongest first."""

    w_x: np.ndarray
    w_s: np.ndarray
    rho: np.ndarray
    mean_x: np.ndarray
    mean_s: np.ndarray
    n_lags: int = CCA_EEG_LAGS
    n_env_lags: int = CCA_ENV_LAGS

    @property
    def n_components(self) -> int:
        """Return J."""
        return self.rho.size

    def truncate(self, n_components: int) -> CcaModel:
        """Keep the first ``n_components`` canonical pairs."""
        if not 1 <= n_components <= self.n_components:
            raise DecoderError(f"Cannot keep {n_components} of {self.n_components} components")
        return CcaModel(
            self.w_x[:, :n_components],
            self.w_s[:, :n_components],
            self.rho[:n_components],
            self.mean_x,
            self.mean_s,
            self.n_lags,
            self.n_env_lags,
        )

    def project(self, x: np.ndarray, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Latent components of aligned lag matrices."""
        if x.shape[1] != self.w_x.shape[0] or s.shape[1] != self.w_s.shape[0]:
            raise ShapeError(
                "CCA lag columns", (self.w_x.shape[0], self.w_s.shape[0]), (x.shape[1], s.shape[1])
            )
        return (x - self.mean_x) @ self.w_x, (s - self.mean_s) @ self.w_s

    def to_tensors(self) -> dict[str, np.ndarray]:
        """Named tensors for the checkpoint container."""
        return {
            "W_x": self.w_x,
            "W_s": self.w_s,
            "rho": self.rho,
            "mean_x": self.mean_x,
            "mean_s": self.mean_s,
            "J": np.array([self.n_components]),
            "n_lags": np.array([self.n_lags, self.n_env_lags]),
        }

    @classmethod
    def from_tensors(cls, tensors: dict[str, np.ndarray]) -> CcaModel:
        """Rebuild from checkpoint tensors."""
        lags = tensors["n_lags"].astype(int)
        return cls(
            *(tensors[name].astype(np.float64) for name in ("W_x", "W_s", "rho", "mean_x", "mean_s")),
            n_lags=int(lags[0]),
            n_env_lags=int(lags[1]),
        )


def _shrunk(cov: np.ndarray, shrinkage: float) -> np.ndarray:
    return cov + shrinkage * np.trace(cov) / cov.shape[0] * np.eye(cov.shape[0])


def cca_fit(
    x: np.ndarray,
    s: np.ndarray,
    n_components: int | None = None,
    shrinkage: float = CCA_SHRINKAGE,
    n_lags: int = CCA_EEG_LAGS,
    n_env_lags: int = CCA_ENV_LAGS,
) -> CcaModel:
    """Canonical correlation analysis via a generalized eigendecomposition."""
    if x.shape[0] != s.shape[0]:
        raise ShapeError("CCA rows", x.shape[0], s.shape[0])
    dim_x, dim_s = x.shape[1], s.shape[1]
    if x.shape[0] <= dim_x + dim_s:
        rank = np.linalg.matrix_rank(np.hstack([x, s]) - np.hstack([x, s]).mean(axis=0))
        raise DecoderError(
            f"CCA needs more rows than the {dim_x + dim_s} dimensions; "
            f"effective rank is {rank} from {x.shape[0]} rows"
        )
    n_components = n_components or min(dim_x, dim_s)
    if not 1 <= n_components <= min(dim_x, dim_s):
        raise DecoderError(f"J must be in [1, {min(dim_x, dim_s)}], got {n_components}")
    mean_x, mean_s = x.mean(axis=0), s.mean(axis=0)
    x_c, s_c = x - mean_x, s - mean_s
    rows = x.shape[0]
    r_xx = _shrunk(x_c.T @ x_c / rows, shrinkage)
    r_ss = _shrunk(s_c.T @ s_c / rows, shrinkage)
    r_xs = x_c.T @ s_c / rows
    lhs = np.zeros((dim_x + dim_s, dim_x + dim_s))
    lhs[:dim_x, dim_x:] = r_xs
    lhs[dim_x:, :dim_x] = r_xs.T
    rhs = scipy.linalg.block_diag(r_xx, r_ss)
    try:
        eigval, eigvec = scipy.linalg.eigh(lhs, rhs)
    except np.linalg.LinAlgError as err:
        raise DecoderError(f"CCA eigenproblem failed: {err}") from err
    order = np.argsort(eigval)[::-1][:n_components]
    w_x = eigvec[:dim_x, order]
    w_s = eigvec[dim_x:, order]
    w_x = w_x / np.sqrt(np.einsum("ij,ik,kj->j", w_x, r_xx, w_x))
    w_s = w_s / np.sqrt(np.einsum("ij,ik,kj->j", w_s, r_ss, w_s))
    rho = np.clip(eigval[order], -1.0, 1.0)
    _LOGGER.debug("CCA fitted on %s rows, leading correlations %s", rows, rho[:3].round(3))
    return CcaModel(w_x, w_s, rho, mean_x, mean_s, n_lags, n_env_lags)


def cca_fit_trials(
    trials: Sequence[Trial],
    n_lags: int = CCA_EEG_LAGS,
    n_env_lags: int = CCA_ENV_LAGS,
    n_components: int | None = None,
) -> CcaModel:
    """Fit CCA on the attended envelope of concatenated training trials."""
    if not trials:
        raise DecoderError("No training trials for CCA")
    pairs = [cca_pair(t.eeg, t.attended_envelope, n_lags, n_env_lags) for t in trials]
    x = np.vstack([pair[0] for pair in pairs])
    s = np.vstack([pair[1] for pair in pairs])
    return cca_fit(x, s, n_components, n_lags=n_lags, n_env_lags=n_env_lags)


def _too_short(model: CcaModel, n_samples: int) -> bool:
    return n_samples - model.n_lags - model.n_env_lags + 2 < 2


def cca_features(
    model: CcaModel, eeg_window: np.ndarray, envelope: np.ndarray
) -> tuple[np.ndarray, bool]:
    """J correlations between paired decoder and encoder outputs on a window.

    A window too short to fill both lag matrices gives zero features, flagged.
    """
    n_samples = np.atleast_2d(eeg_window).shape[1]
    if _too_short(model, n_samples):
        _LOGGER.warning(
            "Window of %s samples too short for %s EEG and %s envelope lags",
            n_samples,
            model.n_lags,
            model.n_env_lags,
        )
        return np.zeros(model.n_components), True
    x, s = cca_pair(eeg_window, envelope, model.n_lags, model.n_env_lags)
    u, v = model.project(x, s)
    r, degenerate = pearson_columns(u, v)
    return r, bool(degenerate.any())


@dataclass
class LdaClassifier:
    """Binary linear discriminant over J difference features."""

    weight: np.ndarray
    bias: float
    priors: np.ndarray

    @property
    def n_features(self) -> int:
        """Return J."""
        return self.weight.size

    def score(self, features: np.ndarray) -> np.ndarray:
        """Linear score; positive means class 1."""
        return np.asarray(features) @ self.weight + self.bias

    def predict(self, features: np.ndarray) -> np.ndarray:
        """Class labels for feature rows."""
        return (self.score(features) > 0).astype(int)

    def to_tensors(self) -> dict[str, np.ndarray]:
        """Named tensors for the checkpoint container."""
        return {
            "lda_weight": self.weight,
            "lda_bias": np.array([self.bias]),
            "lda_priors": self.priors,
        }

    @classmethod
    def from_tensors(cls, tensors: dict[str, np.ndarray]) -> LdaClassifier:
        """Rebuild from checkpoint tensors."""
        return cls(
            weight=tensors["lda_weight"].astype(np.float64),
            bias=float(tensors["lda_bias"][0]),
            priors=tensors["lda_priors"].astype(np.float64),
        )


def lda_fit(features: np.ndarray, labels: np.ndarray) -> LdaClassifier:
    """Shrinkage LDA: weight = pooled covariance^-1 (mu_1 - mu_0)."""
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if features.shape[0] == 1 and np.ndim(labels) == 1 and len(labels) > 1:
        features = features.T
    labels = np.asarray(labels).astype(int)
    if np.unique(labels).size < 2:
        raise DecoderError("LDA needs samples of both classes")
    lda = LinearDiscriminantAnalysis(solver="lsqr", shrinkage="auto")
    lda.fit(features, labels)
    return LdaClassifier(
        weight=lda.coef_[0].copy(), bias=float(lda.intercept_[0]), priors=lda.priors_.copy()
    )


@dataclass
class CcaDecoder:
    """Fitted CCA model with its LDA classifier."""

    model: CcaModel
    lda: LdaClassifier

    def to_tensors(self) -> dict[str, np.ndarray]:
        """Named tensors for the checkpoint container."""
        return {**self.model.to_tensors(), **self.lda.to_tensors()}

    @classmethod
    def from_tensors(cls, tensors: dict[str, np.ndarray]) -> CcaDecoder:
        """Rebuild from checkpoint tensors."""
        return cls(CcaModel.from_tensors(tensors), LdaClassifier.from_tensors(tensors))


def cca_classify(
    model: CcaModel,
    lda: LdaClassifier,
    eeg_window: np.ndarray,
    env_a: np.ndarray,
    env_b: np.ndarray,
) -> Decision:
    """LDA on the difference of the two streams' CCA correlation vectors."""
    if lda.n_features != model.n_components:
        raise DecoderError(
            f"LDA trained on J={lda.n_features}, CCA model has J={model.n_components}"
        )
    feat_a, flag_a = cca_features(model, eeg_window, env_a)
    feat_b, flag_b = cca_features(model, eeg_window, env_b)
    if _too_short(model, np.atleast_2d(eeg_window).shape[1]):
        return decide(0.0, 0.0, True)
    score = float(lda.score(feat_a - feat_b))
    return decide(score, -score, flag_a or flag_b)


def difference_features(
    u: np.ndarray, v_a: np.ndarray, v_b: np.ndarray, windows: Sequence[tuple[int, int]]
) -> np.ndarray:
    """Per-window CCA feature differences from projected trial components."""
    rows = []
    for start, end in windows:
        r_a, _ = pearson_columns(u[start:end], v_a[start:end])
        r_b, _ = pearson_columns(u[start:end], v_b[start:end])
        rows.append(r_a - r_b)
    return np.array(rows).reshape(len(rows), u.shape[1])


def project_trial(model: CcaModel, trial: Trial) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Components of a whole trial (zero-padded lags), for windowed scoring."""
    x = build_lag_matrix(trial.eeg, model.n_lags, pad=True)
    s_a = build_envelope_lags(trial.env_a, model.n_env_lags, pad=True)
    s_b = build_envelope_lags(trial.env_b, model.n_env_lags, pad=True)
    u, v_a = model.project(x, s_a)
    v_b = (s_b - model.mean_s) @ model.w_s
    return u, v_a, v_b


def lda_training_set(
    model: CcaModel, trials: Sequence[Trial], window: int
) -> tuple[np.ndarray, np.ndarray]:
    """Difference features of non-overlapping windows, each also in swapped order."""
    features, labels = [], []
    for trial in trials:
        if trial.n_samples < window:
            continue
        u, v_a, v_b = project_trial(model, trial)
        windows = [(start, start + window) for start in range(0, trial.n_samples - window + 1, window)]
        diff = difference_features(u, v_a, v_b, windows)
        label = 1 if trial.attended == STREAM_A else 0
        features.extend([diff, -diff])
        labels.extend([np.full(len(windows), label), np.full(len(windows), 1 - label)])
    if not features:
        raise DecoderError(f"No training window of {window} samples fits the trials")
    return np.vstack(features), np.concatenate(labels)


@dataclass
class JSelection:
    """Optimal J per analysis window and the minimum across windows."""

    per_window: dict[float, int]

    @property
    def value(self) -> int:
        """Final J: minimum of the per-window optima."""
        return min(self.per_window.values())


def round_half_up(value: float) -> int:
    """Round to the nearest integer, halves upward."""
    return int(math.floor(value + 0.5))


def select_J(  # noqa: N802
    trials: Sequence[Trial],
    window_lengths: Sequence[float],
    n_lags: int = CCA_EEG_LAGS,
    n_env_lags: int = CCA_ENV_LAGS,
    inner_folds: int = INNER_FOLDS,
    seed: int = 0,
) -> JSelection:
    """Inner cross-validation of the LDA accuracy over candidate J per window."""
    if len(trials) < 2:
        raise DecoderError("Inner cross-validation needs at least 2 training trials")
    n_folds = min(inner_folds, len(trials))
    order = np.random.default_rng(seed).permutation(len(trials))
    folds = [order[idx::n_folds] for idx in range(n_folds)]
    max_j = min(n_lags, n_env_lags)
    rate = trials[0].rate
    accuracy = {length: np.zeros(max_j) for length in window_lengths}
    counts = dict.fromkeys(window_lengths, 0)
    for held in folds:
        held_set = set(held.tolist())
        inner_train = [t for idx, t in enumerate(trials) if idx not in held_set]
        inner_val = [t for idx, t in enumerate(trials) if idx in held_set]
        model = cca_fit_trials(inner_train, n_lags, n_env_lags)
        max_j = min(max_j, model.n_components)
        for length in window_lengths:
            window = int(round(length * rate))
            try:
                train_x, train_y = lda_training_set(model, inner_train, window)
                val_x, val_y = lda_training_set(model, inner_val, window)
            except DecoderError:
                continue
            for n_comp in range(1, max_j + 1):
                lda = lda_fit(train_x[:, :n_comp], train_y)
                accuracy[length][n_comp - 1] += np.mean(lda.predict(val_x[:, :n_comp]) == val_y)
            counts[length] += 1
    per_window = {}
    for length in window_lengths:
        if counts[length] == 0:
            continue
        per_window[length] = int(np.argmax(accuracy[length][:max_j])) + 1
    if not per_window:
        raise DecoderError("No inner fold could score any analysis window")
    _LOGGER.debug("Selected J per window: %s", per_window)
    return JSelection(per_window)


def grand_J(selections: Sequence[JSelection]) -> int:  # noqa: N802
    """Mean J_f per window over folds (or subjects), then minimum over windows."""
    if not selections:
        raise DecoderError("No J selections to aggregate")
    windows = sorted({length for sel in selections for length in sel.per_window})
    averaged = []
    for length in windows:
        values = [sel.per_window[length] for sel in selections if length in sel.per_window]
        averaged.append(round_half_up(float(np.mean(values))))
    return min(averaged)


def fit_cca_decoder(
    trials: Sequence[Trial],
    n_components: int,
    window_length: float,
    n_lags: int = CCA_EEG_LAGS,
    n_env_lags: int = CCA_ENV_LAGS,
) -> CcaDecoder:
    """Fit CCA with J components and the LDA on training windows of one length."""
    model = cca_fit_trials(trials, n_lags, n_env_lags)
    model = model.truncate(min(n_components, model.n_components))
    window = int(round(window_length * trials[0].rate))
    features, labels = lda_training_set(model, trials, window)
    return CcaDecoder(model, lda_fit(features, labels))
