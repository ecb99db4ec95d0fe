"""Tests for evaluation runs, channel importance and report statistics."""
import math
from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from aadkit.const import METHOD_AADNET, METHOD_CCA, METHOD_LSR, MODE_SI, REPORT_COLUMNS
from aadkit.exceptions import AadkitError
from aadkit.metrics import chance_level
from aadkit.synth import SynthConfig, synth_generate
from aadkit.pipeline import (
    STATS_COLUMNS,
    SUMMARY_COLUMNS,
    EvalSettings,
    LinearConfig,
    LsrModel,
    compare_methods,
    drop_channel,
    loco_channel_importance,
    plan_folds,
    read_report,
    run_evaluation,
    summarize_reports,
    write_csv,
)
from aadkit.training import TrainConfig

LSR = EvalSettings(windows=(5.0, 10.0), n_folds=4, seed=1)


@pytest.fixture(scope="module")
def lsr_report(small_synth):
    """Subject-specific ridge evaluation of the small dataset."""
    return run_evaluation(small_synth, LSR)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"method": "svm"},
        {"mode": "cross"},
        {"windows": ()},
        {"windows": (10.0, 5.0)},
        {"windows": (0.0, 5.0)},
    ],
)
def test_settings_validation(kwargs):
    """Unknown methods and modes and unsorted windows are refused."""
    with pytest.raises(AadkitError):
        EvalSettings(**kwargs)


def test_plan_folds(small_synth):
    """One fold per subject and fold index; only AADNet pretrains subject-independently."""
    folds = plan_folds(small_synth, LSR)
    assert len(folds) == 2 * 4
    assert all(data.pretrain is None for data in folds)
    aadnet = plan_folds(small_synth, EvalSettings(method=METHOD_AADNET, n_folds=4))
    assert all(data.pretrain is not None for data in aadnet)
    pre_train, pre_val = aadnet[0].pretrain
    assert {t.subject_id for t in pre_train + pre_val} == {"S02"}


def test_report_layout(lsr_report):
    """One row per subject, fold and window with the fixed columns."""
    assert list(lsr_report.columns) == list(REPORT_COLUMNS)
    assert len(lsr_report) == 2 * 4 * 2
    assert set(lsr_report["subject"]) == {"S01", "S02"}
    assert lsr_report["accuracy"].between(0.0, 1.0).all()


def test_report_window_counts(lsr_report):
    """Two 30 s test trials give ten half-overlapping 10 s windows and six disjoint ones."""
    rows = lsr_report[lsr_report["window_s"] == 10.0]
    assert (rows["n_windows"] == 10).all()
    np.testing.assert_allclose(rows["chance"], chance_level(6))


def test_ridge_decodes_synthetic_attention(lsr_report):
    """Long windows are decoded well above chance."""
    assert lsr_report.loc[lsr_report["window_s"] == 10.0, "accuracy"].mean() > 0.7


def test_evaluation_is_deterministic(small_synth, lsr_report):
    """Equal settings give identical reports, independent of the worker count."""
    again = run_evaluation(small_synth, EvalSettings(windows=(5.0, 10.0), n_folds=4, seed=1, workers=3))
    pd.testing.assert_frame_equal(again, lsr_report)


def test_checkpoints_are_reused(small_synth, tmp_path, monkeypatch):
    """A second run loads every fold from its checkpoint instead of refitting."""
    first = run_evaluation(small_synth, LSR, checkpoints=tmp_path)
    assert (tmp_path / "lsr_ss_S01_fold0.npz").exists()
    assert len(list(tmp_path.glob("*.npz"))) == 8

    def refit(self, data):
        raise AssertionError("fold was refitted")

    monkeypatch.setattr(LsrModel, "fit", refit)
    second = run_evaluation(small_synth, LSR, checkpoints=tmp_path)
    pd.testing.assert_frame_equal(first, second)


def test_subject_independent_lsr(small_synth):
    """Leave-one-subject-out runs produce rows for every subject."""
    report = run_evaluation(small_synth, EvalSettings(mode=MODE_SI, windows=(10.0,), n_folds=4))
    assert len(report) == 2 * 4
    assert report["accuracy"].notna().all()


def test_cca_evaluation_and_checkpoints(small_synth, tmp_path):
    """CCA with a fixed J fits per-window LDAs that survive a checkpoint round trip."""
    settings = EvalSettings(
        method=METHOD_CCA, windows=(5.0, 10.0), n_folds=4, linear=LinearConfig(n_components=2)
    )
    first = run_evaluation(small_synth, settings, checkpoints=tmp_path)
    assert (tmp_path / "cca_ss_S02_fold3.npz").exists()
    second = run_evaluation(small_synth, settings, checkpoints=tmp_path)
    pd.testing.assert_frame_equal(first, second)
    assert first["accuracy"].between(0.0, 1.0).all()


@pytest.mark.slow
def test_aadnet_evaluation(small_synth, tmp_path):
    """AADNet pretrains, fine-tunes and logs every fold."""
    settings = EvalSettings(
        method=METHOD_AADNET,
        windows=(5.0,),
        n_folds=4,
        train=TrainConfig(max_epochs=1, patience=1, window_s=5.0, batch_size=32),
    )
    report = run_evaluation(small_synth, settings, checkpoints=tmp_path)
    assert len(report) == 2 * 4
    log = pd.read_csv(tmp_path / "aadnet_ss_S01_fold0.log.csv")
    assert set(log["stage"]) == {0, 1}


def test_drop_channel(small_synth):
    """The remaining channels are re-referenced to their own average."""
    reduced = drop_channel(small_synth, "Ch03")
    assert reduced.channel_labels == ("Ch01", "Ch02", "Ch04", "Ch05", "Ch06")
    np.testing.assert_allclose(reduced.trials[0].eeg.mean(axis=0), 0.0, atol=1e-10)
    assert small_synth.n_channels == 6
    with pytest.raises(AadkitError):
        drop_channel(small_synth, "Cz")


def test_loco_channel_importance(small_synth):
    """One accuracy drop per requested channel."""
    table = loco_channel_importance(small_synth, EvalSettings(windows=(10.0,), n_folds=4), ["Ch01"])
    assert list(table.columns) == ["channel_label", "accuracy_drop"]
    assert table["channel_label"].tolist() == ["Ch01"]
    assert -1.0 <= table["accuracy_drop"].iloc[0] <= 1.0


def test_loco_ranks_the_only_informative_channel_first():
    """When only Ch01 carries the response, leaving it out costs the most accuracy."""
    dataset = synth_generate(
        SynthConfig(n_subjects=1, trials=8, trial_length=30.0, n_channels=4, informative=(0,), noise_std=0.2, seed=4)
    )
    table = loco_channel_importance(dataset, EvalSettings(windows=(10.0,), n_folds=4))
    assert table["channel_label"].tolist() == ["Ch01", "Ch02", "Ch03", "Ch04"]
    ranked = table.sort_values("accuracy_drop", ascending=False)
    assert ranked["channel_label"].iloc[0] == "Ch01"
    assert ranked["accuracy_drop"].iloc[0] > ranked["accuracy_drop"].iloc[1] + 0.2


def _report(method, accuracies, window_s=10.0):
    return pd.DataFrame(
        [
            (method, f"S{idx + 1:02d}", fold, window_s, 10, acc, 0.8)
            for idx, acc in enumerate(accuracies)
            for fold in range(2)
        ],
        columns=list(REPORT_COLUMNS),
    )


def test_summarize_fills_missing_cells():
    """Subjects missing for a method appear with NaN accuracy and zero folds."""
    summary = summarize_reports([_report("lsr", [0.7, 0.8]), _report("cca", [0.9])])
    assert list(summary.columns) == list(SUMMARY_COLUMNS)
    assert len(summary) == 4
    missing = summary[(summary["method"] == "cca") & (summary["subject"] == "S02")].iloc[0]
    assert math.isnan(missing["accuracy"])
    assert missing["n_folds"] == 0
    present = summary[(summary["method"] == "lsr") & (summary["subject"] == "S01")].iloc[0]
    assert present["n_folds"] == 2


def test_compare_methods():
    """Every method pair is tested per window with a Bonferroni correction."""
    rng = np.random.default_rng(0)
    base = rng.uniform(0.55, 0.7, 12)
    summary = summarize_reports(
        [_report("lsr", base), _report("cca", base + 0.2), _report("aadnet", base + 0.01)]
    )
    stats = compare_methods(summary, n_perm=2000, seed=0)
    assert list(stats.columns) == list(STATS_COLUMNS)
    assert len(stats) == 3
    row = stats[(stats["method_1"] == "cca") & (stats["method_2"] == "lsr")].iloc[0]
    assert row["n_subjects"] == 12
    assert row["p_value"] < 0.01
    np.testing.assert_allclose(stats["p_bonferroni"], np.minimum(1.0, 3 * stats["p_value"]))
    assert row["significant"]
    np.testing.assert_array_equal(stats["significant"], stats["p_bonferroni"] < 0.05)


def test_compare_methods_alpha_sets_significance():
    """A stricter alpha than any attainable p-value marks no pair significant."""
    rng = np.random.default_rng(0)
    base = rng.uniform(0.55, 0.7, 12)
    summary = summarize_reports([_report("lsr", base), _report("cca", base + 0.2)])
    loose = compare_methods(summary, n_perm=2000, seed=0, alpha=0.05)
    strict = compare_methods(summary, n_perm=2000, seed=0, alpha=1e-6)
    assert loose["significant"].all()
    assert not strict["significant"].any()
    np.testing.assert_array_equal(loose["p_value"], strict["p_value"])


def test_csv_round_trip_keeps_missing(tmp_path):
    """Missing accuracies are written as NA and read back as NaN."""
    summary = summarize_reports([_report("lsr", [0.7, 0.8]), _report("cca", [0.9])])
    loaded = read_report(write_csv(summary, tmp_path / "out" / "summary.csv"))
    assert "NA" in (tmp_path / "out" / "summary.csv").read_text()
    assert loaded["accuracy"].isna().sum() == 1


def test_read_report_missing_file(tmp_path):
    """An unreadable report is an aadkit error."""
    with pytest.raises(AadkitError):
        read_report(tmp_path / "absent.csv")


ACCEPTANCE = SynthConfig(n_subjects=8, trials=40, trial_length=30.0, leakage_gain=0.2, noise_std=0.5, seed=0)


@pytest.mark.slow
@pytest.mark.parametrize("method", [METHOD_LSR, METHOD_CCA])
def test_linear_decoders_reach_acceptance(method):
    """Both linear decoders exceed 90 % at 20 s on the eight-subject corpus."""
    report = run_evaluation(synth_generate(ACCEPTANCE), EvalSettings(method=method, windows=(20.0,), workers=4))
    per_subject = report.groupby("subject")["accuracy"].mean()
    assert per_subject.mean() >= 0.90


@pytest.mark.slow
def test_null_corpus_stays_at_chance():
    """Without stimulus-driven activity the mean accuracy does not exceed chance."""
    null = synth_generate(replace(ACCEPTANCE, attended_gain=0.0, leakage_gain=0.0))
    report = run_evaluation(null, EvalSettings(windows=(20.0,), workers=4))
    assert report.groupby("subject")["accuracy"].mean().mean() <= chance_level(40)


@pytest.mark.slow
def test_aadnet_reaches_acceptance():
    """Subject-specific AADNet exceeds 85 % at 20 s on the eight-subject corpus."""
    settings = EvalSettings(
        method=METHOD_AADNET,
        windows=(20.0,),
        workers=4,
        train=TrainConfig(lr=1e-3, batch_size=32, max_epochs=20, patience=3, window_s=5.0),
    )
    report = run_evaluation(synth_generate(ACCEPTANCE), settings)
    assert report.groupby("subject")["accuracy"].mean().mean() >= 0.85
