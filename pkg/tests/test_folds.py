"""Tests for fold plans and window segmentation."""
import numpy as np
import pytest

from aadkit.const import MODE_SI, MODE_SS
from aadkit.exceptions import FoldError
from aadkit.folds import (
    FoldPlan,
    TrialRef,
    WindowSpec,
    assign_folds,
    make_windows,
    non_overlapping_count,
    split_si_cross_trial,
    split_ss,
    trial_windows,
)

from .conftest import make_trial


def _subject(subject_id, n_trials, stimuli=None, n_samples=64):
    stimuli = stimuli or [(f"{subject_id}-a{i}", f"{subject_id}-b{i}") for i in range(n_trials)]
    return [
        make_trial(subject_id, f"T{i + 1:02d}", stimuli[i], attended=i % 2, n_samples=n_samples)
        for i in range(n_trials)
    ]


def test_forty_trials_give_5_28_7():
    """Eight folds of 40 trials: 5 test, 28 train, 7 validation."""
    plans = split_ss(_subject("S01", 40), n_folds=8, seed=0)
    assert len(plans) == 8
    for plan in plans:
        assert (len(plan.test), len(plan.train), len(plan.val)) == (5, 28, 7)


def test_test_folds_partition_trials():
    """Every trial is tested exactly once."""
    trials = _subject("S01", 23)
    plans = split_ss(trials, n_folds=8, seed=4)
    tested = [ref.key for plan in plans for ref in plan.test]
    assert sorted(tested) == sorted(trial.key for trial in trials)


def test_roles_are_disjoint():
    """No trial has two roles within a fold."""
    for plan in split_ss(_subject("S01", 16), n_folds=8, seed=1):
        train, val, test = ({r.key for r in refs} for refs in (plan.train, plan.val, plan.test))
        assert not (train & val or train & test or val & test)
        assert len(train | val | test) == 16


def test_plans_are_deterministic():
    """The same seed gives the same plans, another seed a different one."""
    trials = _subject("S01", 20)
    assert split_ss(trials, seed=7) == split_ss(trials, seed=7)
    assert split_ss(trials, seed=7) != split_ss(trials, seed=8)


def test_assign_folds_sizes():
    """Fold sizes differ by at most one."""
    sizes = [fold.size for fold in assign_folds(37, 8, 0)]
    assert sum(sizes) == 37
    assert max(sizes) - min(sizes) <= 1


def test_ss_rejects_too_few_trials():
    """Fewer trials than folds is an error."""
    with pytest.raises(FoldError):
        split_ss(_subject("S01", 5), n_folds=8)


def test_si_excludes_shared_test_stimuli():
    """Training trials attending a test stimulus are removed, nothing else."""
    shared = [(f"s{i}", f"u{i}") for i in range(8)]
    trials = _subject("S01", 8, shared) + _subject("S02", 8, shared) + _subject("S03", 8)
    plans = split_si_cross_trial(trials, "S01", n_folds=8, seed=0)
    for plan in plans:
        blocked = {ref.attended_stimulus for ref in plan.test}
        fit_stimuli = {ref.attended_stimulus for ref in plan.fit}
        assert not blocked & fit_stimuli
        assert all(ref.subject_id != "S01" for ref in plan.fit)
        assert len(plan.fit) == 16 - len(plan.test)


def test_si_without_sharing_keeps_everything():
    """When no stimulus is shared all other-subject trials are used."""
    trials = _subject("S01", 8) + _subject("S02", 8) + _subject("S03", 8)
    for plan in split_si_cross_trial(trials, "S02", n_folds=4, seed=2):
        assert len(plan.fit) == 16
        assert plan.mode == MODE_SI


def test_si_test_sets_match_ss():
    """Cross-trial SI folds test the same trials as the SS folds."""
    trials = _subject("S01", 8) + _subject("S02", 8)
    ss = split_ss([t for t in trials if t.subject_id == "S01"], n_folds=4, seed=3)
    si = split_si_cross_trial(trials, "S01", n_folds=4, seed=3)
    assert [plan.test for plan in ss] == [plan.test for plan in si]


def test_si_leakage_invariant_on_random_corpora():
    """Random stimulus assignments never leak a test stimulus into training."""
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n_subjects = int(rng.integers(2, 5))
        n_trials = int(rng.integers(4, 9))
        pool = [f"stim{i}" for i in range(int(rng.integers(4, 20)))]
        trials = []
        for s in range(n_subjects):
            picks = [tuple(rng.choice(pool, 2, replace=False)) for _ in range(n_trials)]
            trials += _subject(f"S{s}", n_trials, picks, n_samples=8)
        try:
            plans = split_si_cross_trial(trials, "S0", n_folds=4, seed=int(rng.integers(100)))
        except FoldError:
            continue
        for plan in plans:
            assert not {r.attended_stimulus for r in plan.test} & {r.attended_stimulus for r in plan.fit}


def test_si_needs_two_subjects():
    """Leave-one-subject-out is undefined for one subject."""
    with pytest.raises(FoldError):
        split_si_cross_trial(_subject("S01", 8), "S01", n_folds=4)


def test_si_reports_exhausted_pool():
    """Filtering that leaves fewer than two training trials is an error."""
    shared = [("s0", "s0")] * 4
    trials = _subject("S01", 4, shared) + _subject("S02", 4, shared)
    with pytest.raises(FoldError, match="leaves 0"):
        split_si_cross_trial(trials, "S01", n_folds=4)


def test_plan_check_detects_leak():
    """A hand-built plan with a leaked stimulus fails its check."""
    test = (TrialRef("S01", "T1", "x"),)
    train = (TrialRef("S02", "T1", "x"), TrialRef("S02", "T2", "y"))
    with pytest.raises(FoldError, match="x"):
        FoldPlan(0, MODE_SI, "S01", train, (), test).check()
    FoldPlan(0, MODE_SS, "S01", (TrialRef("S01", "T2", "x"),), (), test).check()


def test_plan_check_detects_two_roles():
    """A trial in train and test fails the check."""
    ref = TrialRef("S01", "T1", "x")
    with pytest.raises(FoldError):
        FoldPlan(0, MODE_SS, "S01", (ref,), (), (ref,)).check()


def test_window_example_25_seconds():
    """A 25 s trial with 10 s windows and 50% overlap gives windows at 0, 5, 10 and 15 s."""
    windows, short = make_windows(25 * 64, 64.0, WindowSpec(10.0, 0.5))
    assert not short
    assert windows == [(0, 640), (320, 960), (640, 1280), (960, 1600)]


@pytest.mark.parametrize("seconds", [1.0, 2.0, 5.0, 10.0, 20.0, 40.0])
@pytest.mark.parametrize("trial_seconds", [7.3, 40.0, 61.0, 300.0])
def test_window_bounds(seconds, trial_seconds):
    """Windows have the requested length and stay inside the trial."""
    n_samples = int(trial_seconds * 64)
    windows, short = make_windows(n_samples, 64.0, WindowSpec(seconds))
    assert short == (n_samples < int(seconds * 64))
    for start, end in windows:
        assert end - start == int(seconds * 64)
        assert 0 <= start and end <= n_samples
    if windows:
        assert n_samples - windows[-1][1] < int(seconds * 32)


def test_short_trial_warns(caplog):
    """A trial shorter than the window yields no windows and a warning."""
    trial = make_trial(n_samples=100)
    assert trial_windows(trial, WindowSpec(10.0)) == []
    assert "shorter than" in caplog.text


def test_window_spec_validation():
    """Overlap must be in [0, 1) and the length positive."""
    with pytest.raises(FoldError):
        WindowSpec(10.0, 1.0)
    with pytest.raises(FoldError):
        WindowSpec(0.0)


def test_non_overlapping_count():
    """Disjoint windows are counted per trial."""
    trials = [make_trial(n_samples=25 * 64), make_trial(n_samples=40 * 64)]
    assert non_overlapping_count(trials, 10.0) == 2 + 4
