"""Command-line entry point: synth, preprocess, train, eval, mesd, loco and report."""
from __future__ import annotations

import argparse
from collections.abc import Callable, Sequence
from dataclasses import replace
import logging
from pathlib import Path
from typing import Any

from .config import dump_config, eval_settings, load_config, mesd_config, synth_config
from .const import (
    CONF_ALPHA,
    CONF_DATASET,
    CONF_ENVELOPE,
    CONF_N_PERM,
    CONF_OUT,
    CONF_SEARCH_BUDGET,
    CONF_SEED,
    CONF_STATS,
    CONF_TRAIN,
    ENVELOPE_METHODS,
    METHOD_AADNET,
    METHODS,
    MODES,
    VERSION,
)
from .dataset import Dataset, export_trials_csv, load_dataset, save_dataset
from .dsp import preprocess_dataset
from .exceptions import AadkitError, ConfigError
from .log import setup_logging
from .mesd import mesd_from_report
from .network import AADNet
from .pipeline import (
    compare_methods,
    fit_folds,
    loco_channel_importance,
    plan_folds,
    read_report,
    run_evaluation,
    summarize_reports,
    write_csv,
)
from .synth import synth_generate
from .training import TrainConfig, random_search, segment_trials

_LOGGER = logging.getLogger(__name__)

# argparse destination -> flat config key
FLAG_KEYS = {
    "seed": "seed",
    "out": "out",
    "workers": "workers",
    "method": "method",
    "mode": "mode",
    "windows": "windows",
    "dataset": "dataset",
    "envelope": "envelope",
    "subjects": "synth__n_subjects",
    "trials": "synth__trials",
    "length": "synth__trial_length",
    "channels_n": "synth__n_channels",
    "informative": "synth__informative",
    "noise": "synth__noise_std",
    "leakage": "synth__leakage_gain",
    "share_stimuli": "synth__share_stimuli",
    "search_budget": "train__search_budget",
}


def _out(config: dict[str, Any]) -> Path:
    return Path(config[CONF_OUT])


def _dataset(config: dict[str, Any]) -> Dataset:
    if not config[CONF_DATASET]:
        raise ConfigError("No dataset given (--dataset or 'dataset:' in the config)")
    return load_dataset(config[CONF_DATASET])


def _synth(config: dict[str, Any], args: argparse.Namespace) -> None:
    dataset = synth_generate(synth_config(config))
    save_dataset(dataset, _out(config))
    export_trials_csv(dataset, _out(config) / "trials.csv")


def _preprocess(config: dict[str, Any], args: argparse.Namespace) -> None:
    dataset = preprocess_dataset(_dataset(config), config[CONF_ENVELOPE])
    save_dataset(dataset, _out(config))
    export_trials_csv(dataset, _out(config) / "trials.csv")


def _train(config: dict[str, Any], args: argparse.Namespace) -> None:
    dataset = _dataset(config)
    settings = eval_settings(config)
    budget = config[CONF_TRAIN][CONF_SEARCH_BUDGET]
    if budget and settings.method == METHOD_AADNET:
        fold = plan_folds(dataset, settings)[0]
        base = settings.train

        def build(cfg: TrainConfig) -> AADNet:
            return AADNet(dataset.n_channels, cfg.hidden, cfg.dropout, cfg.seed)

        search = random_search(
            build,
            segment_trials(fold.train, base.window_s, base.overlap),
            segment_trials(fold.val, base.window_s, base.overlap),
            base,
            budget,
            seed=settings.seed,
        )
        write_csv(search.frame(), _out(config) / "search.csv")
        settings = replace(settings, train=search.best)
        _LOGGER.info("Search picked %s", search.best)
    fitted = fit_folds(dataset, settings, checkpoints=_out(config) / "checkpoints")
    _LOGGER.info("Saved %s fold checkpoints", len(fitted))


def _eval(config: dict[str, Any], args: argparse.Namespace) -> None:
    report = run_evaluation(_dataset(config), eval_settings(config), checkpoints=args.checkpoints)
    write_csv(report, _out(config) / "report.csv")


def _mesd(config: dict[str, Any], args: argparse.Namespace) -> None:
    result = mesd_from_report(read_report(args.report), mesd_config(config))
    write_csv(result, _out(config) / "mesd.csv")
    _LOGGER.info("%s of %s subjects censored", int(result["censored"].sum()), len(result))


def _loco(config: dict[str, Any], args: argparse.Namespace) -> None:
    drops = loco_channel_importance(_dataset(config), eval_settings(config), args.channels)
    write_csv(drops, _out(config) / "loco.csv")


def _report(config: dict[str, Any], args: argparse.Namespace) -> None:
    summary = summarize_reports([read_report(path) for path in args.reports])
    write_csv(summary, _out(config) / "summary.csv")
    stats = compare_methods(
        summary,
        n_perm=config[CONF_STATS][CONF_N_PERM],
        seed=config[CONF_SEED],
        alpha=config[CONF_STATS][CONF_ALPHA],
    )
    write_csv(stats, _out(config) / "report_stats.csv")


COMMANDS: dict[str, Callable[[dict[str, Any], argparse.Namespace], None]] = {
    "synth": _synth,
    "preprocess": _preprocess,
    "train": _train,
    "eval": _eval,
    "mesd": _mesd,
    "loco": _loco,
    "report": _report,
}


def _csv(value: str) -> list[str]:
    return [item.strip() for item in value.split(",") if item.strip()]


def build_parser() -> argparse.ArgumentParser:
    """Parser with one sub-command per pipeline stage."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML configuration file")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--workers", type=int, help="parallel folds; results do not depend on it")
    common.add_argument("--verbose", "-v", action="store_true", help="debug logging")

    run = argparse.ArgumentParser(add_help=False)
    run.add_argument("--dataset", help="dataset directory")
    run.add_argument("--method", choices=METHODS)
    run.add_argument("--mode", choices=MODES)
    run.add_argument("--windows", help='window lengths in seconds, e.g. "1,2,5,10,20,40"')

    parser = argparse.ArgumentParser(prog="aadkit", description="Auditory attention decoding")
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset")
    synth.add_argument("--subjects", type=int)
    synth.add_argument("--trials", type=int)
    synth.add_argument("--length", type=float, help="trial length in seconds")
    synth.add_argument("--channels", dest="channels_n", type=int)
    synth.add_argument("--informative", help="comma separated informative channel indices")
    synth.add_argument("--noise", type=float)
    synth.add_argument("--leakage", type=float)
    synth.add_argument("--no-share", dest="share_stimuli", action="store_const", const=False)

    pre = sub.add_parser("preprocess", parents=[common], help="filter EEG and extract envelopes")
    pre.add_argument("--dataset", help="raw dataset directory")
    pre.add_argument("--envelope", choices=ENVELOPE_METHODS)

    train = sub.add_parser("train", parents=[common, run], help="fit and save fold models")
    train.add_argument("--search-budget", type=int, help="AADNet random search size")

    evaluate = sub.add_parser("eval", parents=[common, run], help="windowed test accuracy")
    evaluate.add_argument("--checkpoints", type=Path, help="load or save fold models here")

    mesd = sub.add_parser("mesd", parents=[common], help="MESD from an eval report")
    mesd.add_argument("--report", type=Path, required=True)

    loco = sub.add_parser("loco", parents=[common, run], help="leave-one-channel-out importance")
    loco.add_argument("--channels", type=_csv, help="channel labels to test (default all)")

    report = sub.add_parser("report", parents=[common], help="merge reports and compare methods")
    report.add_argument("--reports", type=Path, nargs="+", required=True)
    return parser


def _flags(args: argparse.Namespace) -> dict[str, Any]:
    return {
        key: getattr(args, dest)
        for dest, key in FLAG_KEYS.items()
        if getattr(args, dest, None) is not None
    }


def main(argv: Sequence[str] | None = None) -> int:
    """Run one sub-command; returns the process exit code."""
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    try:
        config = load_config(args.config, _flags(args))
        _LOGGER.info("Running %s with seed %s", args.command, config[CONF_SEED])
        _LOGGER.info("Resolved configuration: %s", config)
        dump_config(config, _out(config))
        COMMANDS[args.command](config, args)
    except AadkitError as err:
        _LOGGER.error("%s failed: %s", args.command, err)
        return 1
    return 0
