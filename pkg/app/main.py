"""
harlearn command-line entry point.

Sub-commands:

  run      one (position, classifier, strategy) cell, every held-out subject
  matrix   the full grid of positions x classifiers x strategies
  sweep    semi-supervised runs of one cell over a list of thresholds
  catalog  dump the feature catalog as CSV
  synth    write the synthetic desk-scale dataset

Defaults come from ``harlearn.config``; a JSON settings file (``--settings``)
overrides them and command-line flags override the file.
"""

import argparse
import os
import sys
import threading

# ---------------------------------------------------------------------------
# Ensure the repo root is on sys.path so `harlearn.*` and `app.*` imports work
# regardless of how the CLI is launched.
# ---------------------------------------------------------------------------
_REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if _REPO_ROOT not in sys.path:
    sys.path.insert(0, _REPO_ROOT)

from harlearn import __version__  # noqa: E402
from harlearn.classifiers import BaseKind  # noqa: E402
from harlearn.config import (  # noqa: E402
    DEFAULT_MASTER_SEED,
    DEFAULT_SWEEP_THRESHOLDS,
    DEFAULT_THRESHOLDS,
    MODELS_PER_STEP,
    TrainingRecipe,
    load_settings,
)
from harlearn.dataset import BodyPosition, DatasetManifest  # noqa: E402
from harlearn.errors import HarLearnError  # noqa: E402
from harlearn.event_bus import EventBus, EventType  # noqa: E402
from harlearn.features import build_catalog  # noqa: E402
from harlearn.harness import (  # noqa: E402
    RUN_WORKERS,
    ExperimentConfig,
    FeatureStore,
    matrix_configs,
    run_matrix,
    run_threshold_sweep,
)
from harlearn.logutil import get_logger, setup_logging  # noqa: E402
from harlearn.personalization import LabelingStrategy, StrategyKind  # noqa: E402
from harlearn.reports import emit_reports  # noqa: E402
from harlearn.synth import MANIFEST_NAME, SynthConfig, write_synthetic_dataset  # noqa: E402

log = get_logger("app")

EXIT_OK = 0
EXIT_FAILED_RUNS = 1
EXIT_ERROR = 2


# ---------------------------------------------------------------------------
# Progress reporting
# ---------------------------------------------------------------------------

class ProgressReporter:
    """Counts finished / failed LOSO runs from the event bus."""

    def __init__(self, bus: EventBus, total: int):
        self.total = total
        self.finished = 0
        self.failed = 0
        self._lock = threading.Lock()
        bus.subscribe(EventType.RUN_FINISHED, self._on_finished)
        bus.subscribe(EventType.RUN_FAILED, self._on_failed)

    def _on_finished(self, data):
        with self._lock:
            self.finished += 1
            done = self.finished + self.failed
        result = data["result"]
        log.info("[%d/%d] %s %s: final error %.2f%%", done, self.total,
                 data["config"].label, data["subject"], 100 * result.curve.final_error)

    def _on_failed(self, data):
        with self._lock:
            self.failed += 1
            done = self.finished + self.failed
        log.error("[%d/%d] %s %s failed: %s", done, self.total, data["config"].label,
                  data["subject"], data["error"])


# ---------------------------------------------------------------------------
# Settings resolution
# ---------------------------------------------------------------------------

def _resolve(args) -> dict:
    """Merge defaults, the settings file and command-line flags."""
    settings = load_settings(getattr(args, "settings", None))
    recipe_data = dict(settings.get("recipe", {}))
    for flag, key in (("sampling_fraction", "sampling_fraction"),
                      ("pool_sampling_fraction", "pool_sampling_fraction"),
                      ("noise_copies", "noise_copies"),
                      ("noise_scale", "noise_scale"),
                      ("sfs_max_features", "sfs_max_features")):
        value = getattr(args, flag, None)
        if value is not None:
            recipe_data[key] = value
    if getattr(args, "no_laplace", False):
        recipe_data.setdefault("classifier", {})
        recipe_data["classifier"] = dict(recipe_data["classifier"], cart_laplace=False)

    seed = getattr(args, "seed", None)
    if seed is None:
        seed = settings.get("master_seed", DEFAULT_MASTER_SEED)
    recipe_data["seed"] = seed
    thresholds = getattr(args, "thresholds", None) or settings.get("thresholds")
    workers = getattr(args, "workers", None) or settings.get("workers", RUN_WORKERS)
    return {
        "recipe": TrainingRecipe.from_dict(recipe_data),
        "master_seed": int(seed),
        "thresholds": tuple(thresholds) if thresholds else None,
        "workers": int(workers),
        "models_per_step": int(settings.get("models_per_step", MODELS_PER_STEP)),
    }


def _manifest(args) -> DatasetManifest:
    path = args.manifest or os.path.join(args.data, MANIFEST_NAME)
    return DatasetManifest.load(path)


def _strategy(args) -> LabelingStrategy:
    kind = StrategyKind(args.strategy)
    if kind is StrategyKind.SEMI_SUPERVISED:
        return LabelingStrategy.semi_supervised(
            args.threshold if args.threshold is not None else DEFAULT_THRESHOLDS[-1])
    if args.threshold is not None:
        log.warning("--threshold is ignored for the %s strategy", kind.value)
    return LabelingStrategy(kind)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _finish(matrix, args, sweep=None) -> int:
    emit_reports(matrix, args.out, plot_script=args.plot_script,
                 save_models=args.save_models, sweep=sweep)
    if matrix.failures:
        log.error("%d run(s) failed; see %s", len(matrix.failures),
                  os.path.join(args.out, "failures.csv"))
        return EXIT_FAILED_RUNS
    return EXIT_OK


def cmd_run(args) -> int:
    resolved = _resolve(args)
    manifest = _manifest(args)
    config = ExperimentConfig(position=args.position, base_kind=args.classifier,
                              strategy=_strategy(args), manifest=manifest,
                              recipe=resolved["recipe"],
                              master_seed=resolved["master_seed"],
                              models_per_step=resolved["models_per_step"])
    subjects = args.subject or list(manifest.included_subjects)
    bus = EventBus()
    ProgressReporter(bus, len(subjects))
    matrix = run_matrix([config], FeatureStore(args.data, manifest), subjects=subjects,
                        workers=resolved["workers"], bus=bus)
    return _finish(matrix, args)


def cmd_matrix(args) -> int:
    resolved = _resolve(args)
    manifest = _manifest(args)
    configs = matrix_configs(manifest, resolved["thresholds"] or DEFAULT_THRESHOLDS,
                             positions=args.positions, kinds=args.classifiers,
                             recipe=resolved["recipe"],
                             master_seed=resolved["master_seed"],
                             models_per_step=resolved["models_per_step"])
    bus = EventBus()
    ProgressReporter(bus, len(configs) * len(manifest.included_subjects))
    matrix = run_matrix(configs, FeatureStore(args.data, manifest),
                        workers=resolved["workers"], bus=bus)
    log.info("Summary (error %%):\n%s", matrix.summary.frame.to_string(
        index=False, float_format=lambda v: f"{v:.1f}"))
    return _finish(matrix, args)


def cmd_sweep(args) -> int:
    resolved = _resolve(args)
    manifest = _manifest(args)
    thresholds = resolved["thresholds"] or DEFAULT_SWEEP_THRESHOLDS
    base = ExperimentConfig(position=args.position, base_kind=args.classifier,
                            strategy=LabelingStrategy.semi_supervised(thresholds[0]),
                            manifest=manifest, recipe=resolved["recipe"],
                            master_seed=resolved["master_seed"],
                            models_per_step=resolved["models_per_step"])
    bus = EventBus()
    ProgressReporter(bus, len(thresholds) * len(manifest.included_subjects))
    table, matrix = run_threshold_sweep(base, thresholds, FeatureStore(args.data, manifest),
                                        workers=resolved["workers"], bus=bus)
    log.info("Threshold sweep:\n%s", table.to_string(index=False))
    return _finish(matrix, args, sweep=table)


def cmd_catalog(args) -> int:
    frame = build_catalog().to_frame()
    if args.out:
        frame.to_csv(args.out, index=False, lineterminator="\n")
        log.info("Wrote %d catalog entries to %s", len(frame), args.out)
    else:
        frame.to_csv(sys.stdout, index=False, lineterminator="\n")
    return EXIT_OK


def cmd_synth(args) -> int:
    config = SynthConfig(n_subjects=args.subjects, segment_seconds=args.segment_seconds,
                         noise_scale=args.noise, seed=args.seed)
    write_synthetic_dataset(args.out, config)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _add_data_args(p):
    p.add_argument("--data", required=True, help="directory of <subject>_<position>.csv")
    p.add_argument("--manifest", help="subject manifest (default: <data>/manifest.json)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--settings", help="JSON settings file")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--workers", type=int, help="parallel LOSO runs")
    p.add_argument("--sampling-fraction", dest="sampling_fraction", type=float)
    p.add_argument("--pool-sampling-fraction", dest="pool_sampling_fraction", type=float)
    p.add_argument("--noise-copies", dest="noise_copies", type=int)
    p.add_argument("--noise-scale", dest="noise_scale", type=float)
    p.add_argument("--sfs-max-features", dest="sfs_max_features", type=int)
    p.add_argument("--no-laplace", dest="no_laplace", action="store_true",
                   help="raw leaf frequencies for CART posteriors")
    p.add_argument("--plot-script", dest="plot_script", action="store_true",
                   help="also write plot_curves.py")
    p.add_argument("--save-models", dest="save_models", action="store_true",
                   help="write every final ensemble as JSON")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="harlearn",
        description="Incremental ensemble personalization of activity recognition models")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-dir", dest="log_dir", help="directory for the log file")
    sub = parser.add_subparsers(dest="command", required=True)

    positions = [p.value for p in BodyPosition]
    kinds = [k.value for k in BaseKind]

    p = sub.add_parser("run", help="one configuration, every held-out subject")
    _add_data_args(p)
    p.add_argument("--position", required=True, choices=positions)
    p.add_argument("--classifier", required=True, choices=kinds)
    p.add_argument("--strategy", required=True, choices=[s.value for s in StrategyKind])
    p.add_argument("--threshold", type=float)
    p.add_argument("--subject", action="append", help="held-out subject (repeatable)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("matrix", help="all positions x classifiers x strategies")
    _add_data_args(p)
    p.add_argument("--thresholds", type=float, nargs="+")
    p.add_argument("--positions", nargs="+", choices=positions)
    p.add_argument("--classifiers", nargs="+", choices=kinds)
    p.set_defaults(func=cmd_matrix)

    p = sub.add_parser("sweep", help="semi-supervised threshold sweep for one cell")
    _add_data_args(p)
    p.add_argument("--position", required=True, choices=positions)
    p.add_argument("--classifier", required=True, choices=kinds)
    p.add_argument("--thresholds", type=float, nargs="+")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("catalog", help="print or write the feature catalog")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_catalog)

    p = sub.add_parser("synth", help="write the synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--subjects", type=int, default=SynthConfig.n_subjects)
    p.add_argument("--segment-seconds", dest="segment_seconds", type=float,
                   default=SynthConfig.segment_seconds)
    p.add_argument("--noise", type=float, default=SynthConfig.noise_scale)
    p.add_argument("--seed", type=int, default=SynthConfig.seed)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_dir)
    log.info("harlearn %s: %s", __version__, args.command)
    try:
        return args.func(args)
    except HarLearnError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_ERROR
    except FileNotFoundError as exc:
        log.error("%s", exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
