"""
Result files of a matrix / run / sweep.

All tables are written with pandas, rows in a fixed order and ``\\n`` line
endings, and JSON with sorted keys, so identical results give identical
files.  Any OS error is re-raised as ReportWriteError carrying the path.
"""

import json
import os
from importlib.metadata import PackageNotFoundError, version

import pandas as pd

import harlearn
from harlearn.dataset import ACTIVITY_CLASSES
from harlearn.errors import ReportWriteError
from harlearn.features import build_catalog
from harlearn.harness import MatrixResult, subject_errors
from harlearn.logutil import get_logger

log = get_logger("reports")

# ---------------------------------------------------------------------------
# File names and schemas
# ---------------------------------------------------------------------------
SUMMARY_FILE = "summary.csv"
CURVES_FILE = "learning_curves.csv"
QUERY_LOG_FILE = "query_log.csv"
CATALOG_FILE = "feature_catalog.csv"
RUN_CONFIG_FILE = "run_config.json"
CLASS_RECALL_FILE = "class_recall.csv"
QUERY_STATS_FILE = "query_stats.csv"
SUBJECT_ERRORS_FILE = "subject_errors.csv"
FAILURES_FILE = "failures.csv"
SWEEP_FILE = "threshold_sweep.csv"
PLOT_SCRIPT_FILE = "plot_curves.py"
MODELS_DIR = "models"

RUN_COLUMNS = ("subject", "position", "classifier", "strategy", "threshold")
CURVE_COLUMNS = RUN_COLUMNS + ("n_models", "ensemble_size", "step", "skipped",
                               "error_rate")
QUERY_LOG_COLUMNS = RUN_COLUMNS + ("step", "row_index", "source", "predicted",
                                   "confidence", "final_label")
CLASS_RECALL_COLUMNS = RUN_COLUMNS + ("n_models", "activity", "recall")
QUERY_STATS_COLUMNS = RUN_COLUMNS + ("n_rows", "n_queried", "n_replaced",
                                     "queried_fraction", "replaced_fraction",
                                     "certain_fraction")
FAILURE_COLUMNS = RUN_COLUMNS + ("error",)

_LIBRARIES = ("numpy", "scipy", "pandas", "scikit-learn")


def _run_fields(config, subject) -> dict:
    return {
        "subject": subject,
        "position": config.position.value,
        "classifier": config.base_kind.value,
        "strategy": config.strategy.label,
        "threshold": config.strategy.threshold,
    }


def curves_frame(results) -> pd.DataFrame:
    rows = [dict(_run_fields(r.config, r.subject_id), n_models=p.n_models,
                 ensemble_size=p.ensemble_size, step=p.step, skipped=int(p.skipped),
                 error_rate=p.error_rate)
            for r in results for p in r.curve.points]
    return pd.DataFrame(rows, columns=list(CURVE_COLUMNS))


def class_recall_frame(results) -> pd.DataFrame:
    rows = [dict(_run_fields(r.config, r.subject_id), n_models=p.n_models,
                 activity=ACTIVITY_CLASSES[c].value, recall=recall)
            for r in results for p in r.curve.points
            for c, recall in enumerate(p.class_recall)]
    return pd.DataFrame(rows, columns=list(CLASS_RECALL_COLUMNS))


def query_log_frame(results) -> pd.DataFrame:
    rows = [dict(_run_fields(r.config, r.subject_id), step=q.step, row_index=q.row_index,
                 source=q.source, predicted=ACTIVITY_CLASSES[q.predicted].value,
                 confidence=q.confidence,
                 final_label=ACTIVITY_CLASSES[q.final_label].value)
            for r in results for q in r.query_log]
    return pd.DataFrame(rows, columns=list(QUERY_LOG_COLUMNS))


def query_stats_frame(results) -> pd.DataFrame:
    rows = [dict(_run_fields(r.config, r.subject_id), n_rows=r.stats.n_rows,
                 n_queried=r.stats.n_queried, n_replaced=r.stats.n_replaced,
                 queried_fraction=r.stats.queried_fraction,
                 replaced_fraction=r.stats.replaced_fraction,
                 certain_fraction=r.stats.certain_fraction)
            for r in results]
    return pd.DataFrame(rows, columns=list(QUERY_STATS_COLUMNS))


def failures_frame(failures) -> pd.DataFrame:
    rows = [dict(_run_fields(f.config, f.subject_id), error=f.error) for f in failures]
    return pd.DataFrame(rows, columns=list(FAILURE_COLUMNS))


def library_versions() -> dict:
    versions = {"harlearn": harlearn.__version__}
    for name in _LIBRARIES:
        try:
            versions[name] = version(name)
        except PackageNotFoundError:
            versions[name] = "unknown"
    return versions


def run_config_document(matrix: MatrixResult) -> dict:
    return {
        "versions": library_versions(),
        "configs": [c.to_dict() for c in matrix.configs],
        "runs": [{"subject": r.subject_id, "config": r.config.label, "seeds": r.seeds,
                  "skipped": [s.step + f"#{s.model_index}" for s in r.ensemble.skipped]}
                 for r in matrix.results],
        "failures": [{"subject": f.subject_id, "config": f.config.label, "error": f.error}
                     for f in matrix.failures],
    }


# ---------------------------------------------------------------------------
# Writers
# ---------------------------------------------------------------------------

def _write_frame(frame: pd.DataFrame, path):
    try:
        frame.to_csv(path, index=False, lineterminator="\n", na_rep="")
    except OSError as exc:
        raise ReportWriteError(path, exc) from exc


def _write_json(data, path):
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(data, f, indent=2, sort_keys=True)
            f.write("\n")
    except OSError as exc:
        raise ReportWriteError(path, exc) from exc


def _write_text(text: str, path):
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    except OSError as exc:
        raise ReportWriteError(path, exc) from exc


def _model_file_name(result) -> str:
    c = result.config
    return (f"{result.subject_id}_{c.position.value}_{c.base_kind.value}_"
            f"{c.strategy.label}.json")


def emit_reports(matrix: MatrixResult, out_dir, catalog=None, plot_script: bool = False,
                 save_models: bool = False, sweep: pd.DataFrame | None = None) -> list:
    """Write every result file under ``out_dir``; returns the written paths."""
    if not matrix.results and not matrix.failures:
        raise ValueError("nothing to report: no results and no failures")
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise ReportWriteError(out_dir, exc) from exc

    catalog = catalog or build_catalog()
    results = list(matrix.results)
    written = []

    def path(name):
        p = os.path.join(out_dir, name)
        written.append(p)
        return p

    _write_frame(matrix.summary.frame, path(SUMMARY_FILE))
    _write_frame(curves_frame(results), path(CURVES_FILE))
    _write_frame(query_log_frame(results), path(QUERY_LOG_FILE))
    _write_frame(catalog.to_frame(), path(CATALOG_FILE))
    _write_frame(class_recall_frame(results), path(CLASS_RECALL_FILE))
    _write_frame(query_stats_frame(results), path(QUERY_STATS_FILE))
    _write_frame(subject_errors(results), path(SUBJECT_ERRORS_FILE))
    _write_frame(failures_frame(matrix.failures), path(FAILURES_FILE))
    _write_json(run_config_document(matrix), path(RUN_CONFIG_FILE))
    if sweep is not None:
        _write_frame(sweep, path(SWEEP_FILE))
    if plot_script:
        _write_text(PLOT_SCRIPT, path(PLOT_SCRIPT_FILE))
    if save_models:
        models_dir = os.path.join(out_dir, MODELS_DIR)
        try:
            os.makedirs(models_dir, exist_ok=True)
            for r in results:
                p = os.path.join(models_dir, _model_file_name(r))
                r.ensemble.save(p)
                written.append(p)
        except OSError as exc:
            raise ReportWriteError(models_dir, exc) from exc

    log.info("Wrote %d report files to %s", len(written), out_dir)
    return written


PLOT_SCRIPT = '''\
"""Plot mean learning curves from learning_curves.csv (requires matplotlib)."""

import os
import sys

import matplotlib.pyplot as plt
import pandas as pd

HERE = os.path.dirname(os.path.abspath(__file__))


def main(out_name="learning_curves.png"):
    curves = pd.read_csv(os.path.join(HERE, "learning_curves.csv"))
    mean = (curves.groupby(["position", "classifier", "strategy", "n_models"])
            ["error_rate"].mean().reset_index())
    positions = sorted(mean["position"].unique())
    classifiers = sorted(mean["classifier"].unique())
    fig, axes = plt.subplots(len(positions), len(classifiers), squeeze=False,
                             sharex=True, sharey=True,
                             figsize=(4 * len(classifiers), 3 * len(positions)))
    for i, position in enumerate(positions):
        for j, classifier in enumerate(classifiers):
            ax = axes[i][j]
            cell = mean[(mean["position"] == position) & (mean["classifier"] == classifier)]
            for strategy, group in cell.groupby("strategy"):
                ax.plot(group["n_models"], 100 * group["error_rate"], marker="o",
                        label=strategy)
            ax.set_title(f"{position} / {classifier}")
            ax.grid(True, alpha=0.3)
            if i == len(positions) - 1:
                ax.set_xlabel("base models")
            if j == 0:
                ax.set_ylabel("error rate (%)")
    axes[0][0].legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(os.path.join(HERE, out_name), dpi=120)


if __name__ == "__main__":
    main(*sys.argv[1:])
'''
