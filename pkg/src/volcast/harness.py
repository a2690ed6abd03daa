"""The 2 x 9 x 3 experiment grid: run, aggregate, report.

One experiment trains every (architecture, algorithm, hidden-size) cell on a
fixed chronological split, scores train and test predictions in original
volatility units, and aggregates descriptive-statistic tables plus a paired
significance test of the two architectures on test MSE.  Trial seeds derive
from the grid coordinates, never from execution order, so any worker count
produces byte-identical reports.
"""

from __future__ import annotations

import datetime as dt
import hashlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from volcast import backends
from volcast import network as nn
from volcast.errors import (
    ConfigError,
    ConstantVector,
    NumericalDivergence,
    TooFew,
    VolcastError,
)
from volcast.evaluation import (
    ARCH_LABELS,
    DescriptiveStats,
    Metrics,
    TTestResult,
    compute_metrics,
    descriptive_stats,
    significance_verdict,
    t_test_mse,
)
from volcast.features import FeatureDataset, Scaler, chronological_split, fit_scaler
from volcast.network import Topology, forward_batch, init_weights
from volcast.plots import emit_bar_chart, emit_regression_plot
from volcast.trainers import (
    ALGORITHMS,
    DEFAULT_HYPERPARAMETERS,
    TrainConfig,
    TrainerSpec,
    train,
)

METRIC_NAMES = ("MSE", "R", "MAPE")
SPLIT_NAMES = ("train", "test")
DEFAULT_ARCHITECTURES = ("MLFF", "CFFN")
DEFAULT_HIDDEN_SIZES = (20, 30, 40)


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    train_range: tuple[dt.date, dt.date]
    test_range: tuple[dt.date, dt.date]
    validation_fraction: float = 0.15
    architectures: tuple[str, ...] = DEFAULT_ARCHITECTURES
    algorithms: tuple[str, ...] = ALGORITHMS
    hidden_sizes: tuple[int, ...] = DEFAULT_HIDDEN_SIZES
    base_seed: int = 0
    train_config: TrainConfig = TrainConfig()

    def __post_init__(self):
        if not 0.0 <= self.validation_fraction <= 0.5:
            raise ValueError(f"validation_fraction must be in [0, 0.5], "
                             f"got {self.validation_fraction}")
        if not (self.architectures and self.algorithms and self.hidden_sizes):
            raise ValueError("grid dimensions must all be non-empty")
        if any(h < 1 for h in self.hidden_sizes):
            raise ValueError(f"hidden sizes must be >= 1, got {self.hidden_sizes}")

    def grid(self) -> list[tuple[str, str, int]]:
        return [(arch, algo, hidden)
                for arch in self.architectures
                for algo in self.algorithms
                for hidden in self.hidden_sizes]


@dataclass
class TrialResult:
    architecture: str
    algorithm: str
    hidden_size: int
    seed: int
    train_metrics: Metrics | None
    test_metrics: Metrics | None
    epochs_run: int
    stop_reason: str
    error: str | None = None
    test_predictions: np.ndarray | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class ExperimentReport:
    spec: ExperimentSpec
    trials: list[TrialResult]
    stat_tables: dict[tuple[str, str, str], DescriptiveStats]
    stats_note: str
    ttest: TTestResult | None
    ttest_note: str
    excluded: int
    artifacts: list[str] = field(default_factory=list)


def trial_seed(base_seed: int, architecture: str, algorithm: str, hidden_size: int) -> int:
    """Stable seed from the grid coordinates (order-independent by design)."""
    key = f"{base_seed}|{architecture}|{algorithm}|{hidden_size}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big")


def _run_trial(payload) -> TrialResult:
    (arch, algo, hidden, seed, config,
     Xtr, Ytr_s, Xval, Yval_s, Xte, y_scaler, Ytr, Yte) = payload
    topology = Topology(arch, n_inputs=Xtr.shape[1], n_hidden=hidden, n_outputs=Ytr.shape[1])
    net0 = init_weights(topology, seed)
    try:
        trained, record = train(net0, TrainerSpec(algo), config,
                                (Xtr, Ytr_s), (Xval, Yval_s))
        pred_train = y_scaler.inverse_transform(forward_batch(trained, Xtr))
        pred_test = y_scaler.inverse_transform(forward_batch(trained, Xte))
        train_metrics = compute_metrics(Ytr, pred_train)
        test_metrics = compute_metrics(Yte, pred_test)
        for m in (train_metrics, test_metrics):
            if not all(np.isfinite(v) for v in (m.mse, m.r, m.mape)):
                raise NumericalDivergence("non-finite metrics")
    except (NumericalDivergence, ConstantVector) as exc:
        return TrialResult(arch, algo, hidden, seed, None, None,
                           epochs_run=0, stop_reason="Diverged", error=str(exc))
    return TrialResult(arch, algo, hidden, seed, train_metrics, test_metrics,
                       epochs_run=record.epochs_run, stop_reason=record.stop_reason,
                       test_predictions=pred_test)


def run_experiment(spec: ExperimentSpec, dataset: FeatureDataset,
                   workers: int = 1) -> ExperimentReport:
    """Run the full grid; diverged trials are recorded and excluded from stats."""
    train_ds, val_ds, test_ds = chronological_split(
        dataset, spec.train_range, spec.test_range, spec.validation_fraction)
    x_scaler, y_scaler = fit_scaler(train_ds.X, train_ds.Y)
    Xtr = x_scaler.transform(train_ds.X)
    Ytr_s = y_scaler.transform(train_ds.Y)
    Xval = x_scaler.transform(val_ds.X)
    Yval_s = y_scaler.transform(val_ds.Y)
    Xte = x_scaler.transform(test_ds.X)

    payloads = []
    for arch, algo, hidden in spec.grid():
        seed = trial_seed(spec.base_seed, arch, algo, hidden)
        config = replace(spec.train_config, seed=seed)
        payloads.append((arch, algo, hidden, seed, config,
                         Xtr, Ytr_s, Xval, Yval_s, Xte, y_scaler,
                         train_ds.Y, test_ds.Y))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            trials = list(pool.map(_run_trial, payloads))
    else:
        trials = [_run_trial(p) for p in payloads]

    excluded = sum(1 for t in trials if not t.ok)
    stats_note = ""
    try:
        stat_tables = summarize(trials, spec.architectures)
    except TooFew as exc:
        stat_tables = {}
        stats_note = f"TooFew: {exc}"

    ttest = None
    ttest_note = ""
    if len(spec.architectures) == 2:
        arch_a, arch_b = spec.architectures
        by_cell = {(t.architecture, t.algorithm, t.hidden_size): t for t in trials}
        pairs_a, pairs_b = [], []
        for algo in spec.algorithms:
            for hidden in spec.hidden_sizes:
                ta = by_cell.get((arch_a, algo, hidden))
                tb = by_cell.get((arch_b, algo, hidden))
                if ta is not None and tb is not None and ta.ok and tb.ok:
                    pairs_a.append(ta.test_metrics.mse)
                    pairs_b.append(tb.test_metrics.mse)
        try:
            ttest = t_test_mse(pairs_a, pairs_b, paired=True)
        except VolcastError as exc:  # degenerate grids stay reportable
            ttest_note = f"{type(exc).__name__}: {exc}"
    else:
        ttest_note = "t-test needs exactly two architectures"

    return ExperimentReport(spec=spec, trials=trials, stat_tables=stat_tables,
                            stats_note=stats_note, ttest=ttest, ttest_note=ttest_note,
                            excluded=excluded)


def summarize(trials: list[TrialResult],
              architectures=DEFAULT_ARCHITECTURES) -> dict[tuple[str, str, str], DescriptiveStats]:
    """Descriptive stats per (metric, split, architecture) over usable trials.

    Raises TooFew when any architecture has fewer than two usable trials.
    """
    usable = [t for t in trials if t.ok]
    tables: dict[tuple[str, str, str], DescriptiveStats] = {}
    for arch in architectures:
        arch_trials = [t for t in usable if t.architecture == arch]
        if len(arch_trials) < 2:
            raise TooFew(f"architecture {arch} has {len(arch_trials)} usable trials; need >= 2")
        for split in SPLIT_NAMES:
            for metric in METRIC_NAMES:
                values = [_metric_value(t, split, metric) for t in arch_trials]
                tables[(metric, split, arch)] = descriptive_stats(values)
    return tables


def _metric_value(trial: TrialResult, split: str, metric: str) -> float:
    metrics = trial.train_metrics if split == "train" else trial.test_metrics
    return {"MSE": metrics.mse, "R": metrics.r, "MAPE": metrics.mape}[metric]


# --------------------------------------------------------------------------
# report emission

_TRIALS_HEADER = ("architecture,algorithm,hidden_size,seed,"
                  "train_mse,train_r,train_mape,test_mse,test_r,test_mape,"
                  "epochs_run,stop_reason,error")


def emit_report(report: ExperimentReport, out_dir) -> list[str]:
    """Write trials.csv, tables.md, and config.txt; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [
        _write(out_dir / "trials.csv", trials_csv_text(report.trials)),
        _write(out_dir / "tables.md", tables_md_text(report)),
        _write(out_dir / "config.txt", config_txt_text(report)),
    ]
    report.artifacts.extend(paths)
    return paths


def _write(path: Path, text: str) -> str:
    path.write_text(text, encoding="utf-8")
    return str(path)


def trials_csv_text(trials: list[TrialResult]) -> str:
    lines = [_TRIALS_HEADER]
    for t in trials:
        if t.ok:
            cells = [repr(v) for v in (t.train_metrics.mse, t.train_metrics.r,
                                       t.train_metrics.mape, t.test_metrics.mse,
                                       t.test_metrics.r, t.test_metrics.mape)]
            error = ""
        else:
            cells = [""] * 6
            error = (t.error or "").replace("\n", "; ").replace(",", ";")
        lines.append(",".join([t.architecture, t.algorithm, str(t.hidden_size),
                               str(t.seed), *cells, str(t.epochs_run),
                               t.stop_reason, error]))
    return "\n".join(lines) + "\n"


def parse_trials_csv(path) -> list[TrialResult]:
    """Re-read an emitted trials.csv (metrics only; predictions are not stored)."""
    trials = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != _TRIALS_HEADER:
            raise ValueError(f"unexpected trials.csv header: {header!r}")
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(",")
            arch, algo, hidden, seed = parts[0], parts[1], int(parts[2]), int(parts[3])
            error = parts[12] or None
            if error is None and parts[4] != "":
                tm = Metrics(float(parts[4]), float(parts[5]), float(parts[6]))
                sm = Metrics(float(parts[7]), float(parts[8]), float(parts[9]))
            else:
                tm = sm = None
                error = error or "missing metrics"
            trials.append(TrialResult(arch, algo, hidden, seed, tm, sm,
                                      epochs_run=int(parts[10]), stop_reason=parts[11],
                                      error=error))
    return trials


def tables_md_text(report: ExperimentReport) -> str:
    spec = report.spec
    archs = spec.architectures
    lines = [f"# Experiment report: {spec.name}", ""]
    lines.append(f"- grid: {len(spec.architectures)} architectures x "
                 f"{len(spec.algorithms)} algorithms x {len(spec.hidden_sizes)} "
                 f"hidden sizes = {len(spec.grid())} trials")
    lines.append(f"- excluded (diverged): {report.excluded}")
    lines.append("")
    if report.stat_tables:
        for split in SPLIT_NAMES:
            split_label = "training" if split == "train" else "testing"
            for metric in METRIC_NAMES:
                lines.append(f"## {metric} over trials, {split_label} dataset")
                lines.append("")
                header = [metric] + [ARCH_LABELS.get(a, a) for a in archs]
                lines.append("| " + " | ".join(header) + " |")
                lines.append("|" + "---|" * len(header))
                for row_label, attr in (("Min", "minimum"), ("Max", "maximum"),
                                        ("Average", "average"),
                                        ("Standard Deviation", "standard_deviation")):
                    cells = [f"{getattr(report.stat_tables[(metric, split, a)], attr):.4f}"
                             for a in archs]
                    lines.append("| " + " | ".join([row_label] + cells) + " |")
                lines.append("")
    else:
        lines.append(f"Descriptive statistics unavailable: {report.stats_note}")
        lines.append("")
    lines.append("## Significance of the architecture difference (test MSE)")
    lines.append("")
    if report.ttest is not None:
        lines.append(f"Paired t-test, {ARCH_LABELS.get(archs[0], archs[0])} vs "
                     f"{ARCH_LABELS.get(archs[1], archs[1])}: "
                     + significance_verdict(report.ttest))
    else:
        lines.append(f"t-test unavailable: {report.ttest_note}")
    lines.append("")
    return "\n".join(lines)


def config_txt_text(report: ExperimentReport) -> str:
    spec = report.spec
    cfg = spec.train_config
    lines = [
        f"name = {spec.name}",
        f"train_range = {spec.train_range[0].isoformat()} .. {spec.train_range[1].isoformat()}",
        f"test_range = {spec.test_range[0].isoformat()} .. {spec.test_range[1].isoformat()}",
        f"validation_fraction = {spec.validation_fraction!r}",
        f"architectures = {','.join(spec.architectures)}",
        f"algorithms = {','.join(spec.algorithms)}",
        f"hidden_sizes = {','.join(str(h) for h in spec.hidden_sizes)}",
        f"base_seed = {spec.base_seed}",
        f"max_epochs = {cfg.max_epochs}",
        f"goal = {cfg.goal!r}",
        f"patience = {cfg.patience}",
        f"min_grad = {cfg.min_grad!r}",
        f"kernel_backend = {backends.active_backend()}",
        f"trials = {len(report.trials)}",
        f"excluded_diverged = {report.excluded}",
        "",
        "[hyperparameter defaults]",
    ]
    for algo in spec.algorithms:
        for key in sorted(DEFAULT_HYPERPARAMETERS[algo]):
            lines.append(f"{algo}.{key} = {DEFAULT_HYPERPARAMETERS[algo][key]!r}")
    return "\n".join(lines) + "\n"


def emit_plots(report: ExperimentReport, test_actual: np.ndarray, out_dir) -> list[str]:
    """Regression plot of the best test-MSE trial plus per-trial test-MSE bars."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    scored = [t for t in report.trials if t.ok and t.test_predictions is not None]
    if scored:
        best = min(scored, key=lambda t: t.test_metrics.mse)
        path = emit_regression_plot(test_actual, best.test_predictions,
                                    out_dir / "regression.svg")
        paths += [path, str(Path(path).with_suffix(".csv"))]

    archs = report.spec.architectures
    by_cell = {(t.architecture, t.algorithm, t.hidden_size): t for t in report.trials}
    labels, groups = [], {a: [] for a in archs}
    for algo in report.spec.algorithms:
        for hidden in report.spec.hidden_sizes:
            cells = [by_cell.get((a, algo, hidden)) for a in archs]
            if all(c is not None and c.ok for c in cells):
                labels.append(f"{algo}-{hidden}")
                for a, c in zip(archs, cells):
                    groups[a].append(c.test_metrics.mse)
    if labels:
        path = emit_bar_chart(labels, {a: np.array(v) for a, v in groups.items()},
                              out_dir / "test_mse_bars.svg")
        paths += [path, str(Path(path).with_suffix(".csv"))]
    report.artifacts.extend(paths)
    return paths


# --------------------------------------------------------------------------
# experiment config files

_REQUIRED_KEYS = ("train_start", "train_end", "test_start", "test_end")
_KNOWN_KEYS = _REQUIRED_KEYS + (
    "name", "validation_fraction", "architectures", "algorithms",
    "hidden_sizes", "base_seed", "max_epochs", "goal", "patience", "min_grad",
)


def parse_experiment_config(path) -> ExperimentSpec:
    """Flat key=value config; unknown keys are errors, four range keys required."""
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{line_no}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in _KNOWN_KEYS:
                raise ConfigError(f"{path}:{line_no}: unknown key {key!r}")
            if key in values:
                raise ConfigError(f"{path}:{line_no}: duplicate key {key!r}")
            values[key] = value.strip()
    missing = [k for k in _REQUIRED_KEYS if k not in values]
    if missing:
        raise ConfigError(f"{path}: missing required keys: {', '.join(missing)}")

    def _date(key):
        try:
            return dt.date.fromisoformat(values[key])
        except ValueError:
            raise ConfigError(f"{path}: {key} is not a YYYY-MM-DD date: {values[key]!r}") from None

    def _num(key, cast, default):
        if key not in values:
            return default
        try:
            return cast(values[key])
        except ValueError:
            raise ConfigError(f"{path}: bad value for {key}: {values[key]!r}") from None

    spec_kwargs = dict(
        name=values.get("name", Path(path).stem),
        train_range=(_date("train_start"), _date("train_end")),
        test_range=(_date("test_start"), _date("test_end")),
        validation_fraction=_num("validation_fraction", float, 0.15),
        base_seed=_num("base_seed", int, 0),
    )
    if "architectures" in values:
        spec_kwargs["architectures"] = tuple(v.strip() for v in values["architectures"].split(","))
    if "algorithms" in values:
        spec_kwargs["algorithms"] = tuple(v.strip() for v in values["algorithms"].split(","))
    if "hidden_sizes" in values:
        try:
            spec_kwargs["hidden_sizes"] = tuple(int(v) for v in values["hidden_sizes"].split(","))
        except ValueError:
            raise ConfigError(f"{path}: hidden_sizes must be integers") from None
    defaults = TrainConfig()
    try:
        spec_kwargs["train_config"] = TrainConfig(
            max_epochs=_num("max_epochs", int, defaults.max_epochs),
            goal=_num("goal", float, defaults.goal),
            patience=_num("patience", int, defaults.patience),
            min_grad=_num("min_grad", float, defaults.min_grad),
        )
        spec = ExperimentSpec(**spec_kwargs)
        for arch in spec.architectures:
            if arch not in ARCH_LABELS:
                raise ConfigError(f"{path}: unknown architecture {arch!r}")
        for algo in spec.algorithms:
            TrainerSpec(algo)  # validates the name
    except (ValueError, ConfigError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: {exc}") from None
    return spec


def experiment_config_text(spec: ExperimentSpec) -> str:
    """Config-file form of a spec (inverse of parse_experiment_config)."""
    cfg = spec.train_config
    return "\n".join([
        f"name = {spec.name}",
        f"train_start = {spec.train_range[0].isoformat()}",
        f"train_end = {spec.train_range[1].isoformat()}",
        f"test_start = {spec.test_range[0].isoformat()}",
        f"test_end = {spec.test_range[1].isoformat()}",
        f"validation_fraction = {spec.validation_fraction!r}",
        f"architectures = {','.join(spec.architectures)}",
        f"algorithms = {','.join(spec.algorithms)}",
        f"hidden_sizes = {','.join(str(h) for h in spec.hidden_sizes)}",
        f"base_seed = {spec.base_seed}",
        f"max_epochs = {cfg.max_epochs}",
        f"goal = {cfg.goal!r}",
        f"patience = {cfg.patience}",
        f"min_grad = {cfg.min_grad!r}",
    ]) + "\n"
