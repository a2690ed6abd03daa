"""Command-line interface.

Subcommands: fixture (synthetic CSVs), ingest (CSV dir -> aligned dataset),
dataset (inspect/export), train (single trial), experiment (full grid),
plot (overlay / regression).  Exit codes: 0 success, 1 usage or config
error, 2 data error, 3 numerical error.  Errors print one machine-parseable
line to stderr.
"""

from __future__ import annotations

import argparse
import datetime as dt
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from volcast import __version__, backends
from volcast import market_data as md
from volcast import network as nn
from volcast import synthetic
from volcast.errors import (
    ConfigError,
    DataError,
    MissingInstrument,
    NumericalError,
    VolcastError,
)
from volcast.evaluation import compute_metrics, significance_verdict
from volcast.features import (
    DATASET_HEADER,
    FeatureDataset,
    build_dataset,
    chronological_split,
    fit_scaler,
)
from volcast.harness import (
    emit_plots,
    emit_report,
    parse_experiment_config,
    run_experiment,
    trial_seed,
)
from volcast.plots import emit_overlay_plot, emit_regression_plot
from volcast.trainers import (
    ALGORITHMS,
    TrainerSpec,
    export_curve_csv,
    train,
)

USAGE_ERROR, DATA_ERROR, NUMERICAL_ERROR = 1, 2, 3


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 (not 2) on usage problems."""

    def error(self, message):
        self.print_usage(sys.stderr)
        _diagnostic("UsageError", message)
        raise SystemExit(USAGE_ERROR)


def _diagnostic(kind: str, detail) -> None:
    detail = str(detail).replace("\n", "; ")
    sys.stderr.write(f"volcast: error: kind={kind} detail={detail}\n")


def _date(text: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a YYYY-MM-DD date: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="volcast",
                     description="Volatility forecasting pipeline and experiment runner.")
    parser.add_argument("--version", action="version", version=f"volcast {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fixture", help="write the deterministic synthetic instrument CSVs")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=synthetic.DEFAULT_SEED)
    p.add_argument("--start", type=_date, default=synthetic.DEFAULT_START)
    p.add_argument("--end", type=_date, default=synthetic.DEFAULT_END)

    p = sub.add_parser("ingest", help="parse instrument CSVs, align, and export the dataset")
    p.add_argument("--data-dir", required=True, help="directory holding <SYMBOL>.csv files")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--window", type=int, default=20)

    p = sub.add_parser("dataset", help="inspect or slice an exported dataset CSV")
    p.add_argument("--in", dest="path", required=True)
    p.add_argument("--start", type=_date)
    p.add_argument("--end", type=_date)
    p.add_argument("--out", help="write the (sliced) dataset to this CSV")
    p.add_argument("--column", help="extract one column as a date,<name> CSV "
                                    "(suitable for `plot overlay`)")

    p = sub.add_parser("train", help="train one trial and write its artifacts")
    p.add_argument("--data", required=True, help="dataset CSV from ingest")
    p.add_argument("--config", required=True, help="experiment config file")
    p.add_argument("--arch", required=True, choices=("MLFF", "CFFN"))
    p.add_argument("--algorithm", required=True, choices=ALGORITHMS)
    p.add_argument("--hidden", required=True, type=int)
    p.add_argument("--seed", type=int, help="override the derived trial seed")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("experiment", help="run the full trial grid from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True, help="dataset CSV from ingest")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-plots", action="store_true")

    p = sub.add_parser("plot", help="emit standalone SVG charts")
    plot_sub = p.add_subparsers(dest="plot_kind", required=True, parser_class=_Parser)
    po = plot_sub.add_parser("overlay", help="two dated series on common dates")
    po.add_argument("--series", action="append", required=True,
                    help="CSV with header date,<name>; give exactly twice")
    po.add_argument("--out", required=True)
    pr = plot_sub.add_parser("regression", help="predicted vs actual scatter")
    pr.add_argument("--actual", required=True, help="CSV: date then output columns")
    pr.add_argument("--predicted", required=True, help="CSV with matching layout")
    pr.add_argument("--out", required=True)
    return parser


def _cmd_fixture(args) -> int:
    paths = synthetic.write_fixture(args.out_dir, seed=args.seed,
                                    start=args.start, end=args.end)
    print(f"wrote {len(paths)} instrument files to {args.out_dir}")
    return 0


def _cmd_ingest(args) -> int:
    data_dir = Path(args.data_dir)
    series = []
    for sym in md.SYMBOLS:
        path = data_dir / f"{sym}.csv"
        if not path.exists():
            raise MissingInstrument(sym)
        series.append(md.parse_price_csv(path, sym))
    panel = md.align(series)
    dataset = build_dataset(panel, window=args.window)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    md.write_alignment_report(panel, out_dir / "alignment_report.csv")
    dataset.save_csv(out_dir / "dataset.csv")
    print(f"aligned {len(panel)} common dates "
          f"({sum(panel.dropped_rows.values())} rows dropped); "
          f"dataset has {len(dataset)} rows -> {out_dir / 'dataset.csv'}")
    return 0


def _cmd_dataset(args) -> int:
    ds = FeatureDataset.load_csv(args.path)
    if args.start or args.end:
        start = args.start or ds.dates[0]
        end = args.end or ds.dates[-1]
        idx = ds.rows_in_range(start, end)
        if idx.size == 0:
            raise DataError(f"no rows in [{start}, {end}]")
        ds = ds.select(idx)
    print(f"rows: {len(ds)}  dates: {ds.dates[0]} .. {ds.dates[-1]}")
    names = DATASET_HEADER.split(",")[1:]
    data = np.hstack([ds.X, ds.Y])
    for i, name in enumerate(names):
        col = data[:, i]
        print(f"  {name:10s} min={col.min():10.4f} max={col.max():10.4f} mean={col.mean():10.4f}")
    if args.column:
        if args.column not in names:
            raise DataError(f"unknown column {args.column!r}; have {', '.join(names)}")
        if not args.out:
            raise ConfigError("--column requires --out")
        col = data[:, names.index(args.column)]
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(f"date,{args.column}\n")
            for d, v in zip(ds.dates, col):
                fh.write(f"{d.isoformat()},{float(v)!r}\n")
        print(f"wrote {args.out}")
    elif args.out:
        ds.save_csv(args.out)
        print(f"wrote {args.out}")
    return 0


def _cmd_train(args) -> int:
    spec = parse_experiment_config(args.config)
    dataset = FeatureDataset.load_csv(args.data)
    train_ds, val_ds, test_ds = chronological_split(
        dataset, spec.train_range, spec.test_range, spec.validation_fraction)
    x_scaler, y_scaler = fit_scaler(train_ds.X, train_ds.Y)
    seed = args.seed if args.seed is not None else trial_seed(
        spec.base_seed, args.arch, args.algorithm, args.hidden)
    topology = nn.Topology(args.arch, train_ds.X.shape[1], args.hidden, train_ds.Y.shape[1])
    net0 = nn.init_weights(topology, seed)
    config = replace(spec.train_config, seed=seed)
    trained, record = train(
        net0, TrainerSpec(args.algorithm), config,
        (x_scaler.transform(train_ds.X), y_scaler.transform(train_ds.Y)),
        (x_scaler.transform(val_ds.X), y_scaler.transform(val_ds.Y)))

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    nn.save_network(trained, out_dir / "network.txt")
    export_curve_csv(record, out_dir / "curve.csv")
    pred_test = y_scaler.inverse_transform(nn.forward_batch(trained, x_scaler.transform(test_ds.X)))
    pred_train = y_scaler.inverse_transform(nn.forward_batch(trained, x_scaler.transform(train_ds.X)))
    lines = [
        f"architecture = {args.arch}",
        f"algorithm = {args.algorithm}",
        f"hidden_size = {args.hidden}",
        f"seed = {seed}",
        f"epochs_run = {record.epochs_run}",
        f"stop_reason = {record.stop_reason}",
    ]
    for split, actual, pred in (("train", train_ds.Y, pred_train),
                                ("test", test_ds.Y, pred_test)):
        m = compute_metrics(actual, pred)
        lines.append(f"{split}_mse = {m.mse!r}")
        lines.append(f"{split}_r = {m.r!r}")
        lines.append(f"{split}_mape = {m.mape!r}")
    (out_dir / "metrics.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("\n".join(lines))
    print(f"artifacts in {out_dir}")
    return 0


def _cmd_experiment(args) -> int:
    spec = parse_experiment_config(args.config)
    dataset = FeatureDataset.load_csv(args.data)
    report = run_experiment(spec, dataset, workers=args.workers)
    paths = emit_report(report, args.out)
    if not args.no_plots:
        test_idx = dataset.rows_in_range(*spec.test_range)
        paths += emit_plots(report, dataset.Y[test_idx], args.out)
    print(f"{len(report.trials)} trials, {report.excluded} excluded")
    if report.ttest is not None:
        print(significance_verdict(report.ttest))
    for p in paths:
        print(p)
    return 0


def _read_named_series(path):
    """CSV with header date,<name> -> (name, dates, values)."""
    dates, values = [], []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if len(header) != 2 or header[0] != "date":
            raise DataError(f"{path}: expected header 'date,<name>'")
        name = header[1]
        for line in fh:
            line = line.strip()
            if not line:
                continue
            d, v = line.split(",")
            dates.append(dt.date.fromisoformat(d))
            values.append(float(v))
    return name, dates, np.array(values)


def _read_output_matrix(path):
    """CSV with header date,<out1>,<out2>,... -> (names, matrix)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header[0] != "date" or len(header) < 2:
            raise DataError(f"{path}: expected header 'date,<column>...'")
        rows = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rows.append([float(v) for v in line.split(",")[1:]])
    return header[1:], np.array(rows)


def _cmd_plot(args) -> int:
    if args.plot_kind == "overlay":
        if len(args.series) != 2:
            raise ConfigError("plot overlay needs exactly two --series files")
        a = _read_named_series(args.series[0])
        b = _read_named_series(args.series[1])
        path = emit_overlay_plot(a, b, args.out)
    else:
        names, actual = _read_output_matrix(args.actual)
        _, predicted = _read_output_matrix(args.predicted)
        if actual.shape != predicted.shape:
            raise DataError(f"shape mismatch: actual {actual.shape}, predicted {predicted.shape}")
        path = emit_regression_plot(actual, predicted, args.out, output_names=tuple(names))
    print(path)
    return 0


_COMMANDS = {
    "fixture": _cmd_fixture,
    "ingest": _cmd_ingest,
    "dataset": _cmd_dataset,
    "train": _cmd_train,
    "experiment": _cmd_experiment,
    "plot": _cmd_plot,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        _diagnostic("ConfigError", exc)
        return USAGE_ERROR
    except NumericalError as exc:
        _diagnostic(type(exc).__name__, exc)
        return NUMERICAL_ERROR
    except VolcastError as exc:
        _diagnostic(type(exc).__name__, exc)
        return DATA_ERROR
    except OSError as exc:
        _diagnostic("IoFailure", exc)
        return DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())
