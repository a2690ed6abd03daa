import datetime as dt

import numpy as np
import pytest

from volcast import harness, synthetic
from volcast import market_data as md
from volcast.errors import ConfigError, TooFew
from volcast.evaluation import Metrics, descriptive_stats
from volcast.features import build_dataset
from volcast.trainers import ALGORITHMS, TrainConfig


@pytest.fixture(scope="module")
def dataset():
    series = synthetic.generate_price_series(
        seed=7, start=dt.date(2012, 6, 1), end=dt.date(2014, 6, 30))
    return build_dataset(md.align(list(series.values())))


@pytest.fixture(scope="module")
def small_spec():
    return harness.ExperimentSpec(
        name="unit",
        train_range=(dt.date(2012, 8, 1), dt.date(2013, 12, 31)),
        test_range=(dt.date(2014, 1, 1), dt.date(2014, 6, 30)),
        algorithms=("BFGS", "RPROP"),
        hidden_sizes=(3, 4),
        base_seed=11,
        train_config=TrainConfig(max_epochs=60),
    )


@pytest.fixture(scope="module")
def report(small_spec, dataset):
    return harness.run_experiment(small_spec, dataset)


class TestTrialSeed:
    def test_deterministic(self):
        assert harness.trial_seed(7, "MLFF", "LM", 20) == harness.trial_seed(7, "MLFF", "LM", 20)

    def test_distinct_across_grid(self):
        spec = harness.ExperimentSpec(
            name="x", train_range=(dt.date(2013, 1, 1), dt.date(2013, 2, 1)),
            test_range=(dt.date(2013, 2, 2), dt.date(2013, 3, 1)))
        seeds = {harness.trial_seed(0, *cell) for cell in spec.grid()}
        assert len(seeds) == 54

    def test_depends_on_base_seed(self):
        assert harness.trial_seed(0, "MLFF", "LM", 20) != harness.trial_seed(1, "MLFF", "LM", 20)


class TestGrid:
    def test_default_grid_is_54(self):
        spec = harness.ExperimentSpec(
            name="d", train_range=(dt.date(2013, 1, 1), dt.date(2013, 2, 1)),
            test_range=(dt.date(2013, 2, 2), dt.date(2013, 3, 1)))
        grid = spec.grid()
        assert len(grid) == 54
        assert len(set(grid)) == 54
        assert set(a for a, _, _ in grid) == {"MLFF", "CFFN"}
        assert set(al for _, al, _ in grid) == set(ALGORITHMS)


class TestRunExperiment:
    def test_one_trial_per_cell(self, small_spec, report):
        assert len(report.trials) == len(small_spec.grid())
        cells = [(t.architecture, t.algorithm, t.hidden_size) for t in report.trials]
        assert cells == small_spec.grid()
        assert report.excluded == sum(1 for t in report.trials if not t.ok)

    def test_all_metrics_finite(self, report):
        for trial in report.trials:
            if trial.ok:
                for m in (trial.train_metrics, trial.test_metrics):
                    assert np.isfinite([m.mse, m.r, m.mape]).all()

    def test_stat_tables_complete(self, small_spec, report):
        assert set(report.stat_tables) == {
            (metric, split, arch)
            for metric in harness.METRIC_NAMES
            for split in harness.SPLIT_NAMES
            for arch in small_spec.architectures
        }

    def test_deterministic_rerun(self, small_spec, dataset, report):
        again = harness.run_experiment(small_spec, dataset)
        assert harness.trials_csv_text(again.trials) == harness.trials_csv_text(report.trials)

    def test_worker_count_does_not_change_bytes(self, small_spec, dataset, report):
        parallel = harness.run_experiment(small_spec, dataset, workers=2)
        assert harness.trials_csv_text(parallel.trials) == harness.trials_csv_text(report.trials)
        assert harness.tables_md_text(parallel) == harness.tables_md_text(report)

    def test_execution_order_does_not_affect_trials(self, small_spec, report):
        # trial seeds hang off the grid tuple, so per-cell results must not
        # depend on which other cells ran, or in what order
        shuffled_spec = harness.ExperimentSpec(
            name=small_spec.name, train_range=small_spec.train_range,
            test_range=small_spec.test_range,
            algorithms=tuple(reversed(small_spec.algorithms)),
            hidden_sizes=tuple(reversed(small_spec.hidden_sizes)),
            base_seed=small_spec.base_seed, train_config=small_spec.train_config)
        series = synthetic.generate_price_series(
            seed=7, start=dt.date(2012, 6, 1), end=dt.date(2014, 6, 30))
        ds = build_dataset(md.align(list(series.values())))
        shuffled = harness.run_experiment(shuffled_spec, ds)
        by_cell = {(t.architecture, t.algorithm, t.hidden_size): t for t in shuffled.trials}
        for t in report.trials:
            other = by_cell[(t.architecture, t.algorithm, t.hidden_size)]
            assert other.seed == t.seed
            assert other.test_metrics == t.test_metrics
            assert other.train_metrics == t.train_metrics

    def test_paired_ttest_present(self, report):
        assert report.ttest is not None
        assert report.ttest.paired
        assert report.ttest.degrees_of_freedom == len(report.spec.algorithms) * len(report.spec.hidden_sizes) - 1

    def test_single_cell_grid_flags_too_few(self, small_spec, dataset):
        tiny = harness.ExperimentSpec(
            name="tiny", train_range=small_spec.train_range, test_range=small_spec.test_range,
            architectures=("MLFF",), algorithms=("RPROP",), hidden_sizes=(3,),
            train_config=TrainConfig(max_epochs=10))
        rep = harness.run_experiment(tiny, dataset)
        assert len(rep.trials) == 1
        assert rep.stat_tables == {}
        assert rep.stats_note.startswith("TooFew")
        assert rep.ttest is None


class TestSummarize:
    def test_brute_force_oracle(self, report):
        tables = harness.summarize(report.trials, report.spec.architectures)
        for arch in report.spec.architectures:
            values = [t.test_metrics.mse for t in report.trials
                      if t.ok and t.architecture == arch]
            ref = descriptive_stats(values)
            assert tables[("MSE", "test", arch)] == ref

    def test_identical_values_degenerate_stats(self):
        metrics = Metrics(mse=2.0, r=0.9, mape=1.0)
        trials = [harness.TrialResult("MLFF", "LM", h, 0, metrics, metrics, 5, "GoalMet")
                  for h in (20, 30, 40)]
        tables = harness.summarize(trials, architectures=("MLFF",))
        stats = tables[("MSE", "train", "MLFF")]
        assert stats.minimum == stats.maximum == stats.average == 2.0
        assert stats.standard_deviation == 0.0

    def test_too_few_raises(self):
        metrics = Metrics(mse=2.0, r=0.9, mape=1.0)
        trials = [harness.TrialResult("MLFF", "LM", 20, 0, metrics, metrics, 5, "GoalMet")]
        with pytest.raises(TooFew):
            harness.summarize(trials, architectures=("MLFF", "CFFN"))

    def test_diverged_trials_excluded(self):
        good = Metrics(mse=2.0, r=0.9, mape=1.0)
        trials = [harness.TrialResult("MLFF", "LM", h, 0, good, good, 5, "GoalMet")
                  for h in (20, 30)]
        trials.append(harness.TrialResult("MLFF", "LM", 40, 0, None, None, 0,
                                          "Diverged", error="boom"))
        tables = harness.summarize(trials, architectures=("MLFF",))
        assert tables[("MSE", "train", "MLFF")].average == 2.0


class TestEmission:
    def test_emit_report_files(self, report, tmp_path):
        paths = harness.emit_report(report, tmp_path)
        names = {p.rsplit("/", 1)[-1] for p in paths}
        assert names == {"trials.csv", "tables.md", "config.txt"}
        text = (tmp_path / "tables.md").read_text()
        assert "(two tailed)" in text
        assert "Multi-Layer Feed Forward Network" in text
        assert "Standard Deviation" in text
        config = (tmp_path / "config.txt").read_text()
        assert "BFGS.curvature_floor" in config
        assert f"base_seed = {report.spec.base_seed}" in config

    def test_trials_csv_roundtrip_reproduces_tables(self, report, tmp_path):
        harness.emit_report(report, tmp_path)
        parsed = harness.parse_trials_csv(tmp_path / "trials.csv")
        rebuilt = harness.ExperimentReport(
            spec=report.spec, trials=parsed,
            stat_tables=harness.summarize(parsed, report.spec.architectures),
            stats_note="", ttest=report.ttest, ttest_note=report.ttest_note,
            excluded=sum(1 for t in parsed if not t.ok))
        assert harness.tables_md_text(rebuilt) == harness.tables_md_text(report)

    def test_diverged_row_roundtrip(self, tmp_path):
        good = Metrics(mse=2.0, r=0.9, mape=1.0)
        trials = [
            harness.TrialResult("MLFF", "LM", 20, 1, good, good, 5, "GoalMet"),
            harness.TrialResult("CFFN", "LM", 20, 2, None, None, 0, "Diverged",
                                error="mu blew, up"),
        ]
        path = tmp_path / "trials.csv"
        path.write_text(harness.trials_csv_text(trials))
        parsed = harness.parse_trials_csv(path)
        assert parsed[0].ok and parsed[0].test_metrics == good
        assert not parsed[1].ok
        assert "mu blew" in parsed[1].error

    def test_emit_plots(self, report, dataset, tmp_path):
        test_idx = dataset.rows_in_range(*report.spec.test_range)
        paths = harness.emit_plots(report, dataset.Y[test_idx], tmp_path)
        names = {p.rsplit("/", 1)[-1] for p in paths}
        assert names == {"regression.svg", "regression.csv",
                         "test_mse_bars.svg", "test_mse_bars.csv"}


class TestConfigFile:
    def test_roundtrip(self, small_spec, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text(harness.experiment_config_text(small_spec))
        parsed = harness.parse_experiment_config(path)
        assert parsed == small_spec

    def test_minimal_config_uses_defaults(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text(
            "train_start = 2013-01-01\ntrain_end = 2014-12-31\n"
            "test_start = 2015-01-01\ntest_end = 2015-04-30\n")
        spec = harness.parse_experiment_config(path)
        assert spec.architectures == ("MLFF", "CFFN")
        assert spec.algorithms == ALGORITHMS
        assert spec.hidden_sizes == (20, 30, 40)
        assert len(spec.grid()) == 54
        assert spec.name == "exp"

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text("train_start = 2013-01-01\nbogus = 1\n")
        with pytest.raises(ConfigError) as exc:
            harness.parse_experiment_config(path)
        assert "bogus" in str(exc.value)

    def test_missing_required_keys(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text("train_start = 2013-01-01\n")
        with pytest.raises(ConfigError) as exc:
            harness.parse_experiment_config(path)
        assert "test_start" in str(exc.value)

    def test_bad_date(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text(
            "train_start = 13/01/01\ntrain_end = 2014-12-31\n"
            "test_start = 2015-01-01\ntest_end = 2015-04-30\n")
        with pytest.raises(ConfigError):
            harness.parse_experiment_config(path)

    def test_unknown_algorithm(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text(
            "train_start = 2013-01-01\ntrain_end = 2014-12-31\n"
            "test_start = 2015-01-01\ntest_end = 2015-04-30\n"
            "algorithms = LM,ADAM\n")
        with pytest.raises(ConfigError):
            harness.parse_experiment_config(path)

    def test_duplicate_key(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text("train_start = 2013-01-01\ntrain_start = 2013-01-02\n")
        with pytest.raises(ConfigError):
            harness.parse_experiment_config(path)

    def test_comments_ignored(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text(
            "# experiment one\ntrain_start = 2013-01-01\ntrain_end = 2014-12-31\n\n"
            "test_start = 2015-01-01\ntest_end = 2015-04-30\n")
        assert harness.parse_experiment_config(path).name == "exp"

    @pytest.mark.parametrize("bad_line", [
        "validation_fraction = 0.9",
        "hidden_sizes = 0,20",
        "max_epochs = 0",
        "goal = not-a-number",
    ])
    def test_out_of_range_values_rejected(self, tmp_path, bad_line):
        path = tmp_path / "exp.cfg"
        path.write_text(
            "train_start = 2013-01-01\ntrain_end = 2014-12-31\n"
            "test_start = 2015-01-01\ntest_end = 2015-04-30\n" + bad_line + "\n")
        with pytest.raises(ConfigError):
            harness.parse_experiment_config(path)

    def test_bundled_configs_parse(self):
        root = __file__.rsplit("/tests/", 1)[0]
        for name, backcast in (("exp1", False), ("exp2", False), ("exp3", True)):
            spec = harness.parse_experiment_config(f"{root}/configs/{name}.cfg")
            assert spec.name == name
            assert len(spec.grid()) == 54
            is_backcast = spec.test_range[1] < spec.train_range[0]
            assert is_backcast == backcast


class TestSynthetic:
    def test_deterministic(self):
        a = synthetic.generate_price_series(seed=3, start=dt.date(2013, 1, 1),
                                            end=dt.date(2013, 6, 30))
        b = synthetic.generate_price_series(seed=3, start=dt.date(2013, 1, 1),
                                            end=dt.date(2013, 6, 30))
        assert a == b

    def test_different_seeds_differ(self):
        a = synthetic.generate_price_series(seed=3, start=dt.date(2013, 1, 1),
                                            end=dt.date(2013, 3, 31))
        b = synthetic.generate_price_series(seed=4, start=dt.date(2013, 1, 1),
                                            end=dt.date(2013, 3, 31))
        assert a != b

    def test_all_nine_instruments(self):
        series = synthetic.generate_price_series(seed=1, start=dt.date(2013, 1, 1),
                                                 end=dt.date(2013, 3, 31))
        assert set(series) == set(md.SYMBOLS)
        for s in series.values():
            assert all(b.close > 0 for b in s.bars)

    def test_crisis_regime_has_higher_volatility(self):
        series = synthetic.generate_price_series(
            seed=2, start=dt.date(2007, 11, 1), end=dt.date(2013, 12, 31))
        ds = build_dataset(md.align(list(series.values())))
        y2008 = [i for i, d in enumerate(ds.dates) if d.year == 2008]
        y2013 = [i for i, d in enumerate(ds.dates) if d.year == 2013]
        assert ds.Y[y2008, 0].mean() > 2.0 * ds.Y[y2013, 0].mean()

    def test_write_fixture(self, tmp_path):
        paths = synthetic.write_fixture(tmp_path, seed=5, start=dt.date(2013, 1, 1),
                                        end=dt.date(2013, 3, 31))
        assert len(paths) == 9
        series = md.parse_price_csv(tmp_path / "NIFTY.csv", "NIFTY")
        assert len(series) > 40
