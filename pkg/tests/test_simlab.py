"""Simulation-lab tests: response generation frequencies, metric pipeline
correctness with an oracle estimator, the linear comparator, report formats,
and the command line."""

import json
import math

import numpy as np
import pytest

from catlab.bank import generate_bank, serialize_bank
from catlab.engine import CutoffBand, StudyConfig
from catlab.irt import ItemParameters, category_probabilities
from catlab.simlab import (
    SimulationSpec,
    classification_metrics,
    emit_report,
    linear_comparator,
    main,
    parse_report_csv,
    run_condition,
    sample_abilities,
    simulate_examinee_response,
    spec_from_dict,
    retest_correlation,
)


def make_spec(**overrides) -> SimulationSpec:
    model = overrides.pop("model", "2PL")
    bank = overrides.pop("bank", None)
    if bank is None:
        bank = generate_bank(model, 100, seed=4242, a_log_mean=math.log(1.5))
    config = overrides.pop("config", None)
    if config is None:
        config = StudyConfig(
            name="sim", model=model, max_items=10, min_items=10, min_sem=1e-6
        )
    defaults = dict(
        model=model, bank=bank, config=config, n_examinees=60, replications=2, master_seed=7
    )
    defaults.update(overrides)
    return SimulationSpec(**defaults)


class TestAbilityDistributions:
    @pytest.mark.parametrize("dist", ["normal", "skewed", "neg_skewed", "bimodal"])
    def test_standardized_moments(self, dist, rng):
        draws = sample_abilities(dist, 60000, rng)
        assert abs(draws.mean()) < 0.02
        if dist != "bimodal":
            assert abs(draws.std() - 1.0) < 0.02

    def test_skew_directions(self, rng):
        positive = sample_abilities("skewed", 60000, rng)
        negative = sample_abilities("neg_skewed", 60000, rng)
        skew = lambda x: float(np.mean(((x - x.mean()) / x.std()) ** 3))
        assert skew(positive) > 0.5
        assert skew(negative) < -0.5

    def test_bimodal_shape(self, rng):
        draws = sample_abilities("bimodal", 60000, rng)
        assert abs(draws.mean()) < 0.02
        near_modes = np.mean((np.abs(draws - 1.0) < 1.0) | (np.abs(draws + 1.0) < 1.0))
        assert near_modes > 0.95

    def test_unknown_distribution(self, rng):
        with pytest.raises(ValueError):
            sample_abilities("cauchy", 10, rng)


class TestSimulatedResponses:
    def test_2pl_midpoint_rate(self, rng):
        item = ItemParameters("i", "2PL", a=1.0, b=0.0)
        draws = [simulate_examinee_response(item, 0.0, rng).value for _ in range(10000)]
        assert abs(np.mean(draws) - 0.5) <= 0.01

    def test_3pl_guessing_floor(self, rng):
        item = ItemParameters("i", "3PL", a=1.0, b=0.0, c=0.2)
        draws = [simulate_examinee_response(item, -6.0, rng).value for _ in range(10000)]
        assert abs(np.mean(draws) - 0.2) <= 0.01

    def test_grm_category_frequencies(self, rng):
        item = ItemParameters("g", "GRM", a=1.5, thresholds=(-1.0, 0.0, 1.0))
        values = [simulate_examinee_response(item, 0.3, rng).value for _ in range(10000)]
        observed = np.bincount(values, minlength=4) / 10000
        expected = category_probabilities(item, 0.3)
        assert np.max(np.abs(observed - expected)) <= 0.01


class TestRunCondition:
    def test_oracle_estimator_zeroes_error_metrics(self):
        report = run_condition(make_spec(oracle_estimator=True, n_examinees=40, replications=1))
        assert report.rmse == 0.0
        assert report.bias == 0.0
        assert report.mae == 0.0
        assert report.pearson_r == pytest.approx(1.0)

    def test_rmse_identity(self):
        report = run_condition(make_spec(keep_records=True, n_examinees=80, replications=1))
        err = np.array([hat - true for true, hat in report.records])
        assert report.rmse**2 == pytest.approx(report.bias**2 + err.var(), abs=1e-9)

    def test_seed_determinism_byte_identical(self):
        spec = make_spec(n_examinees=30, replications=2)
        first = run_condition(spec).to_json()
        second = run_condition(make_spec(n_examinees=30, replications=2)).to_json()
        assert first == second

    def test_longer_tests_do_not_hurt(self):
        def at_length(length):
            config = StudyConfig(name="s", model="2PL", max_items=length,
                                 min_items=length, min_sem=1e-6)
            return run_condition(make_spec(config=config, n_examinees=150, replications=2)).rmse

        assert at_length(20) <= at_length(10) + 0.02

    def test_confidence_intervals_cover_point_estimates(self):
        report = run_condition(make_spec(n_examinees=50, replications=4))
        lo, hi = report.ci["rmse"]
        assert lo <= report.rmse <= hi

    def test_fixed_length_and_exposure_tables(self):
        report = run_condition(make_spec(n_examinees=40, replications=1))
        assert report.mean_length == 10.0
        # rates sum to administrations/sessions, i.e. the mean length
        assert sum(report.exposure_rates.values()) == pytest.approx(10.0, abs=1e-12)
        assert report.max_exposure <= 1.0


class TestLinearComparator:
    def test_infinite_target_administers_one_item(self):
        spec = make_spec(n_examinees=5, replications=1)
        assert linear_comparator(spec, math.inf) == 1.0

    def test_adaptive_beats_linear(self):
        config = StudyConfig(name="eff", model="2PL", max_items=100, min_items=2, min_sem=0.30)
        spec = make_spec(config=config, n_examinees=40, replications=1, linear_comparator=True)
        report = run_condition(spec)
        assert report.linear_mean_length is not None
        assert report.mean_length < report.linear_mean_length
        assert 0.0 <= report.efficiency < 1.0


class TestClassificationMetrics:
    BANDS = (CutoffBand("negative", -np.inf, 0.5), CutoffBand("positive", 0.5, np.inf))

    def test_perfect_estimates(self):
        records = [(t, t) for t in np.linspace(-2, 2, 101)]
        metrics = classification_metrics(records, self.BANDS)
        assert metrics["accuracy"] == 1.0
        assert metrics["sensitivity"] == 1.0
        assert metrics["specificity"] == 1.0

    def test_degenerate_single_band_population(self):
        records = [(1.0, 1.2), (2.0, 0.9)]  # everyone truly positive
        metrics = classification_metrics(records, self.BANDS)
        assert metrics["sensitivity"] == 1.0
        assert metrics["specificity"] is None

    def test_ill_formed_cutoffs(self):
        bad = (CutoffBand("a", -np.inf, 0.0), CutoffBand("b", 0.1, np.inf))
        with pytest.raises(ValueError):
            classification_metrics([(0.0, 0.0)], bad)

    def test_unknown_positive_band(self):
        with pytest.raises(ValueError):
            classification_metrics([(0.0, 0.0)], self.BANDS, positive_band="nope")

    def test_screening_condition_accuracy(self):
        config = StudyConfig(
            name="screen", model="2PL", max_items=40, min_items=4, min_sem=0.30,
            cutoffs=self.BANDS,
        )
        report = run_condition(make_spec(config=config, n_examinees=400, replications=1))
        assert report.classification["accuracy"] >= 0.85


class TestReports:
    def test_csv_header_and_roundtrip(self):
        report = run_condition(make_spec(n_examinees=25, replications=1))
        data = emit_report(report, "csv")
        assert data.decode().splitlines()[0] == "model,n_items,length,rmse,bias,r,efficiency"
        rows = parse_report_csv(data)
        assert len(rows) == 1
        assert rows[0]["rmse"] == pytest.approx(report.rmse, abs=1e-9)
        assert rows[0]["bias"] == pytest.approx(report.bias, abs=1e-9)
        assert rows[0]["r"] == pytest.approx(report.pearson_r, abs=1e-9)
        assert rows[0]["efficiency"] is None

    def test_table_columns(self):
        report = run_condition(make_spec(n_examinees=25, replications=1))
        table = emit_report(report, "table").decode()
        header = table.splitlines()[0]
        for column in ("Model", "N Items", "Length", "RMSE", "Bias", "r", "Efficiency"):
            assert column in header

    def test_json_format_and_unknown(self):
        report = run_condition(make_spec(n_examinees=25, replications=1))
        doc = json.loads(emit_report(report, "json"))
        assert doc["model"] == "2PL"
        with pytest.raises(ValueError):
            emit_report(report, "xml")


class TestSpecDocuments:
    def doc(self, **overrides):
        base = {
            "model": "2PL",
            "bank": {"n_items": 50, "seed": 4, "a_log_mean": 0.3},
            "config": {"name": "d", "model": "2PL", "max_items": 8, "min_items": 4,
                       "min_sem": 0.35},
            "n_examinees": 10,
            "replications": 1,
            "master_seed": 99,
        }
        base.update(overrides)
        return base

    def test_resolves_generated_bank(self):
        spec = spec_from_dict(self.doc())
        assert len(spec.bank) == 50

    def test_bank_file_resolution(self, tmp_path):
        bank = generate_bank("2PL", 30, seed=5)
        (tmp_path / "b.json").write_text(serialize_bank(bank, "json"))
        spec = spec_from_dict(self.doc(bank={"file": "b.json"}), base_dir=tmp_path)
        assert spec.bank.items == bank.items

    def test_validation_errors_raise(self):
        with pytest.raises(ValueError, match="missing required"):
            spec_from_dict({"model": "2PL"})
        with pytest.raises(ValueError, match="invalid config"):
            spec_from_dict(self.doc(config={"name": "d", "model": "2PL", "max_items": 2,
                                            "min_items": 9, "min_sem": 0.35}))
        with pytest.raises(ValueError, match="distribution"):
            spec_from_dict(self.doc(ability_dist="weird"))

    def test_unknown_keys(self):
        with pytest.raises(ValueError, match="unknown spec keys"):
            spec_from_dict(self.doc(bogus=1))


class TestCommandLine:
    def write_spec(self, tmp_path, **overrides):
        doc = TestSpecDocuments().doc(**overrides)
        path = tmp_path / "spec.json"
        path.write_text(json.dumps(doc))
        return path

    def test_run_writes_reports(self, tmp_path, capsys):
        spec_path = self.write_spec(tmp_path)
        out = tmp_path / "out"
        code = main(["run", "--spec", str(spec_path), "--out", str(out), "--format", "csv"])
        assert code == 0
        assert (out / "report.json").exists() and (out / "report.csv").exists()
        assert capsys.readouterr().out.startswith("model,n_items")

    def test_run_table_format(self, tmp_path, capsys):
        spec_path = self.write_spec(tmp_path)
        assert main(["run", "--spec", str(spec_path)]) == 0
        assert "RMSE" in capsys.readouterr().out

    def test_invalid_spec_exits_2(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"model": "2PL"}))
        assert main(["run", "--spec", str(path)]) == 2
        assert "spec error" in capsys.readouterr().err

    def test_seed_override_changes_output(self, tmp_path, capsys):
        spec_path = self.write_spec(tmp_path)
        main(["run", "--spec", str(spec_path), "--format", "csv"])
        first = capsys.readouterr().out
        main(["run", "--spec", str(spec_path), "--seed", "123", "--format", "csv"])
        second = capsys.readouterr().out
        main(["run", "--spec", str(spec_path), "--format", "csv"])
        third = capsys.readouterr().out
        assert first == third
        assert first != second

    def test_compare_command(self, tmp_path, capsys):
        spec_path = self.write_spec(
            tmp_path,
            config={"name": "d", "model": "2PL", "max_items": 50, "min_items": 2,
                    "min_sem": 0.4},
        )
        code = main(["compare", "--adaptive", str(spec_path), "--linear"])
        assert code == 0
        out = capsys.readouterr().out
        assert "adaptive mean length" in out
        assert "efficiency" in out


class TestRetest:
    def test_two_runs_correlate(self):
        config = StudyConfig(name="rt", model="2PL", max_items=15, min_items=15, min_sem=1e-6)
        spec = make_spec(config=config, n_examinees=80, replications=1)
        assert retest_correlation(spec) > 0.8
