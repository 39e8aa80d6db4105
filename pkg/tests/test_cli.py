import csv
import json
import re
from pathlib import Path

import pytest

import peakstore.cli as cli
from peakstore.analytics import evaluate_scenario
from peakstore.cli import RunConfig, emit_price_series, main, run

BUNDLED = Path(__file__).resolve().parents[1] / "src" / "peakstore" / "scenarios" / "paper_table1.json"


def run_cli(capsys, *args):
    code = main(["run", *args])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestRun:
    def test_benchmark_scenario_counterfactual_json(self, capsys, tmp_path):
        code, out, _ = run_cli(capsys, str(BUNDLED), "--counterfactual",
                               "--format", "json", "--out", str(tmp_path))
        assert code == 0
        payload = json.loads(out)
        assert payload["all_checks_passed"]
        labels = [r["label"] for r in payload["reports"]]
        assert labels == ["with_storage", "without_storage"]
        with_r, without_r = payload["reports"]
        assert with_r["prices"]["on_peak"] == pytest.approx(142.0, abs=1.0)
        assert with_r["prices"]["off_peak"] == pytest.approx(28.0, abs=1.0)
        assert without_r["prices"]["on_peak"] == pytest.approx(182.0, abs=1.0)
        assert with_r["capacities"]["K_s"] / 1e3 == pytest.approx(3.9, abs=0.1)
        for name in ("operating.csv", "capacity.csv", "checks.json",
                     "price_series.csv"):
            assert (tmp_path / name).exists()
        checks = json.loads((tmp_path / "checks.json").read_text())
        assert checks["all_checks_passed"]

    def test_text_and_json_share_numbers(self, capsys, tmp_path):
        code, json_out, _ = run_cli(capsys, str(BUNDLED), "--format", "json")
        payload = json.loads(json_out)
        code, text_out, _ = run_cli(capsys, str(BUNDLED), "--format", "text")
        assert code == 0
        report = payload["reports"][0]
        row = next(line for line in text_out.splitlines()
                   if line.startswith("with_storage"))
        numbers = [float(tok) for tok in re.findall(r"-?\d+\.\d+", row)]
        # Same source rendered twice: lambda and consumption lead each block.
        assert numbers[0] == pytest.approx(report["prices"]["on_peak"], abs=1e-4)
        assert numbers[1] == pytest.approx(
            report["consumption"]["on_peak"] / 1e3, abs=1e-4)

    def test_csv_files_mirror_table_layout(self, capsys, tmp_path):
        code, _, _ = run_cli(capsys, str(BUNDLED), "--counterfactual",
                             "--out", str(tmp_path))
        assert code == 0
        with open(tmp_path / "operating.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert list(rows[0].keys()) == ["scenario", "period", "lambda", "ell",
                                        "q_P", "q_B", "q_plus", "q_minus"]
        on_peak = next(r for r in rows if r["scenario"] == "with_storage"
                       and r["period"] == "on_peak")
        assert float(on_peak["lambda"]) == pytest.approx(142.88, abs=0.01)
        assert float(on_peak["q_minus"]) == pytest.approx(3.86, abs=0.01)
        without = next(r for r in rows if r["scenario"] == "without_storage")
        assert without["q_plus"] == ""
        with open(tmp_path / "capacity.csv", newline="") as fh:
            caps = list(csv.DictReader(fh))
        assert list(caps[0].keys()) == ["scenario", "K_P", "K_B", "K_s", "E"]
        with_row = next(r for r in caps if r["scenario"] == "with_storage")
        assert float(with_row["E"]) == pytest.approx(15.45, abs=0.01)

    def test_bundled_name_resolution(self, capsys):
        code, out, _ = run_cli(capsys, "paper_table1", "--format", "json")
        assert code == 0
        assert json.loads(out)["all_checks_passed"]

    def test_no_storage_only(self, capsys):
        code, out, _ = run_cli(capsys, str(BUNDLED), "--no-storage-only",
                               "--format", "json")
        assert code == 0
        payload = json.loads(out)
        assert [r["label"] for r in payload["reports"]] == ["without_storage"]

    def test_malformed_json_names_byte_offset(self, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"cycles_n": 365,, }')
        code, _, err = run_cli(capsys, str(bad))
        assert code == 1
        assert "byte offset 17" in err

    def test_missing_file(self, capsys):
        code, _, err = run_cli(capsys, "nope_does_not_exist.json")
        assert code == 1
        assert "not found" in err

    def test_verification_failure_exit_code(self, capsys, monkeypatch):
        def fake_checks(report, **kwargs):
            return [{"scenario": report.label, "name": "rigged", "value": 1.0,
                     "tolerance": 0.0, "passed": False, "note": ""}]
        monkeypatch.setattr(cli, "verification_checks", fake_checks)
        code, _, _ = run_cli(capsys, str(BUNDLED))
        assert code == 2

    def test_solver_failure_exit_code(self, capsys, monkeypatch):
        from peakstore.solver import SolverError

        def boom(s, label=None):
            raise SolverError("iteration limit 1 exceeded", active_set=(0,))
        monkeypatch.setattr(cli, "evaluate_scenario", boom)
        code, _, err = run_cli(capsys, str(BUNDLED))
        assert code == 1
        assert "solving failed" in err

    def test_oracle_flag_adds_agreement_check(self, capsys):
        code, out, _ = run_cli(capsys, str(BUNDLED), "--format", "json",
                               "--oracle")
        assert code == 0
        payload = json.loads(out)
        assert payload["oracle"][0]["agrees"]
        assert any(c["name"] == "oracle_agreement" for c in payload["checks"])


@pytest.fixture(scope="module")
def pair(benchmark):
    return [evaluate_scenario(benchmark),
            evaluate_scenario(benchmark.without_storage())]


class TestPriceSeries:
    def test_paper_pair_difference(self, pair):
        series = emit_price_series(pair, peak_start=17)
        assert len(series.hours) == 24
        diff = dict(zip(series.hours, series.difference))
        # On-peak block 17..20: storage cuts the price by about 40 $/MWh;
        # the other hours rise by about 8 $/MWh.
        for h in range(17, 21):
            assert diff[h] == pytest.approx(-40.0, abs=1.0)
        for h in list(range(0, 17)) + list(range(21, 24)):
            assert diff[h] == pytest.approx(8.0, abs=1.0)
        on_hours = sum(1 for h in series.hours
                       if series.series["with_storage"][h]
                       == pytest.approx(142.88, abs=0.01))
        assert on_hours == 4

    def test_identical_reports_zero_difference(self, benchmark):
        pair = [evaluate_scenario(benchmark, label="a"),
                evaluate_scenario(benchmark, label="b")]
        series = emit_price_series(pair)
        assert all(d == 0.0 for d in series.difference)

    def test_single_report_no_difference(self, benchmark):
        series = emit_price_series([evaluate_scenario(benchmark)])
        assert series.difference is None
        assert set(series.series) == {"with_storage"}

    def test_peak_block_is_configurable_and_wraps(self, pair):
        series = emit_price_series(pair, peak_start=22)
        with_prices = series.series["with_storage"]
        on_value = max(with_prices)
        assert [h for h in series.hours if with_prices[h] == on_value] == [0, 1, 22, 23]

    def test_rows_shape(self, pair):
        rows = emit_price_series(pair).rows()
        assert len(rows) == 24
        assert set(rows[0]) == {"hour", "price_with_storage",
                                "price_without_storage", "difference"}


class TestRunConfigDefaults:
    def test_direct_run_call(self, tmp_path, capsys):
        config = RunConfig(scenario_path=str(BUNDLED), counterfactual=True,
                           output_format="csv", output_dir=tmp_path / "o")
        code = run(config)
        out = capsys.readouterr().out
        assert code == 0
        assert out.startswith("scenario,period,lambda,ell")
