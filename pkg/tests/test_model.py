import dataclasses
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from peakstore.model import (
    LinearDemand,
    Period,
    Scenario,
    StorageTech,
    calibrate_demand,
    gross_surplus,
    load_scenario,
    scenario_from_dict,
    scenario_to_dict,
    scenario_warnings,
    validate_scenario,
)

loads = st.floats(min_value=1.0, max_value=1e6)
prices = st.floats(min_value=0.01, max_value=1e4)
elasticities = st.floats(min_value=0.01, max_value=10.0)


def elasticity_at(demand, load):
    # |dq/dp| * p / q for the linear curve.
    return (1.0 / demand.slope_b) * demand.price(load) / load


class TestCalibrateDemand:
    def test_offpeak_baseline(self):
        d = calibrate_demand(10_000.0, 20.0, 0.1)
        assert d.intercept_a == pytest.approx(220.0, rel=1e-12)
        assert d.slope_b == pytest.approx(0.02, rel=1e-12)
        assert d.price(10_000.0) == pytest.approx(20.0, rel=1e-12)
        assert elasticity_at(d, 10_000.0) == pytest.approx(0.1, rel=1e-12)

    def test_onpeak_baseline(self):
        d = calibrate_demand(15_000.0, 100.0, 0.1)
        assert d.intercept_a == pytest.approx(1100.0, rel=1e-12)
        assert d.slope_b == pytest.approx(100.0 / 1500.0, rel=1e-12)
        assert d.price(15_000.0) == pytest.approx(100.0, rel=1e-12)
        assert elasticity_at(d, 15_000.0) == pytest.approx(0.1, rel=1e-12)

    def test_unit_elasticity_symmetric_intercept(self):
        d = calibrate_demand(123.0, 45.0, 1.0)
        assert d.intercept_a == pytest.approx(2 * 45.0)
        assert d.slope_b == pytest.approx(45.0 / 123.0)

    @pytest.mark.parametrize("kwargs,field", [
        (dict(baseline_load=0.0, baseline_price=20.0, elasticity=0.1), "baseline_load"),
        (dict(baseline_load=10.0, baseline_price=-1.0, elasticity=0.1), "baseline_price"),
        (dict(baseline_load=10.0, baseline_price=20.0, elasticity=0.0), "elasticity"),
    ])
    def test_nonpositive_inputs_name_the_field(self, kwargs, field):
        with pytest.raises(ValueError, match=field):
            calibrate_demand(**kwargs)

    @given(load=loads, price=prices, eps=elasticities)
    def test_baseline_roundtrip(self, load, price, eps):
        d = calibrate_demand(load, price, eps)
        assert d.price(load) == pytest.approx(price, rel=1e-12)
        assert elasticity_at(d, load) == pytest.approx(eps, rel=1e-9)


class TestGrossSurplus:
    def test_zero_consumption(self):
        assert gross_surplus(LinearDemand(220.0, 0.02), 0.0) == 0.0

    def test_offpeak_baseline_value(self):
        d = LinearDemand(220.0, 0.02)
        # Quadrature oracle on the integrand, then the frozen closed form.
        grid = np.linspace(0.0, 10_000.0, 200_001)
        oracle = np.trapezoid(d.intercept_a - d.slope_b * grid, grid)
        assert oracle == pytest.approx(1_200_000.0, rel=1e-12)
        assert gross_surplus(d, 10_000.0) == pytest.approx(1_200_000.0, rel=1e-12)

    def test_unit_elastic_triangle_plus_rectangle(self):
        p0, q0 = 45.0, 123.0
        d = LinearDemand(2 * p0, p0 / q0)
        assert gross_surplus(d, q0) == pytest.approx(1.5 * p0 * q0, rel=1e-12)

    def test_negative_consumption_rejected(self):
        with pytest.raises(ValueError):
            gross_surplus(LinearDemand(220.0, 0.02), -1.0)

    @given(load=loads, price=prices, eps=elasticities,
           f1=st.floats(0.0, 1.0), f2=st.floats(0.0, 1.0))
    def test_strictly_concave(self, load, price, eps, f1, f2):
        d = calibrate_demand(load, price, eps)
        hi = d.choke_load
        l1, l2 = sorted((f1 * hi, f2 * hi))
        if l2 - l1 < 1e-9 * hi:
            return
        mid = gross_surplus(d, 0.5 * (l1 + l2))
        mean = 0.5 * (gross_surplus(d, l1) + gross_surplus(d, l2))
        assert mid > mean

    @given(load=loads, price=prices, eps=elasticities, frac=st.floats(0.0, 1.0))
    def test_matches_trapezoid_quadrature(self, load, price, eps, frac):
        d = calibrate_demand(load, price, eps)
        ell = frac * d.choke_load
        grid = np.linspace(0.0, ell, 4097)
        oracle = np.trapezoid(d.intercept_a - d.slope_b * grid, grid)
        assert gross_surplus(d, ell) == pytest.approx(oracle, rel=1e-9, abs=1e-9)


class TestValidateScenario:
    def test_benchmark_scenario_is_clean(self, benchmark):
        assert validate_scenario(benchmark) == []

    def test_efficiency_out_of_bounds(self, benchmark):
        bad = dataclasses.replace(
            benchmark, storage=StorageTech(36_000.0, 31_000.0, efficiency=1.2))
        violations = validate_scenario(bad)
        assert len(violations) == 1
        assert "efficiency" in violations[0]

    def test_two_onpeak_periods(self, benchmark):
        p = benchmark.on_peak
        bad = dataclasses.replace(benchmark, periods=(p, p))
        violations = validate_scenario(bad)
        assert len(violations) == 1
        assert "label" in violations[0]

    def test_duplicate_generator_names(self, benchmark):
        g = benchmark.generators[0]
        bad = dataclasses.replace(benchmark, generators=(g, g))
        assert any("unique" in v for v in validate_scenario(bad))

    def test_negative_slope_and_duration(self, benchmark):
        bad_period = Period("on_peak", -1.0, LinearDemand(100.0, -0.5))
        bad = dataclasses.replace(benchmark, periods=(bad_period, benchmark.off_peak))
        violations = validate_scenario(bad)
        assert any("duration_hours" in v for v in violations)
        assert any("slope_b" in v for v in violations)

    def test_weak_demand_is_warned_not_rejected(self, benchmark):
        weak = Period("on_peak", 4.0, LinearDemand(5.0, 0.001))
        s = dataclasses.replace(benchmark, periods=(weak, benchmark.off_peak))
        assert validate_scenario(s) == []
        warnings = scenario_warnings(s)
        assert len(warnings) == 1 and "on_peak" in warnings[0]
        assert scenario_warnings(benchmark) == []


class TestScenarioIO:
    def test_roundtrip(self, benchmark):
        assert scenario_from_dict(scenario_to_dict(benchmark)) == benchmark

    def test_calibration_form_resolves_to_curve(self, tmp_path):
        d = {
            "cycles_n": 365,
            "periods": [
                {"label": "on_peak", "duration_hours": 4,
                 "demand": {"baseline_load_mw": 15000, "baseline_price": 100,
                            "elasticity": 0.1}},
                {"label": "off_peak", "duration_hours": 20,
                 "demand": {"a": 220, "b": 0.02}},
            ],
            "generators": [{"name": "B", "variable_cost": 20,
                            "inv_cost_power": 240000}],
        }
        path = tmp_path / "s.json"
        path.write_text(json.dumps(d))
        s = load_scenario(path)
        assert s.on_peak.demand == calibrate_demand(15_000.0, 100.0, 0.1)
        assert s.off_peak.demand == LinearDemand(220.0, 0.02)
        assert s.storage is None

    def test_missing_key_message(self):
        with pytest.raises(ValueError, match="cycles_n"):
            scenario_from_dict({"periods": [], "generators": []})

    def test_bad_demand_keys(self):
        with pytest.raises(ValueError, match="demand"):
            scenario_from_dict({
                "cycles_n": 1,
                "periods": [{"label": "on_peak", "duration_hours": 4,
                             "demand": {"x": 1}}],
                "generators": [],
            })

    def test_malformed_json_carries_byte_offset(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"cycles_n": 365,, }')
        with pytest.raises(json.JSONDecodeError) as err:
            load_scenario(path)
        assert err.value.pos == 17

    def test_without_storage_counterfactual(self, benchmark):
        assert benchmark.has_storage
        stripped = benchmark.without_storage()
        assert not stripped.has_storage
        assert stripped.generators == benchmark.generators
