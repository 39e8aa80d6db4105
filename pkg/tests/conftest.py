import numpy as np
import pytest

from peakstore.model import (
    GeneratorTech,
    LinearDemand,
    Period,
    Scenario,
    StorageTech,
    calibrate_demand,
)


def benchmark_scenario() -> Scenario:
    """Four-hour evening peak against a twenty-hour trough, elasticity 0.1
    at (15 GW, $100) and (10 GW, $20), NREL-style technology costs."""
    return Scenario(
        periods=(
            Period("on_peak", 4.0, calibrate_demand(15_000.0, 100.0, 0.1)),
            Period("off_peak", 20.0, calibrate_demand(10_000.0, 20.0, 0.1)),
        ),
        generators=(
            GeneratorTech("P", variable_cost=100.0, inv_cost_power=120_000.0),
            GeneratorTech("B", variable_cost=20.0, inv_cost_power=240_000.0),
        ),
        storage=StorageTech(inv_cost_power=36_000.0, inv_cost_energy=31_000.0,
                            efficiency=0.85),
        cycles_n=365,
    )


@pytest.fixture(scope="session")
def benchmark() -> Scenario:
    return benchmark_scenario()


@pytest.fixture(scope="session")
def benchmark_no_storage(benchmark) -> Scenario:
    return benchmark.without_storage()


def closed_form_without_storage(s: Scenario) -> dict:
    """Independent equilibrium from the two break-even conditions.

    Regime: peaker marginal on peak (entry break-even pins the on-peak
    price), baseload at capacity in both periods (its break-even pins the
    off-peak price), consumption read off the demand curves.
    """
    on, off = s.on_peak, s.off_peak
    peaker = max(s.generators, key=lambda g: g.variable_cost)
    base = min(s.generators, key=lambda g: g.variable_cost)
    n = s.cycles_n
    lam_on = peaker.variable_cost + peaker.inv_cost_power / (n * on.duration_hours)
    lam_off = base.variable_cost + (
        base.inv_cost_power / n
        - on.duration_hours * (lam_on - base.variable_cost)
    ) / off.duration_hours
    ell_on = (on.demand.intercept_a - lam_on) / on.demand.slope_b
    ell_off = (off.demand.intercept_a - lam_off) / off.demand.slope_b
    return {
        "lambda_on": lam_on,
        "lambda_off": lam_off,
        "ell_on": ell_on,
        "ell_off": ell_off,
        "K_B": ell_off,
        "K_P": ell_on - ell_off,
    }


def closed_form_with_storage(s: Scenario) -> dict:
    """Independent equilibrium from baseload break-even plus the storage
    price relation, with the peaker priced out.

    Unknowns are the two prices; quantities follow from the demand curves,
    the balance equations, and full-power discharge over the whole peak.
    """
    on, off = s.on_peak, s.off_peak
    base = min(s.generators, key=lambda g: g.variable_cost)
    st = s.storage
    n = s.cycles_n
    t_on, t_off = on.duration_hours, off.duration_hours
    premium = (st.inv_cost_energy + st.inv_cost_power / t_on) / n
    rhs = base.inv_cost_power / n + (t_on + t_off) * base.variable_cost
    lam_off = (rhs - t_on * premium) / (t_on / st.efficiency + t_off)
    lam_on = lam_off / st.efficiency + premium
    ell_on = (on.demand.intercept_a - lam_on) / on.demand.slope_b
    ell_off = (off.demand.intercept_a - lam_off) / off.demand.slope_b
    k_s = (ell_on - ell_off) * st.efficiency * t_off / (
        st.efficiency * t_off + t_on)
    k_b = ell_on - k_s
    return {
        "lambda_on": lam_on,
        "lambda_off": lam_off,
        "ell_on": ell_on,
        "ell_off": ell_off,
        "K_B": k_b,
        "K_s": k_s,
        "E": k_s * t_on,
        "q_plus_off": k_s * t_on / (st.efficiency * t_off),
        "q_minus_on": k_s,
    }


def scaled_scenario(s: Scenario, k: float) -> Scenario:
    """Multiply every price-like parameter (demand curve, variable and
    investment costs) by a common factor."""
    periods = tuple(
        Period(p.label, p.duration_hours,
               LinearDemand(p.demand.intercept_a * k, p.demand.slope_b * k))
        for p in s.periods)
    gens = tuple(
        GeneratorTech(g.name, g.variable_cost * k, g.inv_cost_power * k)
        for g in s.generators)
    storage = None
    if s.storage is not None:
        storage = StorageTech(s.storage.inv_cost_power * k,
                              s.storage.inv_cost_energy * k,
                              s.storage.efficiency)
    return Scenario(periods=periods, generators=gens, storage=storage,
                    cycles_n=s.cycles_n)


def shifted_scenario(s: Scenario, delta: float) -> Scenario:
    """Add a constant to both demand intercepts (pure price-level shift)."""
    periods = tuple(
        Period(p.label, p.duration_hours,
               LinearDemand(p.demand.intercept_a + delta, p.demand.slope_b))
        for p in s.periods)
    return Scenario(periods=periods, generators=s.generators,
                    storage=s.storage, cycles_n=s.cycles_n)


def random_scenario(rng: np.random.Generator, base: Scenario | None = None) -> Scenario:
    """Perturb demand baselines and every cost within +/-50 percent."""
    if base is None:
        base = benchmark_scenario()

    def f():
        return rng.uniform(0.5, 1.5)

    periods = []
    for p, (load, price) in zip(base.periods, ((15_000.0, 100.0), (10_000.0, 20.0))):
        periods.append(Period(p.label, p.duration_hours,
                              calibrate_demand(load * f(), price * f(), 0.1)))
    gens = tuple(
        GeneratorTech(g.name, g.variable_cost * f(), g.inv_cost_power * f())
        for g in base.generators)
    storage = StorageTech(base.storage.inv_cost_power * f(),
                          base.storage.inv_cost_energy * f(),
                          base.storage.efficiency)
    return Scenario(periods=tuple(periods), generators=gens, storage=storage,
                    cycles_n=base.cycles_n)
