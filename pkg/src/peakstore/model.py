"""Domain types for the two-period peak-load system with optional storage.

Internal units throughout: MW, MWh, hours, $/MWh, $/MW-year, $/MWh-year.
Scenario files may express demand either directly as a linear inverse demand
curve or as a (baseline load, baseline price, elasticity) anchor; the anchor
form is resolved to a curve at load time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

ON_PEAK = "on_peak"
OFF_PEAK = "off_peak"
PERIOD_LABELS = (ON_PEAK, OFF_PEAK)


@dataclass(frozen=True)
class LinearDemand:
    """Linear inverse demand: price(load) = intercept_a - slope_b * load."""

    intercept_a: float  # $/MWh at zero consumption
    slope_b: float      # $/MWh per MW, > 0

    def price(self, load: float) -> float:
        return self.intercept_a - self.slope_b * load

    @property
    def choke_load(self) -> float:
        """Consumption at which the willingness to pay reaches zero."""
        return self.intercept_a / self.slope_b


@dataclass(frozen=True)
class Period:
    label: str            # "on_peak" or "off_peak"
    duration_hours: float  # hours per cycle, > 0
    demand: LinearDemand


@dataclass(frozen=True)
class GeneratorTech:
    name: str
    variable_cost: float   # $/MWh
    inv_cost_power: float  # $/MW-year


@dataclass(frozen=True)
class StorageTech:
    inv_cost_power: float   # $/MW-year
    inv_cost_energy: float  # $/MWh-year
    efficiency: float       # round-trip, in (0, 1]


@dataclass(frozen=True)
class Scenario:
    """One full problem instance.

    ``storage is None`` is the counterfactual system without the storage
    technology; everything else is shared between the paired runs.
    """

    periods: tuple[Period, ...]
    generators: tuple[GeneratorTech, ...]
    storage: StorageTech | None
    cycles_n: int  # peak cycles per year, >= 1

    @property
    def has_storage(self) -> bool:
        return self.storage is not None

    def period(self, label: str) -> Period:
        for p in self.periods:
            if p.label == label:
                return p
        raise KeyError(f"scenario has no period labeled {label!r}")

    @property
    def on_peak(self) -> Period:
        return self.period(ON_PEAK)

    @property
    def off_peak(self) -> Period:
        return self.period(OFF_PEAK)

    def without_storage(self) -> "Scenario":
        return replace(self, storage=None)


def calibrate_demand(baseline_load: float, baseline_price: float,
                     elasticity: float) -> LinearDemand:
    """Fit a linear inverse demand through a baseline point at a given
    point-elasticity magnitude.

    The returned curve satisfies price(baseline_load) = baseline_price and
    |dq/dp| * (p/q) = elasticity at the baseline point.
    """
    for field_name, value in (("baseline_load", baseline_load),
                              ("baseline_price", baseline_price),
                              ("elasticity", elasticity)):
        if not value > 0:
            raise ValueError(f"{field_name} must be positive, got {value!r}")
    slope = baseline_price / (elasticity * baseline_load)
    intercept = baseline_price * (1.0 + 1.0 / elasticity)
    return LinearDemand(intercept_a=intercept, slope_b=slope)


def gross_surplus(demand: LinearDemand, consumption: float) -> float:
    """Area under the inverse demand curve up to ``consumption``, $/h.

    Exact closed form of the integral: a*l - b*l^2/2.
    """
    if consumption < 0:
        raise ValueError(f"consumption must be non-negative, got {consumption!r}")
    return demand.intercept_a * consumption - 0.5 * demand.slope_b * consumption ** 2


def validate_scenario(s: Scenario) -> list[str]:
    """Check every type invariant; returns a list of violations (empty = valid)."""
    out: list[str] = []
    if len(s.periods) != 2:
        out.append(f"periods: expected exactly 2, got {len(s.periods)}")
    labels = sorted(p.label for p in s.periods)
    if len(s.periods) == 2 and labels != sorted(PERIOD_LABELS):
        out.append(f"periods: labels must be one {ON_PEAK!r} and one {OFF_PEAK!r}, got {labels}")
    for p in s.periods:
        tag = f"period {p.label!r}"
        if not p.duration_hours > 0:
            out.append(f"{tag}: duration_hours must be > 0, got {p.duration_hours}")
        if not p.demand.slope_b > 0:
            out.append(f"{tag}: demand slope_b must be > 0, got {p.demand.slope_b}")
        if not p.demand.intercept_a > 0:
            out.append(f"{tag}: demand intercept_a must be > 0, got {p.demand.intercept_a}")
    names = [g.name for g in s.generators]
    if len(set(names)) != len(names):
        out.append(f"generators: names must be unique, got {names}")
    for g in s.generators:
        if g.variable_cost < 0:
            out.append(f"generator {g.name!r}: variable_cost must be >= 0, got {g.variable_cost}")
        if g.inv_cost_power < 0:
            out.append(f"generator {g.name!r}: inv_cost_power must be >= 0, got {g.inv_cost_power}")
    if s.storage is not None:
        st = s.storage
        if not 0 < st.efficiency <= 1:
            out.append(f"storage: efficiency must be in (0, 1], got {st.efficiency}")
        if st.inv_cost_power < 0:
            out.append(f"storage: inv_cost_power must be >= 0, got {st.inv_cost_power}")
        if st.inv_cost_energy < 0:
            out.append(f"storage: inv_cost_energy must be >= 0, got {st.inv_cost_energy}")
    if not (isinstance(s.cycles_n, int) and s.cycles_n >= 1):
        out.append(f"cycles_n: must be an integer >= 1, got {s.cycles_n!r}")
    return out


def scenario_warnings(s: Scenario) -> list[str]:
    """Non-fatal oddities worth surfacing.

    A demand intercept at or below the cheapest variable cost leaves no
    profitable consumption; the equilibrium then sits against the zero /
    negative-price end of the curve, which is legal but usually a data bug.
    """
    out: list[str] = []
    if s.generators:
        cheapest = min(g.variable_cost for g in s.generators)
        for p in s.periods:
            if p.demand.intercept_a <= cheapest:
                out.append(
                    f"period {p.label!r}: demand intercept {p.demand.intercept_a} "
                    f"never exceeds the cheapest variable cost {cheapest}; "
                    "equilibrium consumption will sit at the choke region"
                )
    return out


def _demand_from_dict(d: dict) -> LinearDemand:
    if "a" in d and "b" in d:
        return LinearDemand(intercept_a=float(d["a"]), slope_b=float(d["b"]))
    if {"baseline_load_mw", "baseline_price", "elasticity"} <= d.keys():
        return calibrate_demand(float(d["baseline_load_mw"]),
                                float(d["baseline_price"]),
                                float(d["elasticity"]))
    raise ValueError(
        "demand must provide either {a, b} or "
        "{baseline_load_mw, baseline_price, elasticity}, got keys "
        f"{sorted(d.keys())}"
    )


def scenario_from_dict(d: dict) -> Scenario:
    try:
        periods = tuple(
            Period(label=str(p["label"]),
                   duration_hours=float(p["duration_hours"]),
                   demand=_demand_from_dict(p["demand"]))
            for p in d["periods"]
        )
        generators = tuple(
            GeneratorTech(name=str(g["name"]),
                          variable_cost=float(g["variable_cost"]),
                          inv_cost_power=float(g["inv_cost_power"]))
            for g in d["generators"]
        )
        storage = None
        if d.get("storage") is not None:
            st = d["storage"]
            storage = StorageTech(inv_cost_power=float(st["inv_cost_power"]),
                                  inv_cost_energy=float(st["inv_cost_energy"]),
                                  efficiency=float(st["efficiency"]))
        return Scenario(periods=periods, generators=generators,
                        storage=storage, cycles_n=int(d["cycles_n"]))
    except KeyError as exc:
        raise ValueError(f"scenario is missing required key {exc.args[0]!r}") from exc


def scenario_to_dict(s: Scenario) -> dict:
    d: dict = {
        "cycles_n": s.cycles_n,
        "periods": [
            {"label": p.label,
             "duration_hours": p.duration_hours,
             "demand": {"a": p.demand.intercept_a, "b": p.demand.slope_b}}
            for p in s.periods
        ],
        "generators": [
            {"name": g.name,
             "variable_cost": g.variable_cost,
             "inv_cost_power": g.inv_cost_power}
            for g in s.generators
        ],
    }
    if s.storage is not None:
        d["storage"] = {"inv_cost_power": s.storage.inv_cost_power,
                        "inv_cost_energy": s.storage.inv_cost_energy,
                        "efficiency": s.storage.efficiency}
    return d


def load_scenario(path: str | Path) -> Scenario:
    """Parse a scenario JSON file.

    json.JSONDecodeError (with byte offset in ``.pos``) propagates on
    malformed input so callers can report the exact location.
    """
    text = Path(path).read_text(encoding="utf-8")
    return scenario_from_dict(json.loads(text))
