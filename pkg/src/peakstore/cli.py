"""Command-line front end.

``peakstore run scenario.json [--counterfactual] [--format text|json|csv]
[--out DIR] [--oracle] [...]`` solves the scenario (optionally paired with
its storage-stripped counterfactual), prints operating / capacity tables,
runs every identity check, and emits the hourly price schedule used for
plotting.  Exit status: 0 all checks passed, 1 input or solver failure,
2 verification failure.  Set PEAKSTORE_LOG=DEBUG for solver traces.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from peakstore.analytics import (
    EquilibriumReport,
    evaluate_scenario,
    render_capacity_table,
    render_operating_table,
    verification_checks,
)
from peakstore.model import OFF_PEAK, ON_PEAK, load_scenario
from peakstore.oracle import grid_search
from peakstore.solver import SolverError

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VERIFICATION = 2

ORACLE_REL_TOL = 1e-3


@dataclass(frozen=True)
class RunConfig:
    scenario_path: str
    counterfactual: bool = False
    no_storage_only: bool = False
    output_format: str = "text"
    output_dir: Path | None = None
    run_oracle: bool = False
    price_tolerance: float = 1.0   # $/MWh, used for table rounding notes only
    peak_start: int = 17           # hour the on-peak block starts in the 24 h axis


@dataclass(frozen=True)
class PriceSeries:
    """Stepwise 24-hour price schedule per scenario, plus the signed
    with-minus-without difference when both scenarios are present."""

    hours: tuple[int, ...]
    series: dict[str, tuple[float, ...]]   # report label -> hourly prices
    difference: tuple[float, ...] | None

    def rows(self) -> list[dict]:
        out = []
        for k, h in enumerate(self.hours):
            row: dict = {"hour": h}
            for label, prices in self.series.items():
                row[f"price_{label}"] = prices[k]
            if self.difference is not None:
                row["difference"] = self.difference[k]
            out.append(row)
        return out


def emit_price_series(reports: list[EquilibriumReport], peak_start: int = 17) -> PriceSeries:
    """Lay the two period prices onto a 24-hour axis.

    The on-peak window sits as one contiguous block starting at
    ``peak_start`` (an evening peak by default); an hour belongs to the
    block when the block covers its midpoint.
    """
    hours = tuple(range(24))
    series: dict[str, tuple[float, ...]] = {}
    for r in reports:
        t_on = r.scenario.on_peak.duration_hours
        prices = []
        for h in hours:
            offset = (h + 0.5 - peak_start) % 24.0
            prices.append(r.prices[ON_PEAK] if offset < t_on else r.prices[OFF_PEAK])
        series[r.label] = tuple(prices)
    difference = None
    if len(reports) == 2:
        first, second = reports
        if first.scenario.has_storage != second.scenario.has_storage:
            with_r = first if first.scenario.has_storage else second
            without_r = second if first.scenario.has_storage else first
        else:
            with_r, without_r = first, second
        difference = tuple(a - b for a, b in
                           zip(series[with_r.label], series[without_r.label]))
    return PriceSeries(hours=hours, series=series, difference=difference)


def _resolve_scenario_path(raw: str) -> Path:
    p = Path(raw)
    if p.exists():
        return p
    bundled = resources.files("peakstore").joinpath("scenarios", raw)
    if bundled.is_file():
        return Path(str(bundled))
    bundled_json = resources.files("peakstore").joinpath("scenarios", raw + ".json")
    if bundled_json.is_file():
        return Path(str(bundled_json))
    raise FileNotFoundError(f"scenario file not found: {raw}")


def _operating_rows(reports: list[EquilibriumReport]) -> tuple[list[str], list[dict]]:
    gens = [g.name for g in reports[0].scenario.generators]
    header = ["scenario", "period", "lambda", "ell"] + [f"q_{g}" for g in gens] \
        + ["q_plus", "q_minus"]
    rows = []
    for r in reports:
        for label in (ON_PEAK, OFF_PEAK):
            row = {"scenario": r.label, "period": label,
                   "lambda": r.prices[label],
                   "ell": r.consumption[label] / 1e3}
            for g in gens:
                row[f"q_{g}"] = r.generation[label][g] / 1e3
            if r.scenario.has_storage:
                row["q_plus"] = r.charge[label] / 1e3
                row["q_minus"] = r.discharge[label] / 1e3
            else:
                row["q_plus"] = ""
                row["q_minus"] = ""
            rows.append(row)
    return header, rows


def _capacity_rows(reports: list[EquilibriumReport]) -> tuple[list[str], list[dict]]:
    gens = [g.name for g in reports[0].scenario.generators]
    header = ["scenario"] + [f"K_{g}" for g in gens] + ["K_s", "E"]
    rows = []
    for r in reports:
        row = {"scenario": r.label}
        for g in gens:
            row[f"K_{g}"] = r.capacities[f"K_{g}"] / 1e3
        if r.scenario.has_storage:
            row["K_s"] = r.capacities["K_s"] / 1e3
            row["E"] = r.capacities["E"] / 1e3
        else:
            row["K_s"] = ""
            row["E"] = ""
        rows.append(row)
    return header, rows


def _csv_text(header: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def _run_oracle(reports: list[EquilibriumReport]) -> list[dict]:
    out = []
    for r in reports:
        result = grid_search(r.scenario)
        solver_obj = r.solution.objective
        rel_gap = abs(result.best_welfare - solver_obj) / max(1.0, abs(solver_obj))
        out.append({
            "scenario": r.label,
            "oracle_welfare": result.best_welfare,
            "solver_welfare": solver_obj,
            "relative_gap": rel_gap,
            "evaluations": result.evaluations,
            "agrees": rel_gap <= ORACLE_REL_TOL,
        })
    return out


def run(config: RunConfig) -> int:
    """Execute one configured run; returns the process exit status."""
    try:
        path = _resolve_scenario_path(config.scenario_path)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    try:
        scenario = load_scenario(path)
    except json.JSONDecodeError as exc:
        print(f"error: {path}: invalid JSON at byte offset {exc.pos} "
              f"(line {exc.lineno}, column {exc.colno}): {exc.msg}",
              file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, OSError) as exc:
        print(f"error: {path}: {exc}", file=sys.stderr)
        return EXIT_ERROR

    if config.no_storage_only:
        runs = [scenario.without_storage()]
    else:
        runs = [scenario]
        if config.counterfactual and scenario.has_storage:
            runs.append(scenario.without_storage())

    reports = []
    try:
        for s in runs:
            reports.append(evaluate_scenario(s))
    except (SolverError, ValueError) as exc:
        print(f"error: solving failed: {exc}", file=sys.stderr)
        return EXIT_ERROR

    checks = [c for r in reports
              for c in verification_checks(r, price_tolerance=config.price_tolerance)]
    oracle_results = _run_oracle(reports) if config.run_oracle else None
    if oracle_results is not None:
        for entry in oracle_results:
            checks.append({"scenario": entry["scenario"], "name": "oracle_agreement",
                           "value": entry["relative_gap"], "tolerance": ORACLE_REL_TOL,
                           "passed": entry["agrees"], "note": ""})
    series = emit_price_series(reports, peak_start=config.peak_start)
    all_passed = all(c["passed"] is not False for c in checks)

    payload = {
        "scenario_file": str(path),
        "reports": [r.to_dict() for r in reports],
        "checks": checks,
        "all_checks_passed": all_passed,
        "price_series": {
            "hours": list(series.hours),
            "series": {k: list(v) for k, v in series.series.items()},
            "difference": list(series.difference) if series.difference else None,
        },
    }
    if oracle_results is not None:
        payload["oracle"] = oracle_results

    op_header, op_rows = _operating_rows(reports)
    cap_header, cap_rows = _capacity_rows(reports)
    series_rows = series.rows()
    series_header = list(series_rows[0].keys())

    if config.output_dir is not None:
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "operating.csv").write_text(_csv_text(op_header, op_rows))
        (out / "capacity.csv").write_text(_csv_text(cap_header, cap_rows))
        (out / "price_series.csv").write_text(_csv_text(series_header, series_rows))
        (out / "checks.json").write_text(json.dumps(
            {"checks": checks, "all_checks_passed": all_passed}, indent=2))

    if config.output_format == "json":
        print(json.dumps(payload, indent=2))
    elif config.output_format == "csv":
        print(_csv_text(op_header, op_rows))
        print(_csv_text(cap_header, cap_rows))
    else:
        print(f"scenario: {path}")
        print()
        print("operating (prices $/MWh, quantities GW)")
        print(render_operating_table(reports), end="")
        print()
        print("capacity (GW; storage energy GWh)")
        print(render_capacity_table(reports), end="")
        print()
        print("welfare ($/cycle)")
        for r in reports:
            w = r.welfare
            print(f"  {r.label:<18} net {w.net_welfare:,.2f}   "
                  f"(annual {w.net_welfare_annual:,.2f})")
        print()
        print("identity checks")
        for c in checks:
            status = {True: "PASS", False: "FAIL", None: "WARN"}[c["passed"]]
            print(f"  [{status}] {c['scenario']:<18} {c['name']:<32} "
                  f"value={c['value']:.6g} tol={c['tolerance']:.6g} {c['note']}")
        if oracle_results is not None:
            print()
            print("oracle")
            for entry in oracle_results:
                print(f"  {entry['scenario']:<18} welfare {entry['oracle_welfare']:,.2f} "
                      f"vs solver {entry['solver_welfare']:,.2f} "
                      f"(rel gap {entry['relative_gap']:.2e}, "
                      f"{entry['evaluations']} evaluations)")

    return EXIT_OK if all_passed else EXIT_VERIFICATION


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=getattr(
        logging, os.environ.get("PEAKSTORE_LOG", "WARNING").upper(), logging.WARNING))
    parser = argparse.ArgumentParser(
        prog="peakstore",
        description="Two-period peak-load pricing equilibrium with duration-limited storage.")
    sub = parser.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="solve a scenario file and verify the price identities")
    runp.add_argument("scenario", help="scenario JSON path, or the name of a bundled scenario")
    runp.add_argument("--counterfactual", action="store_true",
                      help="also solve the same system without storage")
    runp.add_argument("--no-storage-only", action="store_true",
                      help="solve only the storage-stripped system")
    runp.add_argument("--format", choices=("text", "json", "csv"), default="text",
                      dest="output_format")
    runp.add_argument("--out", type=Path, default=None, dest="output_dir",
                      help="directory for operating.csv, capacity.csv, checks.json, price_series.csv")
    runp.add_argument("--oracle", action="store_true", dest="run_oracle",
                      help="cross-check the optimum against the grid-search oracle")
    runp.add_argument("--tolerance-prices", type=float, default=1.0, dest="price_tolerance",
                      help="price tolerance in $/MWh for rounded-table comparisons")
    runp.add_argument("--peak-start", type=int, default=17,
                      help="hour of day the on-peak block starts in the price schedule")
    args = parser.parse_args(argv)
    if args.command == "run":
        config = RunConfig(
            scenario_path=args.scenario,
            counterfactual=args.counterfactual,
            no_storage_only=args.no_storage_only,
            output_format=args.output_format,
            output_dir=args.output_dir,
            run_oracle=args.run_oracle,
            price_tolerance=args.price_tolerance,
            peak_start=args.peak_start,
        )
        return run(config)
    parser.error(f"unknown command {args.command!r}")
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
