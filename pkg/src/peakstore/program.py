"""Assembly of the concave investment-and-dispatch QP from a scenario.

Conventions that the rest of the package relies on:

* maximize 0.5 x'Qx + c'x;  Q is diagonal, nonzero only on the consumption
  columns (entry -T_i * b_i), so the objective is concave.
* Every dispatch constraint row keeps its duration premultiplier T_i.  With
  that scaling the balance-row dual is the energy price in $/MWh directly,
  and the capacity-rent duals integrate to $/MW-cycle as T_i * dual.
* The objective is dollars per cycle: annual investment is divided by the
  cycle count when it enters the linear term.
* Plumbing rows (consumption and capacity non-negativity) carry coefficient
  -1 with no duration scaling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from peakstore.model import ON_PEAK, Scenario, validate_scenario

EQ = "eq"
LE = "le"


@dataclass(frozen=True)
class Variable:
    name: str
    column: int


@dataclass(frozen=True)
class Constraint:
    name: str
    row: int
    sense: str        # EQ or LE
    dual_symbol: str  # conventional symbol used when printing duals


class ProgramError(ValueError):
    pass


@dataclass(frozen=True)
class QuadraticProgram:
    """Dense stacked form: maximize 0.5 x'Qx + c'x s.t. A_eq x = b_eq, A_in x <= b_in."""

    Q: np.ndarray
    c: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    a_in: np.ndarray
    b_in: np.ndarray
    variables: tuple[Variable, ...]
    eq_constraints: tuple[Constraint, ...]
    in_constraints: tuple[Constraint, ...]
    _columns: dict = field(repr=False, default_factory=dict)
    _eq_rows: dict = field(repr=False, default_factory=dict)
    _in_rows: dict = field(repr=False, default_factory=dict)

    def __post_init__(self):
        for arr in (self.Q, self.c, self.a_eq, self.b_eq, self.a_in, self.b_in):
            arr.setflags(write=False)
        self._columns.update({v.name: v.column for v in self.variables})
        self._eq_rows.update({r.name: r.row for r in self.eq_constraints})
        self._in_rows.update({r.name: r.row for r in self.in_constraints})

    @property
    def n_variables(self) -> int:
        return len(self.variables)

    def has_variable(self, name: str) -> bool:
        return name in self._columns

    def column(self, name: str) -> int:
        try:
            return self._columns[name]
        except KeyError:
            raise KeyError(f"program has no variable {name!r}") from None

    def eq_row(self, name: str) -> int:
        try:
            return self._eq_rows[name]
        except KeyError:
            raise KeyError(f"program has no equality row {name!r}") from None

    def in_row(self, name: str) -> int:
        try:
            return self._in_rows[name]
        except KeyError:
            raise KeyError(f"program has no inequality row {name!r}") from None

    def has_in_row(self, name: str) -> bool:
        return name in self._in_rows

    def dump(self) -> str:
        """Plain-text listing (objective plus one line per row) for diffing."""
        names = [v.name for v in self.variables]

        def terms(coeffs):
            parts = [f"{coeffs[j]:+.6g}*{names[j]}" for j in np.flatnonzero(coeffs)]
            return " ".join(parts) if parts else "0"

        lines = ["maximize:"]
        quad = [f"{0.5 * self.Q[j, j]:+.6g}*{names[j]}^2"
                for j in np.flatnonzero(np.diag(self.Q))]
        lines.append("  " + " ".join(quad + [terms(self.c)]))
        for con in self.eq_constraints:
            lines.append(f"{con.name} [{con.dual_symbol}]: "
                         f"{terms(self.a_eq[con.row])} == {self.b_eq[con.row]:.6g}")
        for con in self.in_constraints:
            lines.append(f"{con.name} [{con.dual_symbol}]: "
                         f"{terms(self.a_in[con.row])} <= {self.b_in[con.row]:.6g}")
        return "\n".join(lines) + "\n"


def objective_value(qp: QuadraticProgram, x: np.ndarray) -> float:
    """Dollars per cycle at primal point x."""
    x = np.asarray(x, dtype=float)
    if x.shape != (qp.n_variables,):
        raise ProgramError(
            f"primal point has shape {x.shape}, expected ({qp.n_variables},)")
    return float(0.5 * x @ qp.Q @ x + qp.c @ x)


def build_program(s: Scenario) -> QuadraticProgram:
    """Stack the scenario into the dense QP with named columns and rows.

    Storage columns and rows are omitted entirely (rather than fixed at
    zero) when the scenario has no storage, which keeps the counterfactual
    free of degenerate duals on frozen variables.
    """
    violations = validate_scenario(s)
    if violations:
        raise ProgramError("invalid scenario: " + "; ".join(violations))

    periods = (s.on_peak, s.off_peak)
    gens = s.generators
    n_cycles = s.cycles_n
    with_storage = s.has_storage

    variables: list[Variable] = []

    def add_var(name):
        variables.append(Variable(name=name, column=len(variables)))
        return variables[-1].column

    k_cols = {g.name: add_var(f"K_{g.name}") for g in gens}
    if with_storage:
        ks_col = add_var("K_s")
        e_col = add_var("E")
    q_cols = {(g.name, p.label): add_var(f"q_{g.name}_{p.label}")
              for g in gens for p in periods}
    if with_storage:
        chg_cols = {p.label: add_var(f"q_plus_{p.label}") for p in periods}
        dis_cols = {p.label: add_var(f"q_minus_{p.label}") for p in periods}
    ell_cols = {p.label: add_var(f"ell_{p.label}") for p in periods}

    n = len(variables)
    Q = np.zeros((n, n))
    c = np.zeros(n)
    for p in periods:
        Q[ell_cols[p.label], ell_cols[p.label]] = -p.duration_hours * p.demand.slope_b
        c[ell_cols[p.label]] = p.duration_hours * p.demand.intercept_a
        for g in gens:
            c[q_cols[g.name, p.label]] = -p.duration_hours * g.variable_cost
    for g in gens:
        c[k_cols[g.name]] = -g.inv_cost_power / n_cycles
    if with_storage:
        c[ks_col] = -s.storage.inv_cost_power / n_cycles
        c[e_col] = -s.storage.inv_cost_energy / n_cycles

    eq_rows: list[tuple[str, str, np.ndarray, float]] = []
    in_rows: list[tuple[str, str, np.ndarray, float]] = []

    def short(label):
        return "onp" if label == ON_PEAK else "offp"

    for p in periods:
        row = np.zeros(n)
        t = p.duration_hours
        row[ell_cols[p.label]] = t
        for g in gens:
            row[q_cols[g.name, p.label]] = -t
        if with_storage:
            row[chg_cols[p.label]] = t
            row[dis_cols[p.label]] = -t
        eq_rows.append((f"balance_{p.label}", f"lambda_{short(p.label)}", row, 0.0))

    for g in gens:
        for p in periods:
            t = p.duration_hours
            row = np.zeros(n)
            row[q_cols[g.name, p.label]] = t
            row[k_cols[g.name]] = -t
            in_rows.append((f"genmax_{g.name}_{p.label}",
                            f"pi_{g.name}_{short(p.label)}", row, 0.0))
    for g in gens:
        for p in periods:
            row = np.zeros(n)
            row[q_cols[g.name, p.label]] = -p.duration_hours
            in_rows.append((f"genmin_{g.name}_{p.label}",
                            f"psi_{g.name}_{short(p.label)}", row, 0.0))

    if with_storage:
        eta = s.storage.efficiency
        for p in periods:
            t = p.duration_hours
            row = np.zeros(n)
            row[chg_cols[p.label]] = t
            row[ks_col] = -t
            in_rows.append((f"chargemax_{p.label}", f"sigma_plus_{short(p.label)}", row, 0.0))
        for p in periods:
            t = p.duration_hours
            row = np.zeros(n)
            row[dis_cols[p.label]] = t
            row[ks_col] = -t
            in_rows.append((f"dischargemax_{p.label}", f"sigma_minus_{short(p.label)}", row, 0.0))
        for p in periods:
            row = np.zeros(n)
            row[chg_cols[p.label]] = -p.duration_hours
            in_rows.append((f"chargemin_{p.label}", f"zeta_plus_{short(p.label)}", row, 0.0))
        for p in periods:
            row = np.zeros(n)
            row[dis_cols[p.label]] = -p.duration_hours
            in_rows.append((f"dischargemin_{p.label}", f"zeta_minus_{short(p.label)}", row, 0.0))

        row = np.zeros(n)
        for p in periods:
            row[dis_cols[p.label]] = p.duration_hours
            row[chg_cols[p.label]] = -eta * p.duration_hours
        in_rows.append(("rte", "mu", row, 0.0))

        row = np.zeros(n)
        for p in periods:
            row[chg_cols[p.label]] = eta * p.duration_hours
        row[e_col] = -1.0
        in_rows.append(("energy_charge", "gamma_plus", row, 0.0))

        row = np.zeros(n)
        for p in periods:
            row[dis_cols[p.label]] = p.duration_hours
        row[e_col] = -1.0
        in_rows.append(("energy_discharge", "gamma_minus", row, 0.0))

    cap_cols = [(f"K_{g.name}", k_cols[g.name]) for g in gens]
    if with_storage:
        cap_cols += [("K_s", ks_col), ("E", e_col)]
    for name, col in cap_cols:
        row = np.zeros(n)
        row[col] = -1.0
        in_rows.append((f"capacity_nonneg_{name}", f"nu_{name}", row, 0.0))
    for p in periods:
        row = np.zeros(n)
        row[ell_cols[p.label]] = -1.0
        in_rows.append((f"ell_nonneg_{p.label}", f"ell_nonneg_{short(p.label)}", row, 0.0))

    eq_constraints = tuple(Constraint(name, i, EQ, sym)
                           for i, (name, sym, _, _) in enumerate(eq_rows))
    in_constraints = tuple(Constraint(name, i, LE, sym)
                           for i, (name, sym, _, _) in enumerate(in_rows))
    return QuadraticProgram(
        Q=Q,
        c=c,
        a_eq=np.array([r for _, _, r, _ in eq_rows]),
        b_eq=np.array([b for _, _, _, b in eq_rows]),
        a_in=np.array([r for _, _, r, _ in in_rows]),
        b_in=np.array([b for _, _, _, b in in_rows]),
        variables=tuple(variables),
        eq_constraints=eq_constraints,
        in_constraints=in_constraints,
    )
