"""Primal active-set solver for small concave QPs with exact duals.

The equality-constrained subproblem over the current working set is solved
through a dense factorization: an orthonormal null-space basis of the
working rows (SVD) and an eigendecomposition of the reduced Hessian.  The
reduced Hessian is only negative *semi*definite here, because most columns
enter the objective linearly; when the projected gradient has a component
in its null space the subproblem is unbounded and the solver rides that
ascent ray to the nearest blocking row, exactly as a simplex step would.

Tie-breaking is Bland-style everywhere (smallest row index both for the
entering blocking row and for the dropped negative-dual row), which makes
runs deterministic and guards against cycling on the degenerate vertices
this problem class produces (capacities at zero, storage energy rows that
are linearly dependent when they all bind).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from peakstore.program import QuadraticProgram

log = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-8
STATIONARITY_TOL = 1e-7
COMPLEMENTARITY_TOL = 1e-7


class SolverError(RuntimeError):
    """Raised when the iteration cap trips or the problem is unbounded."""

    def __init__(self, message: str, active_set: tuple[int, ...] = ()):
        super().__init__(message)
        self.active_set = tuple(active_set)


@dataclass(frozen=True)
class PrimalDualSolution:
    """Optimal primal point plus one dual value per constraint row.

    Inequality duals are non-negative (duals of <= rows in a maximization);
    equality duals are free.  ``active_set`` holds the inequality row
    indices in the final working set.
    """

    program: QuadraticProgram
    x: np.ndarray
    eq_duals: np.ndarray
    in_duals: np.ndarray
    objective: float
    active_set: tuple[int, ...]
    iterations: int

    def __post_init__(self):
        for arr in (self.x, self.eq_duals, self.in_duals):
            arr.setflags(write=False)

    def value(self, var_name: str) -> float:
        return float(self.x[self.program.column(var_name)])

    def eq_dual(self, row_name: str) -> float:
        return float(self.eq_duals[self.program.eq_row(row_name)])

    def in_dual(self, row_name: str) -> float:
        return float(self.in_duals[self.program.in_row(row_name)])


def _null_space(a: np.ndarray, n: int) -> np.ndarray:
    """Orthonormal basis of {p : a p = 0} as columns; identity when a is empty."""
    if a.size == 0:
        return np.eye(n)
    _, sv, vt = np.linalg.svd(a)
    tol = max(a.shape) * np.finfo(float).eps * (sv[0] if sv.size else 0.0)
    rank = int(np.sum(sv > tol))
    return vt[rank:].T


def solve(qp: QuadraticProgram) -> PrimalDualSolution:
    """Maximize the program from a feasible start (the origin, for the
    homogeneous programs this package builds).

    Returns a KKT point: stationarity, feasibility and complementary
    slackness all hold to within the module tolerances.  Raises
    SolverError with the last working set if the iteration cap is hit or
    an ascent ray is unblocked (unbounded problem).
    """
    Q, c = qp.Q, qp.c
    a_eq, b_eq = qp.a_eq, qp.b_eq
    a_in, b_in = qp.a_in, qp.b_in
    n = qp.n_variables
    m_eq = len(b_eq)
    m_in = len(b_in)
    max_iter = 10 * (m_eq + m_in)

    x = np.zeros(n)
    if m_eq and np.abs(b_eq).max() > 0.0:
        # Start from the minimum-norm equality solution (the origin for the
        # homogeneous balance rows this package builds).
        x, *_ = np.linalg.lstsq(a_eq, b_eq, rcond=None)
        if np.abs(a_eq @ x - b_eq).max() > FEASIBILITY_TOL:
            raise SolverError("equality rows are inconsistent; no feasible point")
    if m_in and (a_in @ x - b_in).max() > FEASIBILITY_TOL:
        raise SolverError("starting point violates an inequality row; "
                          "feasible-start construction only covers programs "
                          "whose inequalities admit the equality projection")
    working: list[int] = []
    in_row_norms = np.linalg.norm(a_in, axis=1) if m_in else np.zeros(0)
    grad_scale = max(1.0, float(np.abs(c).max(initial=0.0)))
    dual_tol = 1e-9 * grad_scale
    prev_obj = -np.inf

    def blocking_step(p: np.ndarray, limit: float) -> tuple[float, int | None]:
        """Largest feasible step along p up to limit; blocking row index or None."""
        if m_in == 0:
            return limit, None
        rates = a_in @ p
        slack = b_in - a_in @ x
        p_norm = float(np.linalg.norm(p))
        thresh = 1e-11 * in_row_norms * p_norm + 1e-300
        mask = rates > thresh
        if working:
            mask[working] = False
        if not mask.any():
            return limit, None
        idx = np.flatnonzero(mask)
        alphas = np.maximum(slack[idx], 0.0) / rates[idx]
        amin = float(alphas.min())
        if amin >= limit:
            return limit, None
        # Bland: smallest row index among (near-)ties at the minimum step.
        ties = idx[alphas <= amin + 1e-12 * (1.0 + amin)]
        return amin, int(ties.min())

    iterations = 0
    while True:
        iterations += 1
        if iterations > max_iter:
            raise SolverError(
                f"iteration limit {max_iter} exceeded; unbounded or cycling "
                f"(last working set {sorted(working)})",
                active_set=tuple(sorted(working)))

        a_w = np.vstack([a_eq] + [a_in[working]]) if (m_eq or working) \
            else np.zeros((0, n))
        z = _null_space(a_w, n)
        grad = Q @ x + c

        p = np.zeros(n)
        ray = False
        if z.shape[1]:
            h_r = z.T @ Q @ z
            g_r = z.T @ grad
            w, v = np.linalg.eigh(h_r)
            eig_tol = 1e-12 * max(1.0, float(np.abs(w).max(initial=0.0)))
            curved = w < -eig_tol
            g_modes = v.T @ g_r
            g_null = v[:, ~curved] @ g_modes[~curved]
            if np.abs(g_null).max(initial=0.0) > 1e-9 * grad_scale:
                u = g_null / np.linalg.norm(g_null)
                p = z @ u
                ray = True
            else:
                u = -(v[:, curved] @ (g_modes[curved] / w[curved]))
                p = z @ u

        step_tol = 1e-9 * (1.0 + float(np.abs(x).max(initial=0.0)))
        if not ray and np.abs(p).max(initial=0.0) <= step_tol:
            # Stationary on the working set: price the rows.
            if m_eq or working:
                duals, *_ = np.linalg.lstsq(a_w.T, grad, rcond=None)
            else:
                duals = np.zeros(0)
            eq_duals = duals[:m_eq]
            w_duals = duals[m_eq:]
            negative = [k for k in range(len(working)) if w_duals[k] < -dual_tol]
            if not negative:
                if m_eq or working:
                    # Re-project onto the working rows: drift accumulated
                    # over the iterations would otherwise leak into the
                    # complementarity products through the binding slacks.
                    # Two rounds of refinement buy an extra digit at badly
                    # scaled data.
                    b_w = np.concatenate([b_eq, b_in[working]])
                    for _ in range(2):
                        correction, *_ = np.linalg.lstsq(a_w, b_w - a_w @ x,
                                                         rcond=None)
                        x = x + correction
                in_duals = np.zeros(m_in)
                for k, row in enumerate(working):
                    in_duals[row] = max(float(w_duals[k]), 0.0)
                obj = float(0.5 * x @ Q @ x + c @ x)
                log.debug("optimal after %d iterations, active set %s",
                          iterations, sorted(working))
                return PrimalDualSolution(
                    program=qp, x=x, eq_duals=np.asarray(eq_duals, dtype=float),
                    in_duals=in_duals, objective=obj,
                    active_set=tuple(sorted(working)), iterations=iterations)
            drop_pos = min(negative, key=lambda k: working[k])
            log.debug("drop row %d (dual %.3e)", working[drop_pos], w_duals[drop_pos])
            del working[drop_pos]
            continue

        limit = np.inf if ray else 1.0
        alpha, block = blocking_step(p, limit)
        if ray and block is None:
            raise SolverError(
                "objective unbounded along an ascent ray "
                f"(working set {sorted(working)})",
                active_set=tuple(sorted(working)))
        x = x + alpha * p
        obj = float(0.5 * x @ Q @ x + c @ x)
        if obj < prev_obj - 1e-7 * (1.0 + abs(prev_obj)):
            raise SolverError(
                f"objective decreased ({prev_obj!r} -> {obj!r}); cycling "
                f"(working set {sorted(working)})",
                active_set=tuple(sorted(working)))
        prev_obj = obj
        if block is not None:
            working.append(block)
            working.sort()
            log.debug("add row %d at step %.3e", block, alpha)


@dataclass(frozen=True)
class KKTReport:
    """Residuals of every optimality condition at a candidate solution."""

    stationarity: dict[str, float]       # per-variable signed residual
    stationarity_inf: float
    eq_violation: float
    ineq_violation: float
    dual_negativity: float               # most negative inequality dual, as >= 0
    complementarity: float               # max |dual * slack|
    storage_power_identity: float | None   # sum_i T_i (sigma_i^+ + sigma_i^-) - I_sq/n
    storage_energy_identity: float | None  # gamma^+ + gamma^- - I_sE/n
    stationarity_tol: float = STATIONARITY_TOL
    feasibility_tol: float = FEASIBILITY_TOL
    complementarity_tol: float = COMPLEMENTARITY_TOL

    @property
    def within_tolerances(self) -> bool:
        return (self.stationarity_inf <= self.stationarity_tol
                and self.eq_violation <= self.feasibility_tol
                and self.ineq_violation <= self.feasibility_tol
                and self.dual_negativity <= self.stationarity_tol
                and self.complementarity <= self.complementarity_tol)


def kkt_residuals(qp: QuadraticProgram, sol: PrimalDualSolution) -> KKTReport:
    """Evaluate stationarity, feasibility and complementarity directly.

    Works on any (x, duals) pair of matching dimension, not just solver
    output, so tests can difference hand-perturbed duals.  The two storage
    aggregate identities (power-capacity and energy-capacity stationarity
    with the non-negativity dual excluded) are reported whenever the
    program has storage columns.
    """
    x = np.asarray(sol.x, dtype=float)
    if x.shape != (qp.n_variables,):
        raise ValueError(f"x has shape {x.shape}, expected ({qp.n_variables},)")
    eq_duals = np.asarray(sol.eq_duals, dtype=float)
    in_duals = np.asarray(sol.in_duals, dtype=float)
    if eq_duals.shape != (len(qp.b_eq),) or in_duals.shape != (len(qp.b_in),):
        raise ValueError("dual vectors do not match the program's row counts")

    resid = qp.Q @ x + qp.c - qp.a_eq.T @ eq_duals - qp.a_in.T @ in_duals
    stationarity = {v.name: float(resid[v.column]) for v in qp.variables}
    eq_violation = float(np.abs(qp.a_eq @ x - qp.b_eq).max(initial=0.0))
    slack = qp.b_in - qp.a_in @ x
    ineq_violation = float(np.maximum(-slack, 0.0).max(initial=0.0))
    dual_negativity = float(np.maximum(-in_duals, 0.0).max(initial=0.0))
    complementarity = float(np.abs(in_duals * slack).max(initial=0.0))

    power_identity = energy_identity = None
    if qp.has_variable("K_s"):
        ks_col = qp.column("K_s")
        rows = [qp.in_row(f"{kind}_{label}")
                for kind in ("chargemax", "dischargemax")
                for label in ("on_peak", "off_peak")]
        # Row coefficient on K_s is -T_i, so -coef * dual accumulates T_i * sigma.
        rent = -sum(qp.a_in[r, ks_col] * in_duals[r] for r in rows)
        power_identity = float(rent + qp.c[ks_col])
    if qp.has_variable("E"):
        e_col = qp.column("E")
        rows = [qp.in_row("energy_charge"), qp.in_row("energy_discharge")]
        rent = -sum(qp.a_in[r, e_col] * in_duals[r] for r in rows)
        energy_identity = float(rent + qp.c[e_col])

    return KKTReport(
        stationarity=stationarity,
        stationarity_inf=float(np.abs(resid).max(initial=0.0)),
        eq_violation=eq_violation,
        ineq_violation=ineq_violation,
        dual_negativity=dual_negativity,
        complementarity=complementarity,
        storage_power_identity=power_identity,
        storage_energy_identity=energy_identity,
    )
