"""Brute-force verification path: capacity grid search over a closed-form
inner dispatch.

The inner problem (dispatch for fixed capacities) is solved analytically,
never numerically, so this module shares no machinery with the QP solver:

* per period, consumption is the merit-order crossing of the linear demand
  with the capacity-stepped supply curve, shifted by the storage injection;
* the energy volume shifted between periods maximizes a concave piecewise
  quadratic, located exactly as the zero of its continuous piecewise-linear
  marginal-value gap (marginal value of one more MWh discharged minus the
  efficiency-adjusted marginal cost of charging it).

Stored-energy capacity is gridded as a discharge duration h = E / K_s so the
search box stays scale-free.  Ties anywhere resolve toward less storage
throughput and, across grid points, toward the lexicographically smallest
capacity vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from peakstore.model import Scenario

_CHUNK = 200_000


@dataclass(frozen=True)
class Capacities:
    generators: dict[str, float]       # name -> MW
    storage_power: float = 0.0         # MW
    storage_energy: float = 0.0        # MWh


@dataclass(frozen=True)
class InnerDispatch:
    welfare: float                        # $ per cycle, investment included
    consumption: dict[str, float]         # period label -> MW
    generation: dict[str, dict[str, float]]  # period label -> generator -> MW
    charge: dict[str, float]              # period label -> MW
    discharge: dict[str, float]           # period label -> MW
    prices: dict[str, float]              # period label -> $/MWh (demand value)
    shifted_mwh: float                    # energy discharged in the receiving period


@dataclass(frozen=True)
class GridSpec:
    ranges: dict[str, tuple[float, float]]
    points: int = 25

    def to_dict(self) -> dict:
        return {"ranges": {k: list(v) for k, v in self.ranges.items()},
                "points": self.points}


@dataclass(frozen=True)
class OracleResult:
    best_welfare: float                 # $ per cycle
    best_capacities: Capacities
    best_dispatch: InnerDispatch
    grid: GridSpec
    evaluations: int
    pass_welfares: tuple[float, ...]    # incumbent welfare after each pass

    def to_dict(self) -> dict:
        return {
            "best_welfare": self.best_welfare,
            "best_capacities": {
                "generators": dict(self.best_capacities.generators),
                "storage_power": self.best_capacities.storage_power,
                "storage_energy": self.best_capacities.storage_energy,
            },
            "dispatch": {
                "consumption": dict(self.best_dispatch.consumption),
                "generation": {k: dict(v) for k, v in self.best_dispatch.generation.items()},
                "charge": dict(self.best_dispatch.charge),
                "discharge": dict(self.best_dispatch.discharge),
                "prices": dict(self.best_dispatch.prices),
                "shifted_mwh": self.best_dispatch.shifted_mwh,
            },
            "grid": self.grid.to_dict(),
            "evaluations": self.evaluations,
            "pass_welfares": list(self.pass_welfares),
        }


def _merit(s: Scenario):
    """Generators sorted by variable cost; returns (costs, names)."""
    order = sorted(range(len(s.generators)),
                   key=lambda k: (s.generators[k].variable_cost, k))
    costs = [s.generators[k].variable_cost for k in order]
    names = [s.generators[k].name for k in order]
    return costs, names


def _period_best(a, b, costs, caps, inj):
    """Vectorized merit-order optimum of one period for injection ``inj`` (MW).

    Returns (consumption, hourly welfare, injection marginal value).  The
    marginal value is the consumer price while consumption is positive and
    the running generator's marginal cost once charging has crowded
    consumption to zero.
    """
    inj = np.asarray(inj, dtype=float)
    lo = np.maximum(inj, 0.0)
    ell = lo.copy()
    edge = inj.copy()
    for cost, cap in zip(costs, caps):
        lo_k = np.maximum(edge, 0.0)
        edge = edge + cap
        hi_k = np.maximum(edge, 0.0)
        unc = (a - cost) / b
        ell = np.where(unc > lo_k, np.clip(unc, lo_k, hi_k), ell)
    gen = ell - inj
    run_cost = np.zeros_like(ell)
    rem = gen.copy()
    marginal_cost = np.full_like(ell, costs[0] if costs else 0.0)
    cum = np.zeros_like(ell)
    for cost, cap in zip(costs, caps):
        q = np.clip(rem, 0.0, cap)
        run_cost += cost * q
        rem = rem - q
        marginal_cost = np.where(gen > cum, cost, marginal_cost)
        cum = cum + cap
    welfare = a * ell - 0.5 * b * ell * ell - run_cost
    price = a - b * ell
    value = np.where(ell > 0.0, price,
                     np.where(gen > 0.0, marginal_cost, price))
    return ell, welfare, value


def _best_shift(dis_p, chg_p, costs, caps, ks, e, eta):
    """Optimal MWh discharged in ``dis_p`` (charged in ``chg_p``) per cycle.

    Returns (volume, operating welfare per cycle for the pair).  Candidates
    are the regime breakpoints of both periods plus the hard volume cap;
    between breakpoints the marginal-value gap is linear, so its zero is an
    exact interpolation.
    """
    ti, tj = dis_p.duration_hours, chg_p.duration_hours
    ai, bi = dis_p.demand.intercept_a, dis_p.demand.slope_b
    aj, bj = chg_p.demand.intercept_a, chg_p.demand.slope_b
    total_cap = sum(caps) if caps else np.zeros_like(ks)
    d_max = np.minimum(np.minimum(ks * ti, e),
                       eta * tj * np.minimum(ks, total_cap))
    d_max = np.maximum(d_max, 0.0)

    shape = np.shape(ks)
    cands = [np.zeros(shape), d_max]
    cum = np.zeros(shape)
    for cost, cap in zip(costs, caps):
        unc = (ai - cost) / bi
        cands.append(ti * (unc - cum))
        cum = cum + cap
        cands.append(ti * (unc - cum))
    cum = np.zeros(shape)
    for cost, cap in zip(costs, caps):
        unc = (aj - cost) / bj
        cands.append(-eta * tj * (unc - cum))
        cum = cum + cap
        cands.append(-eta * tj * (unc - cum))
        cands.append(eta * tj * cum)

    d = np.stack([np.broadcast_to(col, shape) for col in cands], axis=-1)
    d = np.clip(d, 0.0, d_max[..., None])
    d = np.sort(d, axis=-1)
    k = d.shape[-1]

    flat_d = d.reshape(-1)
    caps_rep = [np.repeat(cap[..., None], k, axis=-1).reshape(-1) for cap in caps]
    _, _, val_i = _period_best(ai, bi, costs, caps_rep, flat_d / ti)
    _, _, val_j = _period_best(aj, bj, costs, caps_rep, -flat_d / (eta * tj))
    gap = (val_i - val_j / eta).reshape(*shape, k)

    below = gap <= 0.0
    any_below = below.any(axis=-1)
    first = np.argmax(below, axis=-1)
    left = np.maximum(first - 1, 0)
    g_l = np.take_along_axis(gap, left[..., None], axis=-1)[..., 0]
    g_r = np.take_along_axis(gap, first[..., None], axis=-1)[..., 0]
    d_l = np.take_along_axis(d, left[..., None], axis=-1)[..., 0]
    d_r = np.take_along_axis(d, first[..., None], axis=-1)[..., 0]
    denom = g_l - g_r
    t = np.where(denom > 0.0, np.clip(g_l / np.where(denom > 0.0, denom, 1.0), 0.0, 1.0), 0.0)
    interior = d_l + t * (d_r - d_l)
    volume = np.where(any_below, np.where(first == 0, 0.0, interior), d_max)

    _, w_i, _ = _period_best(ai, bi, costs, caps, volume / ti)
    _, w_j, _ = _period_best(aj, bj, costs, caps, -volume / (eta * tj))
    return volume, ti * w_i + tj * w_j


def _batch_welfare(s: Scenario, gen_caps_by_name, ks, e):
    """Total welfare per cycle (investment included) for capacity arrays."""
    on, off = s.on_peak, s.off_peak
    costs, names = _merit(s)
    caps = [np.asarray(gen_caps_by_name[nm], dtype=float) for nm in names]
    shape = np.shape(caps[0]) if caps else np.shape(ks)

    if s.has_storage and ks is not None:
        eta = s.storage.efficiency
        _, w_fwd = _best_shift(on, off, costs, caps, ks, e, eta)
        operating = w_fwd
        # The reverse flow only pays when the off-peak marginal value beats
        # the efficiency-adjusted on-peak one; rare, so check before paying.
        zero = np.zeros(shape)
        _, _, v_on0 = _period_best(on.demand.intercept_a, on.demand.slope_b,
                                   costs, caps, zero)
        _, _, v_off0 = _period_best(off.demand.intercept_a, off.demand.slope_b,
                                    costs, caps, zero)
        if np.any(v_off0 * eta > v_on0):
            _, w_rev = _best_shift(off, on, costs, caps, ks, e, eta)
            operating = np.maximum(w_fwd, w_rev)
    else:
        zero = np.zeros(shape)
        _, w_on, _ = _period_best(on.demand.intercept_a, on.demand.slope_b,
                                  costs, caps, zero)
        _, w_off, _ = _period_best(off.demand.intercept_a, off.demand.slope_b,
                                   costs, caps, zero)
        operating = on.duration_hours * w_on + off.duration_hours * w_off

    invest = np.zeros(shape)
    for g in s.generators:
        invest = invest + g.inv_cost_power * np.asarray(gen_caps_by_name[g.name], dtype=float)
    if s.has_storage and ks is not None:
        invest = invest + s.storage.inv_cost_power * ks + s.storage.inv_cost_energy * e
    return operating - invest / s.cycles_n


def inner_dispatch(caps: Capacities, s: Scenario) -> InnerDispatch:
    """Welfare-maximal dispatch for fixed capacities, by closed-form cases."""
    for name, value in caps.generators.items():
        if value < 0:
            raise ValueError(f"capacity for generator {name!r} must be >= 0, got {value}")
    if caps.storage_power < 0 or caps.storage_energy < 0:
        raise ValueError("storage capacities must be >= 0")

    on, off = s.on_peak, s.off_peak
    costs, names = _merit(s)
    cap_arrays = [np.array([caps.generators.get(nm, 0.0)]) for nm in names]

    volume = 0.0
    direction = None  # (discharge period, charge period)
    if s.has_storage and caps.storage_power > 0 and caps.storage_energy > 0:
        eta = s.storage.efficiency
        ks = np.array([caps.storage_power])
        e = np.array([caps.storage_energy])
        d_fwd, w_fwd = _best_shift(on, off, costs, cap_arrays, ks, e, eta)
        d_rev, w_rev = _best_shift(off, on, costs, cap_arrays, ks, e, eta)
        # Ties resolve toward less throughput: no flow, then the forward flow.
        best = _pair_welfare_at_zero(s, costs, cap_arrays)
        tol = 1e-9 * (1.0 + abs(best))
        if float(w_fwd[0]) > best + tol:
            best, volume, direction = float(w_fwd[0]), float(d_fwd[0]), (on, off)
        if float(w_rev[0]) > best + tol:
            best, volume, direction = float(w_rev[0]), float(d_rev[0]), (off, on)

    inj = {on.label: 0.0, off.label: 0.0}
    charge = {on.label: 0.0, off.label: 0.0}
    discharge = {on.label: 0.0, off.label: 0.0}
    if direction is not None and volume > 0.0:
        dis_p, chg_p = direction
        eta = s.storage.efficiency
        discharge[dis_p.label] = volume / dis_p.duration_hours
        charge[chg_p.label] = volume / (eta * chg_p.duration_hours)
        inj[dis_p.label] = discharge[dis_p.label]
        inj[chg_p.label] = -charge[chg_p.label]

    consumption, generation, prices = {}, {}, {}
    operating = 0.0
    for p in (on, off):
        ell_a, w_a, _ = _period_best(p.demand.intercept_a, p.demand.slope_b,
                                     costs, cap_arrays, np.array([inj[p.label]]))
        ell = float(ell_a[0])
        consumption[p.label] = ell
        prices[p.label] = p.demand.price(ell)
        operating += p.duration_hours * float(w_a[0])
        gen_total = ell - inj[p.label]
        by_gen = {}
        rem = gen_total
        for cost, nm, cap in zip(costs, names, cap_arrays):
            q = min(max(rem, 0.0), float(cap[0]))
            by_gen[nm] = q
            rem -= q
        generation[p.label] = by_gen

    invest = sum(g.inv_cost_power * caps.generators.get(g.name, 0.0)
                 for g in s.generators)
    if s.has_storage:
        invest += (s.storage.inv_cost_power * caps.storage_power
                   + s.storage.inv_cost_energy * caps.storage_energy)
    welfare = operating - invest / s.cycles_n
    return InnerDispatch(welfare=welfare, consumption=consumption,
                         generation=generation, charge=charge,
                         discharge=discharge, prices=prices,
                         shifted_mwh=volume)


def _pair_welfare_at_zero(s: Scenario, costs, cap_arrays) -> float:
    on, off = s.on_peak, s.off_peak
    zero = np.zeros(1)
    _, w_on, _ = _period_best(on.demand.intercept_a, on.demand.slope_b,
                              costs, cap_arrays, zero)
    _, w_off, _ = _period_best(off.demand.intercept_a, off.demand.slope_b,
                               costs, cap_arrays, zero)
    return on.duration_hours * float(w_on[0]) + off.duration_hours * float(w_off[0])


def default_grid(s: Scenario, points: int = 25) -> GridSpec:
    """Search box wide enough to contain any optimum: no capacity ever
    exceeds the largest choke consumption."""
    hi = 1.02 * max(p.demand.choke_load for p in s.periods)
    ranges = {f"K_{g.name}": (0.0, hi) for g in s.generators}
    if s.has_storage:
        ranges["K_s"] = (0.0, hi)
        ranges["duration_h"] = (0.0, 1.1 * s.on_peak.duration_hours)
    return GridSpec(ranges=ranges, points=points)


def _shift_welfare(dis_p, chg_p, costs, caps, volume, eta):
    """Operating welfare per cycle for the pair at a given shift volume."""
    ti, tj = dis_p.duration_hours, chg_p.duration_hours
    _, w_i, _ = _period_best(dis_p.demand.intercept_a, dis_p.demand.slope_b,
                             costs, caps, volume / ti)
    _, w_j, _ = _period_best(chg_p.demand.intercept_a, chg_p.demand.slope_b,
                             costs, caps, -volume / (eta * tj))
    return ti * w_i + tj * w_j


def _evaluate_axes_storage(s: Scenario, dim_names, axes):
    """Product grid with storage, factored over the duration axis.

    The energy axis only caps the shift volume, and welfare is concave in
    the volume, so the capped optimum is the clamp of the uncapped one:
    the breakpoint search runs once per (generator, power) base point and
    each duration value costs just one welfare evaluation.
    """
    on, off = s.on_peak, s.off_peak
    costs, names = _merit(s)
    eta = s.storage.efficiency
    h_pos = dim_names.index("duration_h")
    h_axis = axes[h_pos]
    base_names = [nm for nm in dim_names if nm != "duration_h"]
    base_axes = [axes[dim_names.index(nm)] for nm in base_names]
    base_sizes = [len(ax) for ax in base_axes]
    base_total = int(np.prod(base_sizes))

    best_w = -math.inf
    best_key = None  # (base flat index, h index): lexicographic tie-break
    chunk = max(1, _CHUNK // max(1, len(h_axis)))
    for start in range(0, base_total, chunk):
        flat = np.arange(start, min(start + chunk, base_total))
        multi = np.unravel_index(flat, base_sizes)
        vals = {nm: base_axes[i][multi[i]] for i, nm in enumerate(base_names)}
        caps = [np.asarray(vals[f"K_{nm}"], dtype=float) for nm in names]
        ks = np.asarray(vals["K_s"], dtype=float)
        unlimited = np.full(ks.shape, np.inf)
        d_fwd, _ = _best_shift(on, off, costs, caps, ks, unlimited, eta)
        zero = np.zeros(ks.shape)
        _, _, v_on0 = _period_best(on.demand.intercept_a, on.demand.slope_b,
                                   costs, caps, zero)
        _, _, v_off0 = _period_best(off.demand.intercept_a, off.demand.slope_b,
                                    costs, caps, zero)
        d_rev = None
        if np.any(v_off0 * eta > v_on0):
            d_rev, _ = _best_shift(off, on, costs, caps, ks, unlimited, eta)
        invest_base = np.zeros(ks.shape)
        for g in s.generators:
            invest_base = invest_base + g.inv_cost_power * np.asarray(
                vals[f"K_{g.name}"], dtype=float)
        invest_base = invest_base + s.storage.inv_cost_power * ks
        for hi, h in enumerate(h_axis):
            e = ks * h
            w = _shift_welfare(on, off, costs, caps, np.minimum(d_fwd, e), eta)
            if d_rev is not None:
                w = np.maximum(w, _shift_welfare(off, on, costs, caps,
                                                 np.minimum(d_rev, e), eta))
            w = w - (invest_base + s.storage.inv_cost_energy * e) / s.cycles_n
            k = int(np.argmax(w))
            key = (start + k, hi)
            if float(w[k]) > best_w or (float(w[k]) == best_w
                                        and best_key is not None and key < best_key):
                best_w = float(w[k])
                best_key = key
    base_point = np.unravel_index(best_key[0], base_sizes)
    best_vals = {nm: float(base_axes[i][base_point[i]])
                 for i, nm in enumerate(base_names)}
    best_vals["duration_h"] = float(h_axis[best_key[1]])
    return best_w, best_vals, base_total * len(h_axis)


def _evaluate_axes(s: Scenario, dim_names, axes):
    if s.has_storage:
        return _evaluate_axes_storage(s, dim_names, axes)
    sizes = [len(ax) for ax in axes]
    total = int(np.prod(sizes))
    best_w = -math.inf
    best_flat = -1
    for start in range(0, total, _CHUNK):
        flat = np.arange(start, min(start + _CHUNK, total))
        multi = np.unravel_index(flat, sizes)
        vals = {name: axes[i][multi[i]] for i, name in enumerate(dim_names)}
        gen_caps = {g.name: vals[f"K_{g.name}"] for g in s.generators}
        w = _batch_welfare(s, gen_caps, None, None)
        k = int(np.argmax(w))
        if float(w[k]) > best_w:
            best_w = float(w[k])
            best_flat = start + k
    point = np.unravel_index(best_flat, sizes)
    best_vals = {name: float(axes[i][point[i]]) for i, name in enumerate(dim_names)}
    return best_w, best_vals, total


def grid_search(s: Scenario, grid: GridSpec | None = None) -> OracleResult:
    """Two-pass exhaustive capacity search: coarse box, then the same point
    count again in a window of two coarse steps around the incumbent (which
    stays on the refined grid, so each pass can only improve)."""
    if grid is None:
        grid = default_grid(s)
    if not grid.ranges or grid.points < 2:
        raise ValueError("grid must have at least one dimension and two points per axis")
    for name, (lo, hi) in grid.ranges.items():
        if not hi > lo:
            raise ValueError(f"grid range for {name!r} is empty: ({lo}, {hi})")

    dim_names = list(grid.ranges)
    pts = grid.points if grid.points % 2 == 1 else grid.points + 1
    axes = [np.linspace(*grid.ranges[name], pts) for name in dim_names]
    best_w, best_vals, n1 = _evaluate_axes(s, dim_names, axes)
    welfares = [best_w]

    steps = [(grid.ranges[name][1] - grid.ranges[name][0]) / (pts - 1)
             for name in dim_names]
    axes2 = []
    for name, step in zip(dim_names, steps):
        center = best_vals[name]
        ax = center + np.linspace(-2.0 * step, 2.0 * step, pts)
        lo, hi = grid.ranges[name]
        axes2.append(np.clip(ax, max(lo, 0.0), hi))
    best_w2, best_vals2, n2 = _evaluate_axes(s, dim_names, axes2)
    if best_w2 > best_w:
        best_w, best_vals = best_w2, best_vals2
    welfares.append(best_w)

    gen_caps = {g.name: best_vals[f"K_{g.name}"] for g in s.generators}
    if s.has_storage:
        ks = best_vals["K_s"]
        e = ks * best_vals["duration_h"]
    else:
        ks = e = 0.0
    caps = Capacities(generators=gen_caps, storage_power=ks, storage_energy=e)
    dispatch = inner_dispatch(caps, s)
    return OracleResult(best_welfare=dispatch.welfare, best_capacities=caps,
                        best_dispatch=dispatch, grid=grid,
                        evaluations=n1 + n2, pass_welfares=tuple(welfares))
