"""Hourly DC optimal power flow and the day-ahead chaining with storage.

Each hour is one LP over generator cost segments, bus voltage angles, line
flows and storage charge/discharge::

    min   sum_k cost_k * seg_k
    s.t.  gen_at_bus + inflow - outflow + discharge - charge = load    (each bus)
          flow_l = base_mva * b_l * (theta_from - theta_to)            (each line)
          seg, flow, charge, discharge within bounds; theta_ref = 0

Ties between equal marginal costs are broken toward the lower generator id
by a vanishing cost perturbation; reported costs use the unperturbed curves.
"""

from __future__ import annotations

import csv
import math
import statistics
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .grid_core import HOURS, FuelType, GridCase
from .lp import LPInfeasible, LPUnbounded, solve_lp

TIE_EPS = 1e-7  # $/MWh per generator rank
BOUND_TOL = 1e-9


class DispatchError(RuntimeError):
    pass


class InfeasibleDispatchError(DispatchError):
    def __init__(self, hour: int, shortfall_mw: float, label: str = ""):
        where = f" ({label})" if label else ""
        super().__init__(f"hour {hour}{where}: dispatch infeasible, shortfall ~{shortfall_mw:.3f} MW")
        self.hour = hour
        self.shortfall_mw = shortfall_mw


@dataclass(frozen=True)
class HourlyDemand:
    hour: int
    load_mw_by_bus: Mapping[int, float]

    @property
    def total_mw(self) -> float:
        return math.fsum(self.load_mw_by_bus.values())


@dataclass
class DispatchResult:
    hour: int
    p_gen_mw: dict[int, float]
    line_flow_mw: dict[int, float]
    theta: dict[int, float]
    objective_cost: float
    storage_soc_mwh: dict[int, float] = field(default_factory=dict)
    storage_charge_mw: dict[int, float] = field(default_factory=dict)
    storage_discharge_mw: dict[int, float] = field(default_factory=dict)
    lmp: dict[int, float] = field(default_factory=dict)
    total_load_mw: float = 0.0
    system_marginal_cost: float = 0.0  # load-weighted mean nodal price, $/MWh


@dataclass
class DayDispatch:
    case_label: str
    hours: list[DispatchResult]
    total_cost: float
    generation_by_fuel_mwh: dict[FuelType, float]
    hourly_generation_by_fuel: dict[FuelType, list[float]]
    total_load_mwh: float


class OpfModel:
    """LP structure for one grid case; reused across hours."""

    def __init__(self, case: GridCase):
        self.case = case
        self.gens = sorted(case.generators, key=lambda g: g.id)
        self.buses = sorted(b.id for b in case.buses)
        self.lines = list(case.lines)
        self.storage = sorted(case.storage_units, key=lambda s: s.id)
        bus_row = {b: i for i, b in enumerate(self.buses)}
        self.bus_row = bus_row
        nb, nl = len(self.buses), len(self.lines)

        self.seg_owner: list[int] = []  # index into self.gens
        for gi, g in enumerate(self.gens):
            self.seg_owner += [gi] * len(g.cost_curve)
        ns = len(self.seg_owner)
        nst = len(self.storage)
        self.i_theta = ns
        self.i_flow = ns + nb
        self.i_dis = ns + nb + nl
        self.i_ch = self.i_dis + nst
        n = self.i_ch + nst
        m = nb + nl
        A = np.zeros((m, n))
        for k, gi in enumerate(self.seg_owner):
            A[bus_row[self.gens[gi].bus_id], k] = 1.0
        for li, ln in enumerate(self.lines):
            col = self.i_flow + li
            A[bus_row[ln.to_bus], col] += 1.0
            A[bus_row[ln.from_bus], col] -= 1.0
            r = nb + li
            A[r, col] = 1.0
            k = case.base_mva * ln.susceptance
            A[r, self.i_theta + bus_row[ln.from_bus]] -= k
            A[r, self.i_theta + bus_row[ln.to_bus]] += k
        for si, s in enumerate(self.storage):
            A[bus_row[s.bus_id], self.i_dis + si] = 1.0
            A[bus_row[s.bus_id], self.i_ch + si] = -1.0
        self.A = A
        self.n, self.m = n, m

    def solve(self, demand: HourlyDemand, soc_in: Mapping[int, float] | None = None, *,
              charge_price: float | None = None, allow_discharge: bool = False) -> DispatchResult:
        case, h = self.case, demand.hour
        if not 0 <= h < HOURS:
            raise DispatchError(f"hour {h} outside 0..{HOURS - 1}")
        for bus, v in demand.load_mw_by_bus.items():
            if bus not in self.bus_row:
                raise DispatchError(f"hour {h}: demand at unknown bus {bus}")
            if not v >= 0:
                raise DispatchError(f"hour {h}: negative or invalid load {v} at bus {bus}")
        soc = {s.id: s.initial_soc_mwh for s in self.storage}
        if soc_in:
            soc.update(soc_in)
        for s in self.storage:
            if not -BOUND_TOL <= soc[s.id] <= s.energy_capacity_mwh + BOUND_TOL:
                raise DispatchError(f"storage {s.id}: soc {soc[s.id]} outside capacity")

        n = self.n
        c = np.zeros(n)
        lo = np.zeros(n)
        up = np.zeros(n)
        true_cost = np.zeros(n)
        k = 0
        for gi, g in enumerate(self.gens):
            for seg_lo, width, cost in g.segments(h):
                lo[k], up[k] = seg_lo, width
                true_cost[k] = cost
                c[k] = cost + TIE_EPS * gi
                k += 1
        lo[self.i_theta:self.i_flow] = -np.inf
        up[self.i_theta:self.i_flow] = np.inf
        lo[self.i_theta] = up[self.i_theta] = 0.0  # reference bus
        for li, ln in enumerate(self.lines):
            lo[self.i_flow + li] = -ln.flow_limit_mw
            up[self.i_flow + li] = ln.flow_limit_mw
        for si, s in enumerate(self.storage):
            if allow_discharge:
                up[self.i_dis + si] = max(min(s.power_limit_mw, soc[s.id]), 0.0)
                c[self.i_dis + si] = TIE_EPS * (len(self.gens) + si)
            if charge_price is not None:
                room = (s.energy_capacity_mwh - soc[s.id]) / s.round_trip_efficiency
                up[self.i_ch + si] = max(min(s.power_limit_mw, room), 0.0)
                c[self.i_ch + si] = -charge_price
        b = np.zeros(self.m)
        for bus, v in demand.load_mw_by_bus.items():
            b[self.bus_row[bus]] += v

        try:
            res = solve_lp(c, self.A, b, lo, up)
        except LPInfeasible as exc:
            raise InfeasibleDispatchError(h, exc.infeasibility, case.label) from None
        except LPUnbounded as exc:
            raise DispatchError(f"hour {h}: internal error, unbounded LP") from exc
        x = res.x

        p_gen = {g.id: 0.0 for g in self.gens}
        for k, gi in enumerate(self.seg_owner):
            p_gen[self.gens[gi].id] += x[k]
        cost = float(sum(true_cost[k] * x[k] for k in range(len(self.seg_owner))))
        theta = {bus: float(x[self.i_theta + i]) for i, bus in enumerate(self.buses)}
        flows = {ln.id: float(x[self.i_flow + li]) for li, ln in enumerate(self.lines)}
        dis = {s.id: float(x[self.i_dis + si]) for si, s in enumerate(self.storage)}
        ch = {s.id: float(x[self.i_ch + si]) for si, s in enumerate(self.storage)}
        soc_out = {}
        for s in self.storage:
            v = soc[s.id] + s.round_trip_efficiency * ch[s.id] - dis[s.id]
            soc_out[s.id] = min(max(v, 0.0), s.energy_capacity_mwh)
        lmp = {bus: float(res.duals[i]) for i, bus in enumerate(self.buses)}
        total = demand.total_mw
        if total > 0:
            smc = sum(lmp[bus] * v for bus, v in demand.load_mw_by_bus.items()) / total
        else:
            smc = float(np.mean(list(lmp.values())))
        return DispatchResult(h, {gid: float(v) for gid, v in p_gen.items()}, flows, theta, cost,
                              soc_out, ch, dis, lmp, total, float(smc))


def solve_hour(case: GridCase, demand: HourlyDemand, soc_in: Mapping[int, float] | None = None,
               **kwargs) -> DispatchResult:
    """Optimal dispatch for one hour. See ``OpfModel.solve`` for storage options."""
    return OpfModel(case).solve(demand, soc_in, **kwargs)


def _aggregate(case: GridCase, hours: list[DispatchResult]) -> DayDispatch:
    fuel_of = {g.id: g.fuel for g in case.generators}
    fuels = [f for f in FuelType if f in set(fuel_of.values())
             or (f is FuelType.STORAGE and case.storage_units)]
    hourly = {f: [0.0] * HOURS for f in fuels}
    totals = {f: 0.0 for f in fuels}
    for r in hours:
        for gid in sorted(r.p_gen_mw):
            hourly[fuel_of[gid]][r.hour] += r.p_gen_mw[gid]
            totals[fuel_of[gid]] += r.p_gen_mw[gid]
        for sid in sorted(r.storage_discharge_mw):
            # net output, so the fuel totals always sum to the load served
            net = r.storage_discharge_mw[sid] - r.storage_charge_mw[sid]
            hourly[FuelType.STORAGE][r.hour] += net
            totals[FuelType.STORAGE] += net
    return DayDispatch(case.label, hours, math.fsum(r.objective_cost for r in hours), totals, hourly,
                       math.fsum(r.total_load_mw for r in hours))


def solve_day(case: GridCase, demands: Sequence[HourlyDemand],
              initial_soc: Mapping[int, float] | None = None) -> DayDispatch:
    """Dispatch a 24-hour day, carrying storage state of charge forward.

    With storage present the day is solved twice. The first pass leaves storage
    idle and yields each hour's system marginal cost. In the second pass storage
    charges (valued at the day's median marginal cost) in hours priced below the
    median and discharges as a zero-cost unit in all other hours.
    """
    if len(demands) != HOURS or sorted(d.hour for d in demands) != list(range(HOURS)):
        raise DispatchError(f"solve_day needs one demand per hour 0..{HOURS - 1}")
    demands = sorted(demands, key=lambda d: d.hour)
    model = OpfModel(case)
    soc = {s.id: s.initial_soc_mwh for s in case.storage_units}
    if initial_soc:
        soc.update(initial_soc)
    if not case.storage_units:
        return _aggregate(case, [model.solve(d, soc) for d in demands])

    first = [model.solve(d, soc) for d in demands]
    prices = [r.system_marginal_cost for r in first]
    median = statistics.median(prices)
    hours = []
    for d, price in zip(demands, prices):
        if price < median:
            r = model.solve(d, soc, charge_price=median)
        else:
            r = model.solve(d, soc, allow_discharge=True)
        soc = r.storage_soc_mwh
        hours.append(r)
    return _aggregate(case, hours)


def marginal_generation(base: DayDispatch, with_ev: DayDispatch) -> dict[FuelType, list[float]]:
    """Per-fuel, per-hour generation difference (MWh) of ``with_ev`` over ``base``."""
    if base.case_label != with_ev.case_label:
        raise DispatchError(f"dispatches come from different cases: "
                            f"{base.case_label!r} vs {with_ev.case_label!r}")
    fuels = [f for f in FuelType
             if f in base.hourly_generation_by_fuel or f in with_ev.hourly_generation_by_fuel]
    zero = [0.0] * HOURS
    return {f: [w - b for w, b in zip(with_ev.hourly_generation_by_fuel.get(f, zero),
                                      base.hourly_generation_by_fuel.get(f, zero))]
            for f in fuels}


def check_dispatch(case: GridCase, demand: HourlyDemand, result: DispatchResult,
                   balance_rtol: float = 1e-6, bound_tol: float = 1e-9) -> list[str]:
    """Return a list of constraint violations (empty when feasible)."""
    problems = []
    h = result.hour
    inj = {b.id: 0.0 for b in case.buses}
    for g in case.generators:
        p = result.p_gen_mw[g.id]
        a = g.availability[h]
        if p < g.p_min_mw * a - bound_tol or p > g.p_max_mw * a + bound_tol:
            problems.append(f"hour {h}: generator {g.id} output {p} outside limits")
        inj[g.bus_id] += p
    for s in case.storage_units:
        ch, dis = result.storage_charge_mw[s.id], result.storage_discharge_mw[s.id]
        if min(ch, dis) < -bound_tol or max(ch, dis) > s.power_limit_mw + bound_tol:
            problems.append(f"hour {h}: storage {s.id} power outside limits")
        soc = result.storage_soc_mwh[s.id]
        if soc < -bound_tol or soc > s.energy_capacity_mwh + bound_tol:
            problems.append(f"hour {h}: storage {s.id} soc outside capacity")
        inj[s.bus_id] += dis - ch
    for ln in case.lines:
        f = result.line_flow_mw[ln.id]
        if abs(f) > ln.flow_limit_mw + bound_tol:
            problems.append(f"hour {h}: line {ln.id} flow {f} exceeds {ln.flow_limit_mw}")
        implied = case.base_mva * ln.susceptance * (result.theta[ln.from_bus] - result.theta[ln.to_bus])
        if abs(implied - f) > balance_rtol * max(1.0, abs(f)):
            problems.append(f"hour {h}: line {ln.id} flow inconsistent with angles")
        inj[ln.from_bus] -= f
        inj[ln.to_bus] += f
    total = max(demand.total_mw, 1.0)
    for bus, v in inj.items():
        resid = v - demand.load_mw_by_bus.get(bus, 0.0)
        if abs(resid) >= balance_rtol * total:
            problems.append(f"hour {h}: bus {bus} balance residual {resid}")
    return problems


DISPATCH_COLUMNS = ["hour", "unit_type", "unit_id", "fuel", "mw"]


def write_dispatch_csv(day: DayDispatch, case: GridCase, path) -> None:
    """One row per (hour, generator); storage rows carry net discharge MW."""
    fuel_of = {g.id: g.fuel for g in case.generators}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DISPATCH_COLUMNS)
        for r in day.hours:
            for gid in sorted(r.p_gen_mw):
                w.writerow([r.hour, "generator", gid, fuel_of[gid].value, repr(r.p_gen_mw[gid])])
            for sid in sorted(r.storage_discharge_mw):
                net = r.storage_discharge_mw[sid] - r.storage_charge_mw[sid]
                w.writerow([r.hour, "storage", sid, FuelType.STORAGE.value, repr(net)])


def read_dispatch_csv(path) -> list[dict]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != DISPATCH_COLUMNS:
            raise ValueError(f"{path}: expected columns {DISPATCH_COLUMNS}, got {reader.fieldnames}")
        for row in reader:
            rows.append({"hour": int(row["hour"]), "unit_type": row["unit_type"],
                         "unit_id": int(row["unit_id"]), "fuel": FuelType(row["fuel"]),
                         "mw": float(row["mw"])})
    return rows
