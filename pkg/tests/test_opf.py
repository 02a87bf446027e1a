import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from builders import random_small_case
from conftest import one_bus_case
from oracles import merit_order_dispatch, vertex_enumeration_opf
from grid_ev_cosim import DATA_DIR
from grid_ev_cosim.grid_core import (Bus, FuelType, Generator, GridCase, StaticLoadSeries,
                                     StorageUnit, copper_plate, parse_grid_case)
from grid_ev_cosim.opf import (DispatchError, HourlyDemand, InfeasibleDispatchError,
                               check_dispatch, marginal_generation, read_dispatch_csv, solve_day,
                               solve_hour, write_dispatch_csv)

GAS, COAL, WIND = FuelType.NATURAL_GAS, FuelType.COAL, FuelType.WIND


def demand(case, hour=0, extra=None):
    loads = case.static_load_by_bus(hour)
    for b, v in (extra or {}).items():
        loads[b] += v
    return HourlyDemand(hour, loads)


def day(case, extra_by_hour=None):
    return [demand(case, h, (extra_by_hour or {}).get(h)) for h in range(24)]


def test_single_generator():
    case = one_bus_case([(GAS, 100.0, [(100.0, 20.0)])], 50.0)
    r = solve_hour(case, demand(case))
    assert r.p_gen_mw == {1: 50.0}
    assert r.objective_cost == 1000.0


def test_merit_order_two_units():
    case = one_bus_case([(GAS, 100.0, [(100.0, 30.0)]), (COAL, 100.0, [(100.0, 25.0)])], 150.0)
    r = solve_hour(case, demand(case))
    assert r.p_gen_mw[2] == pytest.approx(100.0, abs=1e-9)
    assert r.p_gen_mw[1] == pytest.approx(50.0, abs=1e-9)
    assert r.objective_cost == pytest.approx(4000.0)
    assert r.lmp[1] == pytest.approx(30.0)


def test_congested_line(two_bus_case):
    r = solve_hour(two_bus_case, demand(two_bus_case))
    assert r.line_flow_mw[1] == pytest.approx(40.0)
    assert r.p_gen_mw[1] == pytest.approx(40.0)
    assert r.p_gen_mw[2] == pytest.approx(20.0)
    assert check_dispatch(two_bus_case, demand(two_bus_case), r) == []
    ref = vertex_enumeration_opf(two_bus_case, two_bus_case.static_load_by_bus(0))
    assert r.objective_cost == pytest.approx(ref[0], rel=1e-9)
    # nodal prices split across the binding line
    assert r.lmp[1] == pytest.approx(10.0) and r.lmp[2] == pytest.approx(50.0)


def test_infeasible_hour_is_reported():
    case = one_bus_case([(GAS, 100.0, [(100.0, 20.0)])], 50.0)
    with pytest.raises(InfeasibleDispatchError) as err:
        solve_hour(case, HourlyDemand(7, {1: 130.0}))
    assert err.value.hour == 7
    assert err.value.shortfall_mw == pytest.approx(30.0)


def test_bad_demand_rejected():
    case = one_bus_case([(GAS, 100.0, [(100.0, 20.0)])], 50.0)
    with pytest.raises(DispatchError, match="unknown bus"):
        solve_hour(case, HourlyDemand(0, {5: 1.0}))
    with pytest.raises(DispatchError, match="negative"):
        solve_hour(case, HourlyDemand(0, {1: -1.0}))


def test_equal_costs_fill_lower_id_first():
    case = one_bus_case([(GAS, 100.0, [(100.0, 25.0)]), (COAL, 100.0, [(100.0, 25.0)]),
                         (GAS, 100.0, [(100.0, 25.0)])], 130.0)
    r = solve_hour(case, demand(case))
    assert r.p_gen_mw == pytest.approx({1: 100.0, 2: 30.0, 3: 0.0}, abs=1e-9)


def test_identical_hours_identical_results():
    case = one_bus_case([(GAS, 100.0, [(100.0, 30.0)]), (COAL, 100.0, [(100.0, 25.0)])], 150.0)
    d = solve_day(case, day(case))
    first = d.hours[0]
    for r in d.hours[1:]:
        assert r.p_gen_mw == first.p_gen_mw and r.objective_cost == first.objective_cost
    assert d.total_cost == pytest.approx(24 * 4000.0)


def test_zero_load_day_costs_nothing():
    case = one_bus_case([(GAS, 100.0, [(100.0, 30.0)]), (COAL, 100.0, [(100.0, 25.0)])], 0.0)
    d = solve_day(case, day(case))
    assert d.total_cost == 0.0
    assert all(v == 0.0 for r in d.hours for v in r.p_gen_mw.values())


def test_solve_day_needs_every_hour():
    case = one_bus_case([(GAS, 100.0, [(100.0, 30.0)])], 10.0)
    with pytest.raises(DispatchError):
        solve_day(case, day(case)[:23])


def test_generation_by_fuel_matches_hourly_sum():
    case = parse_grid_case(DATA_DIR / "demo_2016.json")
    d = solve_day(case, day(case))
    fuel_of = {g.id: g.fuel for g in case.generators}
    totals = {f: 0.0 for f in d.generation_by_fuel_mwh}
    for r in d.hours:
        for gid in sorted(r.p_gen_mw):
            totals[fuel_of[gid]] += r.p_gen_mw[gid]
    assert totals == d.generation_by_fuel_mwh  # same arithmetic path, exact
    assert math.fsum(d.generation_by_fuel_mwh.values()) == pytest.approx(d.total_load_mwh, rel=1e-12)


def test_demo_merit_order_bounds():
    case = parse_grid_case(DATA_DIR / "demo_2016.json")
    d = solve_day(case, day(case))
    winds = [g for g in case.generators if g.fuel is WIND]
    for r in d.hours:
        assert check_dispatch(case, demand(case, r.hour), r) == []
        gas_on = sum(r.p_gen_mw[g.id] for g in case.generators if g.fuel is GAS) > 1e-6
        if gas_on:
            # wind is never curtailed while gas runs
            for g in winds:
                assert r.p_gen_mw[g.id] == pytest.approx(g.p_max_mw * g.availability[r.hour], abs=1e-6)
    # copper-plate relaxation can only be cheaper
    cp = solve_day(copper_plate(case), day(case))
    assert cp.total_cost <= d.total_cost + 1e-6


def test_marginal_generation_examples():
    case = one_bus_case([(GAS, 500.0, [(500.0, 30.0)])], 100.0)
    base = solve_day(case, day(case))
    assert all(v == 0.0 for vs in marginal_generation(base, base).values() for v in vs)
    with_ev = solve_day(case, day(case, {h: {1: 10.0} for h in range(24)}))
    mg = marginal_generation(base, with_ev)
    assert mg[GAS] == pytest.approx([10.0] * 24)
    other = one_bus_case([(GAS, 500.0, [(500.0, 30.0)])], 100.0, label="other")
    with pytest.raises(DispatchError, match="different cases"):
        marginal_generation(base, solve_day(other, day(other)))


def test_marginal_generation_sums_to_ev_energy():
    case = parse_grid_case(DATA_DIR / "demo_2016.json")
    base = solve_day(case, day(case))
    rng = np.random.default_rng(3)
    extra = {h: {b: float(v) for b, v in zip(case.substation_ids, rng.uniform(0, 20, 8))}
             for h in range(24)}
    with_ev = solve_day(case, day(case, extra))
    ev_total = math.fsum(v for per in extra.values() for v in per.values())
    mg = marginal_generation(base, with_ev)
    assert math.fsum(v for vs in mg.values() for v in vs) == pytest.approx(ev_total, abs=1e-6)


def test_dispatch_csv_round_trip(tmp_path):
    case = parse_grid_case(DATA_DIR / "demo_2030.json")
    d = solve_day(case, day(case))
    write_dispatch_csv(d, case, tmp_path / "d.csv")
    rows = read_dispatch_csv(tmp_path / "d.csv")
    gens = [r for r in rows if r["unit_type"] == "generator"]
    assert len(gens) == 24 * len(case.generators)
    for row in gens:
        assert row["mw"] == d.hours[row["hour"]].p_gen_mw[row["unit_id"]]


# storage ---------------------------------------------------------------

def storage_case(load_shape, soc0=0.0):
    gens = (Generator(1, 1, COAL, 0.0, 300.0, ((300.0, 10.0),)),
            Generator(2, 1, GAS, 0.0, 300.0, ((300.0, 40.0),)))
    store = (StorageUnit(1, 1, 50.0, 200.0, 0.8, soc0),)
    loads = (StaticLoadSeries(1, tuple(load_shape)),)
    return GridCase((Bus(1, "b", 30.0, -97.0),), (), gens, store, loads, 100.0, "st")


def test_storage_charges_cheap_and_discharges_dear():
    shape = [200.0] * 12 + [400.0] * 12
    case = storage_case(shape)
    d = solve_day(case, day(case))
    for r in d.hours[:12]:
        assert r.storage_discharge_mw[1] == 0.0
    charged = sum(r.storage_charge_mw[1] for r in d.hours[:12])
    assert charged == pytest.approx(200.0 / 0.8)  # fills the battery, losses applied on charge
    assert d.hours[11].storage_soc_mwh[1] == pytest.approx(200.0)
    discharged = sum(r.storage_discharge_mw[1] for r in d.hours[12:])
    assert discharged == pytest.approx(200.0)
    for r in d.hours:
        assert check_dispatch(case, demand(case, r.hour), r) == []
        assert 0.0 <= r.storage_soc_mwh[1] <= 200.0
    assert d.total_cost < solve_day(storage_case(shape, 0.0), day(case)).total_cost + 1e-9
    # the storage-free day costs more
    no_store = GridCase(case.buses, (), case.generators, (), case.static_loads, 100.0, "st")
    assert d.total_cost < solve_day(no_store, day(no_store)).total_cost


def test_storage_never_charges_above_capacity():
    case = storage_case([100.0] * 20 + [500.0] * 4, soc0=190.0)
    d = solve_day(case, day(case))
    assert max(r.storage_soc_mwh[1] for r in d.hours) <= 200.0 + 1e-9


# randomized oracles ---------------------------------------------------

@st.composite
def small_case(draw, **kw):
    return random_small_case(draw(st.integers(0, 2**32 - 1)), **kw)


@settings(max_examples=40)
@given(small_case())
def test_matches_vertex_enumeration(case):
    d = demand(case)
    ref = vertex_enumeration_opf(case, d.load_mw_by_bus)
    if ref is None:
        with pytest.raises(InfeasibleDispatchError):
            solve_hour(case, d)
        return
    r = solve_hour(case, d)
    assert r.objective_cost == pytest.approx(ref[0], rel=1e-6, abs=1e-6)
    assert check_dispatch(case, d, r) == []


@settings(max_examples=40)
@given(small_case(max_buses=4, max_gens=5, uncongested=True))
def test_copper_plate_is_merit_order(case):
    d = demand(case)
    ref = merit_order_dispatch(case, d.total_mw)
    if ref is None:
        with pytest.raises(InfeasibleDispatchError):
            solve_hour(case, d)
        return
    r = solve_hour(case, d)
    for gid, p in ref.items():
        assert r.p_gen_mw[gid] == pytest.approx(p, abs=1e-9)


@settings(max_examples=30)
@given(small_case(), st.integers(1, 4), st.floats(0.0, 30.0))
def test_cost_monotone_in_load(case, bus, extra):
    bus = min(bus, len(case.buses))
    d0 = demand(case)
    d1 = demand(case, extra={bus: extra})
    try:
        r1 = solve_hour(case, d1)
    except InfeasibleDispatchError:
        return
    r0 = solve_hour(case, d0)
    assert r1.objective_cost >= r0.objective_cost - 1e-6 * max(1.0, r0.objective_cost)


def test_linearity_of_marginal_dispatch_uncongested():
    case = copper_plate(parse_grid_case(DATA_DIR / "demo_2016.json"))
    base = solve_day(case, day(case))
    rng = np.random.default_rng(0)
    shape = {h: {b: float(v) for b, v in zip(case.substation_ids, rng.uniform(0, 1, 8))}
             for h in range(24)}
    mg1 = marginal_generation(base, solve_day(case, day(case, shape)))
    doubled = {h: {b: 2 * v for b, v in per.items()} for h, per in shape.items()}
    mg2 = marginal_generation(base, solve_day(case, day(case, doubled)))
    for f in mg1:
        assert mg2[f] == pytest.approx([2 * v for v in mg1[f]], abs=1e-6)
