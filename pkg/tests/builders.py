"""Small hand-built inputs shared by the scenario-level tests."""

from __future__ import annotations

import math

import numpy as np

from grid_ev_cosim.coupling import ServiceAreaMap
from grid_ev_cosim.emissions import (EguRateTable, OnRoadRateTable, Pollutant, Regime,
                                     default_egu_rates)
from grid_ev_cosim.grid_core import (Bus, FuelType, Generator, GridCase, StaticLoadSeries,
                                     TransmissionLine)
from grid_ev_cosim.scenario import ScenarioData
from grid_ev_cosim.transport import (SPEED_BINS, EnergyRateTable, LinkTraversal, RangeClass,
                                     TripRecord, VehicleClass)


def flat_energy_rates(kwh_per_mile=0.25, ac_kw=3.0):
    return EnergyRateTable({(c, b): kwh_per_mile for c in RangeClass for b in SPEED_BINS}, ac_kw)


def flat_onroad_rates(ldv_co2=400.0, hdv_co2=1600.0, other=1.0):
    rates = {}
    for vc, co2 in ((VehicleClass.LDV, ldv_co2), (VehicleClass.HDV, hdv_co2)):
        for b in SPEED_BINS:
            for p in Pollutant:
                for r in Regime:
                    rates[(vc, b, p, r)] = co2 if p is Pollutant.CO2 else other
    return OnRoadRateTable(rates)


def egu_rates(**co2_by_fuel):
    rates = dict(default_egu_rates().rates)
    for name, v in co2_by_fuel.items():
        rates[(FuelType(name), Pollutant.CO2)] = v
    return EguRateTable(rates)


def commuter_trips(n_vehicles, miles=31.25, mph=40.0, out_min=480.0, back_min=1050.0,
                   n_hdv=0, nodes=(1, 2)):
    """Each vehicle drives ``nodes[0] -> nodes[1]`` in the morning and back in the evening."""
    trips = []
    tid = 1
    a, b = nodes
    for vid in range(1, n_vehicles + n_hdv + 1):
        vc = VehicleClass.HDV if vid > n_vehicles else VehicleClass.LDV
        for (x, y, t, home) in ((a, b, out_min, False), (b, a, back_min, True)):
            trips.append(TripRecord(tid, vid, vc, (LinkTraversal(tid, x, y, miles, mph, t),), y, home))
            tid += 1
    return trips


def scenario_data(cases, trips, areas=None, energy=None, onroad=None, egu=None, **kw):
    if areas is None:
        nodes = sorted({ln.node_from for t in trips for ln in t.links} |
                       {t.end_node for t in trips})
        bus = next(iter(cases.values())).substation_ids[0]
        areas = ServiceAreaMap({n: bus for n in nodes})
    return ScenarioData(dict(cases), trips, areas, energy or flat_energy_rates(),
                        onroad or flat_onroad_rates(), egu or egu_rates(), **kw)


def random_small_case(seed, max_buses=4, max_gens=4, max_lines=4, uncongested=False):
    """Random connected case with integer costs (so equal-cost ties occur) and few segments."""
    rng = np.random.default_rng(seed)
    nb = int(rng.integers(1, max_buses + 1))
    buses = tuple(Bus(i + 1, f"b{i + 1}", 30.0 + 0.01 * i, -97.0) for i in range(nb))
    pairs = [(i, j) for i in range(1, nb + 1) for j in range(i + 1, nb + 1)]
    tree = [(int(rng.integers(1, k)), k) for k in range(2, nb + 1)]
    extra = [p for p in pairs if p not in tree]
    rng.shuffle(extra)
    n_extra = int(rng.integers(0, max(0, max_lines - len(tree)) + 1))
    edges = tree + extra[:n_extra]
    lines = tuple(TransmissionLine(k + 1, a, b, float(rng.integers(1, 20)),
                                   math.inf if uncongested else float(rng.integers(5, 80)))
                  for k, (a, b) in enumerate(edges))
    ng = int(rng.integers(1, max_gens + 1))
    gens = []
    n_segs = 0
    for gi in range(ng):
        pmax = float(rng.integers(10, 120))
        two = n_segs < 4 and rng.random() < 0.5
        c1 = float(rng.integers(5, 40))
        curve = ((pmax / 2, c1), (pmax, c1 + float(rng.integers(0, 20)))) if two else ((pmax, c1),)
        n_segs += len(curve)
        pmin = float(rng.integers(0, int(pmax / 3))) if rng.random() < 0.3 else 0.0
        gens.append(Generator(gi + 1, int(rng.integers(1, nb + 1)), FuelType.NATURAL_GAS, pmin, pmax,
                              curve))
    cap = sum(g.p_max_mw for g in gens)
    load = {b.id: 0.0 for b in buses}
    for _ in range(int(rng.integers(1, nb + 1))):
        load[int(rng.integers(1, nb + 1))] += float(rng.uniform(0, cap / nb))
    loads = tuple(StaticLoadSeries(b, (v,) * 24) for b, v in load.items() if v > 0)
    return GridCase(buses, lines, tuple(gens), (), loads, 100.0, "rand")
