"""Regenerate the bundled 10-bus demo cases, rate tables and config."""

from __future__ import annotations

import argparse
import json
import math
from pathlib import Path

import numpy as np

from grid_ev_cosim.emissions import (default_egu_rates, default_onroad_rates, write_egu_rates,
                                     write_onroad_rates)
from grid_ev_cosim.grid_core import (MILD_DAY_SHAPE, Bus, FuelType, Generator, GridCase,
                                     StaticLoadSeries, StorageUnit, TransmissionLine, wind_profile,
                                     write_grid_case)
from grid_ev_cosim.transport import default_energy_rates, write_energy_rates

DATA = Path(__file__).resolve().parents[1] / "src" / "grid_ev_cosim" / "data"

COORDS = {1: (30.42, -97.88), 2: (30.38, -97.74), 3: (30.33, -97.62), 4: (30.24, -97.56),
          5: (30.15, -97.63), 6: (30.10, -97.77), 7: (30.16, -97.90), 8: (30.26, -97.95),
          9: (30.28, -97.76), 10: (30.47, -97.60)}
PLANT_ONLY = {1, 7}
LOAD_SHARE = {2: 0.15, 3: 0.15, 4: 0.12, 5: 0.13, 6: 0.14, 8: 0.10, 9: 0.13, 10: 0.08}
RING = [(1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7), (7, 8), (8, 1), (2, 9), (9, 6),
        (3, 10), (10, 1)]
PEAK_MW = 2400.0


def _km(a, b):
    (la1, lo1), (la2, lo2) = COORDS[a], COORDS[b]
    x = math.radians(lo2 - lo1) * math.cos(math.radians((la1 + la2) / 2))
    return 6371.0 * math.hypot(x, math.radians(la2 - la1))


def _lines(limit_mw):
    return tuple(TransmissionLine(k + 1, a, b, round(1.0 / (0.0008 * _km(a, b)), 6), limit_mw)
                 for k, (a, b) in enumerate(RING))


def _buses():
    return tuple(Bus(i, f"bus{i}", lat, lon, i not in PLANT_ONLY) for i, (lat, lon) in COORDS.items())


def _loads(scale):
    return tuple(StaticLoadSeries(b, tuple(round(PEAK_MW * scale * s * v, 6) for v in MILD_DAY_SHAPE))
                 for b, s in LOAD_SHARE.items())


def case_2016(winds) -> GridCase:
    gens = (
        Generator(1, 1, FuelType.NUCLEAR, 0.0, 438.0, ((438.0, 8.0),)),
        Generator(2, 1, FuelType.COAL, 0.0, 875.0, ((550.0, 19.0), (875.0, 25.0))),
        Generator(3, 5, FuelType.NATURAL_GAS, 0.0, 1400.0, ((900.0, 22.0), (1400.0, 29.0))),
        Generator(4, 7, FuelType.NATURAL_GAS, 0.0, 788.0, ((788.0, 55.0),)),
        Generator(5, 10, FuelType.WIND, 0.0, 500.0, ((500.0, 0.0),), winds[0]),
        Generator(6, 8, FuelType.WIND, 0.0, 375.0, ((375.0, 0.0),), winds[1]),
    )
    return GridCase(_buses(), _lines(1400.0), gens, (), _loads(1.0), 100.0, "2016")


def case_2030(winds) -> GridCase:
    # coal retired, replacement gas at the old plant site, large wind purchase, batteries
    gens = (
        Generator(1, 1, FuelType.NUCLEAR, 0.0, 438.0, ((438.0, 8.0),)),
        Generator(3, 5, FuelType.NATURAL_GAS, 0.0, 1400.0, ((900.0, 22.0), (1400.0, 29.0))),
        Generator(4, 7, FuelType.NATURAL_GAS, 0.0, 788.0, ((788.0, 55.0),)),
        Generator(5, 10, FuelType.WIND, 0.0, 500.0, ((500.0, 0.0),), winds[0]),
        Generator(6, 8, FuelType.WIND, 0.0, 375.0, ((375.0, 0.0),), winds[1]),
        Generator(7, 1, FuelType.NATURAL_GAS, 0.0, 1000.0, ((700.0, 23.0), (1000.0, 30.0))),
        Generator(8, 10, FuelType.WIND, 0.0, 1500.0, ((1500.0, 0.0),), winds[2]),
        Generator(9, 8, FuelType.WIND, 0.0, 1500.0, ((1500.0, 0.0),), winds[3]),
    )
    storage = (StorageUnit(1, 5, 400.0, 1600.0, 0.85, 800.0),
               StorageUnit(2, 3, 400.0, 1600.0, 0.85, 800.0))
    return GridCase(_buses(), _lines(2200.0), gens, storage, _loads(1.25), 100.0, "2030")


def demo_config() -> dict:
    return {
        "cases": {"2016": "demo_2016.json", "2030": "demo_2030.json"},
        "trips": {"synthetic": {"n_vehicles": 10000, "n_nodes": 50, "seed": 1}},
        "nodes": {"synthetic": {"n_nodes": 50, "seed": 1}},
        "energy_rates": "energy_rates.csv",
        "onroad_rates": "onroad_rates.csv",
        "egu_rates": "egu_rates.csv",
        "behavior": {"anxiety_low_miles": 20.0, "anxiety_high_miles": 60.0,
                     "home_charger_kw": 7.2, "public_charger_kw": 50.0},
        "vehicle_weight": 100.0,
        "matrix": {"weather": ["mild", "hot"], "mix_year": ["2016", "2030"],
                   "penetration": [0.05, 0.10, 0.15, 0.20],
                   "strategy": ["trip-end", "off-peak", "most-likely"]},
        "seed": 0,
        "workers": 1,
        "out": "out",
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=DATA)
    args = ap.parse_args(argv)
    args.out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(2016)
    winds = [tuple(round(v, 4) for v in wind_profile(rng)) for _ in range(4)]
    write_grid_case(case_2016(winds), args.out / "demo_2016.json")
    write_grid_case(case_2030(winds), args.out / "demo_2030.json")
    write_energy_rates(default_energy_rates(), args.out / "energy_rates.csv")
    write_onroad_rates(default_onroad_rates(), args.out / "onroad_rates.csv")
    write_egu_rates(default_egu_rates(), args.out / "egu_rates.csv")
    (args.out / "demo_config.json").write_text(json.dumps(demo_config(), indent=2) + "\n")
    print(f"wrote demo data to {args.out}")


if __name__ == "__main__":
    main()
