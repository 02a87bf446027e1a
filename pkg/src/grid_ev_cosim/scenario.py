"""Scenario runs and the weather x mix x penetration x strategy sweep."""

from __future__ import annotations

import csv
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .charging import STRATEGIES, BehaviorParams, NodeChargingProfile, build_profile
from .coupling import ServiceAreaMap, aggregate_ev_load, superpose_demand
from .emissions import (EguRateTable, EmissionInventory, OnRoadRateTable, Pollutant, Regime,
                        combine_inventories, egu_emissions, grams_to_tons_str, marginal_egu_rate,
                        onroad_emissions)
from .grid_core import HOURS, FuelType, GridCase, apply_load_shape
from .opf import DayDispatch, HourlyDemand, marginal_generation, solve_day
from .transport import (DEFAULT_RANGE_SHARES, EnergyRateTable, EvAssignment, RangeClass,
                        TripRecord, assign_evs)

DEFAULT_PENETRATIONS = (0.05, 0.10, 0.15, 0.20)
DEFAULT_WEATHER = ("mild", "hot")
DEFAULT_MIXES = ("2016", "2030")


class Weather(str, Enum):
    MILD = "mild"
    HOT = "hot"


def _hot_multipliers() -> tuple[float, ...]:
    # mild -> hot static load: ~8% overnight, ~36% at the afternoon peak
    h = np.arange(HOURS)
    w = np.clip(np.sin(np.pi * (h - 6) / 18), 0.0, 1.0) ** 1.5
    return tuple(round(float(v), 6) for v in 1.08 + 0.276 * w)


HOT_LOAD_MULTIPLIERS = _hot_multipliers()


class ScenarioError(RuntimeError):
    def __init__(self, spec: "ScenarioSpec", cause: BaseException):
        super().__init__(f"scenario {spec.name}: {type(cause).__name__}: {cause}")
        self.spec = spec
        self.cause = cause


@dataclass(frozen=True)
class ScenarioSpec:
    weather: str
    mix_year: str
    penetration: float
    strategy: str
    seed: int = 0

    def __post_init__(self):
        Weather(self.weather)
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if not 0 <= self.penetration <= 1:
            raise ValueError(f"penetration {self.penetration} outside [0, 1]")

    @property
    def name(self) -> str:
        return f"{self.weather}-{self.mix_year}-p{self.penetration:g}-{self.strategy}"


@dataclass
class ScenarioData:
    """Immutable inputs shared by every scenario of a sweep."""
    cases: Mapping[str, GridCase]
    trips: Sequence[TripRecord]
    areas: ServiceAreaMap
    energy_rates: EnergyRateTable
    onroad_rates: OnRoadRateTable
    egu_rates: EguRateTable
    behavior: BehaviorParams = field(default_factory=BehaviorParams)
    range_shares: Mapping[RangeClass, float] = field(default_factory=lambda: dict(DEFAULT_RANGE_SHARES))
    vehicle_weight: float = 1.0  # real vehicles represented by each simulated one
    hot_load_multipliers: Sequence[float] = HOT_LOAD_MULTIPLIERS

    def weather_case(self, mix_year: str, weather: str) -> GridCase:
        try:
            case = self.cases[mix_year]
        except KeyError:
            raise KeyError(f"no grid case for mix year {mix_year!r}") from None
        if Weather(weather) is Weather.HOT:
            return apply_load_shape(case, self.hot_load_multipliers)
        return case


@dataclass
class ScenarioResult:
    spec: ScenarioSpec
    case: GridCase
    assignment: EvAssignment
    profile: NodeChargingProfile
    ev_load_mw: dict[tuple[int, int], float]
    demands: list[HourlyDemand]
    day_dispatch: DayDispatch
    ev_energy_mwh: float
    inventory: EmissionInventory
    baseline: "ScenarioResult | None" = None
    marginal_generation: dict[FuelType, list[float]] = field(default_factory=dict)
    marginal_egu_rates: dict[Pollutant, float] = field(default_factory=dict)
    deltas: dict[Pollutant, tuple[float, float]] = field(default_factory=dict)

    @property
    def baseline_inventory(self) -> EmissionInventory:
        return (self.baseline or self).inventory


def _pipeline(spec: ScenarioSpec, data: ScenarioData) -> ScenarioResult:
    hot = Weather(spec.weather) is Weather.HOT
    case = data.weather_case(spec.mix_year, spec.weather)
    assignment = assign_evs(data.trips, spec.penetration, data.range_shares, spec.seed)
    profile = build_profile(spec.strategy, data.trips, assignment, data.energy_rates,
                            data.behavior, hot, spec.seed)
    ev_load = aggregate_ev_load(profile, data.areas, data.vehicle_weight)
    demands = superpose_demand(case, ev_load)
    day = solve_day(case, demands)
    regime = Regime.HOT if hot else Regime.MILD
    onroad = onroad_emissions(data.trips, assignment, data.onroad_rates, regime, data.vehicle_weight)
    inv = combine_inventories(onroad, egu_emissions(day, data.egu_rates), spec.name)
    ev_mwh = profile.total_kwh() / 1000.0 * data.vehicle_weight
    return ScenarioResult(spec, case, assignment, profile, ev_load, demands, day, ev_mwh, inv)


def run_baseline(weather: str, mix_year: str, data: ScenarioData, seed: int = 0) -> ScenarioResult:
    """The no-EV run for one (weather, mix) pair."""
    spec = ScenarioSpec(weather, mix_year, 0.0, "trip-end", seed)
    try:
        res = _pipeline(spec, data)
    except Exception as exc:
        raise ScenarioError(spec, exc) from exc
    res.inventory.label = f"baseline-{weather}-{mix_year}"
    _compare(res, res)
    return res


def _compare(res: ScenarioResult, base: ScenarioResult) -> None:
    res.baseline = base if base is not res else None
    res.marginal_generation = marginal_generation(base.day_dispatch, res.day_dispatch)
    for p in Pollutant:
        if res.ev_energy_mwh > 0:
            res.marginal_egu_rates[p] = marginal_egu_rate(base.inventory, res.inventory, p,
                                                          res.ev_energy_mwh)
        else:
            res.marginal_egu_rates[p] = math.nan
        b, s = base.inventory.total(p), res.inventory.total(p)
        d = s - b
        res.deltas[p] = (d, 100.0 * d / b if b else 0.0)


def run_scenario(spec: ScenarioSpec, data: ScenarioData,
                 baseline: ScenarioResult | None = None) -> ScenarioResult:
    """Run one scenario and compare it with its no-EV baseline."""
    if baseline is None:
        baseline = run_baseline(spec.weather, spec.mix_year, data, spec.seed)
    try:
        res = _pipeline(spec, data)
        _compare(res, baseline)
    except Exception as exc:
        raise ScenarioError(spec, exc) from exc
    return res


@dataclass
class ScenarioFailure:
    spec: ScenarioSpec
    message: str


@dataclass
class MatrixResult:
    results: list[ScenarioResult]
    failures: list[ScenarioFailure]
    baselines: dict[tuple[str, str], ScenarioResult]

    @property
    def complete(self) -> bool:
        return not self.failures


def default_matrix(seed: int = 0, weather=DEFAULT_WEATHER, mixes=DEFAULT_MIXES,
                   penetrations=DEFAULT_PENETRATIONS, strategies=STRATEGIES) -> list[ScenarioSpec]:
    axes = [tuple(weather), tuple(mixes), tuple(penetrations), tuple(strategies)]
    if any(not a for a in axes):
        raise ValueError("every matrix axis needs at least one value")
    return [ScenarioSpec(w, m, p, s, seed) for w, m, p, s in itertools.product(*axes)]


def run_matrix(specs: Sequence[ScenarioSpec], data: ScenarioData, workers: int = 1) -> MatrixResult:
    """Run every spec; failures are recorded per scenario and never stop the sweep.

    Baselines are solved once per (weather, mix, seed) and shared. Results come
    back in spec order whatever the worker count.
    """
    if not specs:
        raise ValueError("no scenarios to run")
    keys = list(dict.fromkeys((s.weather, s.mix_year, s.seed) for s in specs))

    def base_job(key):
        try:
            return run_baseline(key[0], key[1], data, key[2])
        except Exception as exc:  # noqa: BLE001 - isolated per pair
            return exc

    def job(spec):
        base = bases[(spec.weather, spec.mix_year, spec.seed)]
        if isinstance(base, Exception):
            return ScenarioFailure(spec, f"baseline failed: {base}")
        try:
            return run_scenario(spec, data, base)
        except Exception as exc:  # noqa: BLE001 - isolated per scenario
            return ScenarioFailure(spec, str(exc))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            bases = dict(zip(keys, pool.map(base_job, keys)))
            outcomes = list(pool.map(job, specs))
    else:
        bases = {k: base_job(k) for k in keys}
        outcomes = [job(s) for s in specs]
    results = [o for o in outcomes if isinstance(o, ScenarioResult)]
    failures = [o for o in outcomes if isinstance(o, ScenarioFailure)]
    baselines = {(k[0], k[1]): v for k, v in bases.items() if isinstance(v, ScenarioResult)}
    return MatrixResult(results, failures, baselines)


# --------------------------------------------------------------------------
# reports

SUMMARY_COLUMNS = ["weather", "mix_year", "penetration", "strategy", "total_co2_t", "total_nox_t",
                   "pct_co2_reduction", "pct_nox_reduction", "marginal_rate_co2_g_per_mwh",
                   "marginal_rate_nox_g_per_mwh", "marginal_rate_pm25_g_per_mwh",
                   "marginal_rate_voc_g_per_mwh", "ev_energy_mwh", "dispatch_cost_usd"]
BASELINE_COLUMNS = ["weather", "mix_year", "total_co2_t", "total_nox_t", "total_load_mwh",
                    "dispatch_cost_usd"]
FAILURE_COLUMNS = ["weather", "mix_year", "penetration", "strategy", "error"]


def _num(x: float) -> str:
    return repr(float(x))


def summary_row(res: ScenarioResult) -> list[str]:
    s = res.spec
    inv = res.inventory
    return [s.weather, s.mix_year, _num(s.penetration), s.strategy,
            grams_to_tons_str(inv.total(Pollutant.CO2)), grams_to_tons_str(inv.total(Pollutant.NOX)),
            _num(-res.deltas[Pollutant.CO2][1]), _num(-res.deltas[Pollutant.NOX][1]),
            *(_num(res.marginal_egu_rates[p]) for p in Pollutant),
            _num(res.ev_energy_mwh), _num(res.day_dispatch.total_cost)]


def write_summary_csv(results: Sequence[ScenarioResult], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for r in results:
            w.writerow(summary_row(r))


def write_baselines_csv(baselines: Mapping[tuple[str, str], ScenarioResult], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BASELINE_COLUMNS)
        for (weather, mix), r in baselines.items():
            w.writerow([weather, mix, grams_to_tons_str(r.inventory.total(Pollutant.CO2)),
                        grams_to_tons_str(r.inventory.total(Pollutant.NOX)),
                        _num(r.day_dispatch.total_load_mwh), _num(r.day_dispatch.total_cost)])


def write_failures_csv(failures: Sequence[ScenarioFailure], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FAILURE_COLUMNS)
        for f in failures:
            w.writerow([f.spec.weather, f.spec.mix_year, _num(f.spec.penetration), f.spec.strategy,
                        f.message])


def read_summary_csv(path) -> list[dict]:
    """Parse a summary file back into typed rows."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != SUMMARY_COLUMNS:
            raise ValueError(f"{path}: expected columns {SUMMARY_COLUMNS}")
        for row in reader:
            out = {"weather": Weather(row["weather"]).value, "mix_year": row["mix_year"],
                   "strategy": row["strategy"]}
            if out["strategy"] not in STRATEGIES:
                raise ValueError(f"{path}: unknown strategy {out['strategy']!r}")
            for k in SUMMARY_COLUMNS:
                if k not in out:
                    out[k] = float(row[k])
            rows.append(out)
    return rows


def read_baselines_csv(path) -> list[dict]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != BASELINE_COLUMNS:
            raise ValueError(f"{path}: expected columns {BASELINE_COLUMNS}")
        for row in reader:
            rows.append({"weather": Weather(row["weather"]).value, "mix_year": row["mix_year"],
                         **{k: float(row[k]) for k in BASELINE_COLUMNS[2:]}})
    return rows


def read_failures_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != FAILURE_COLUMNS:
            raise ValueError(f"{path}: expected columns {FAILURE_COLUMNS}")
        return [dict(r, penetration=float(r["penetration"])) for r in reader]


# plot data: plain whitespace-separated columns

def write_load_stack(res: ScenarioResult, path) -> None:
    """Hourly static load, EV load and generation by fuel for one scenario."""
    fuels = list(res.day_dispatch.hourly_generation_by_fuel)
    static = res.case.hourly_total_load()
    ev = [0.0] * HOURS
    for (_, h), mw in res.ev_load_mw.items():
        ev[h] += mw
    with open(path, "w") as fh:
        fh.write(" ".join(["hour", "static_mw", "ev_mw"] + [f"gen_{f.value}_mw" for f in fuels]) + "\n")
        for h in range(HOURS):
            vals = [static[h], ev[h]] + [res.day_dispatch.hourly_generation_by_fuel[f][h] for f in fuels]
            fh.write(" ".join([str(h)] + [repr(float(v)) for v in vals]) + "\n")


def write_marginal_generation(res: ScenarioResult, path) -> None:
    fuels = list(res.marginal_generation)
    with open(path, "w") as fh:
        fh.write(" ".join(["hour"] + [f"delta_{f.value}_mwh" for f in fuels]) + "\n")
        for h in range(HOURS):
            fh.write(" ".join([str(h)] + [repr(float(res.marginal_generation[f][h])) for f in fuels])
                     + "\n")


def write_emissions_by_scenario(results: Sequence[ScenarioResult], path) -> None:
    with open(path, "w") as fh:
        fh.write("scenario " + " ".join(f"{p.value}_onroad_g {p.value}_egu_g" for p in Pollutant) + "\n")
        for r in results:
            vals = []
            for p in Pollutant:
                vals += [r.inventory.onroad_total(p), r.inventory.egu_total(p)]
            fh.write(" ".join([r.spec.name] + [repr(float(v)) for v in vals]) + "\n")


def read_columns(path) -> dict[str, list]:
    """Read a plot data file: header of names, then whitespace-separated rows."""
    with open(path) as fh:
        header = fh.readline().split()
        cols: dict[str, list] = {h: [] for h in header}
        for line in fh:
            parts = line.split()
            if len(parts) != len(header):
                raise ValueError(f"{path}: row has {len(parts)} fields, expected {len(header)}")
            for h, v in zip(header, parts):
                try:
                    cols[h].append(float(v))
                except ValueError:
                    cols[h].append(v)
    return cols
