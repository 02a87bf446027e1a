"""Hourly EV charging energy per transport node under three charging strategies."""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .transport import EnergyRateTable, EvAssignment, TripRecord, trip_energy, trips_by_vehicle

STRATEGIES = ("trip-end", "off-peak", "most-likely")


class ChargingError(ValueError):
    pass


class ChargingInfeasibleError(ChargingError):
    """Some vehicles cannot complete a trip even from a full battery."""

    def __init__(self, vehicles: Mapping[int, tuple[int, float, float]]):
        self.vehicles = dict(vehicles)
        detail = "; ".join(f"vehicle {v}: trip {t} needs {e:.3f} kWh > capacity {c:.3f} kWh"
                           for v, (t, e, c) in sorted(self.vehicles.items())[:10])
        more = "" if len(self.vehicles) <= 10 else f" (+{len(self.vehicles) - 10} more)"
        super().__init__(f"{len(self.vehicles)} vehicle(s) cannot complete their tours: {detail}{more}")


@dataclass(frozen=True)
class BehaviorParams:
    anxiety_low_miles: float = 20.0
    anxiety_high_miles: float = 60.0
    home_charger_kw: float = 7.2
    public_charger_kw: float = 50.0
    peak_window: tuple[int, int] = (14, 20)
    offpeak_window: tuple[int, int] = (22, 4)

    def __post_init__(self):
        if not 0 <= self.anxiety_low_miles < self.anxiety_high_miles:
            raise ChargingError("need 0 <= anxiety_low_miles < anxiety_high_miles")
        if not (self.home_charger_kw > 0 and self.public_charger_kw > 0):
            raise ChargingError("charger powers must be > 0")
        for name in ("peak_window", "offpeak_window"):
            a, b = getattr(self, name)
            if not (0 <= a < 24 and 0 <= b < 24 and a != b):
                raise ChargingError(f"{name} {a}-{b} is not a valid hour window")
        if set(self.peak_hours) & set(self.offpeak_hours):
            raise ChargingError("peak and off-peak windows overlap")

    @staticmethod
    def _hours(window: tuple[int, int]) -> tuple[int, ...]:
        a, b = window
        return tuple(range(a, b)) if a < b else tuple(range(a, 24)) + tuple(range(0, b))

    @property
    def peak_hours(self) -> tuple[int, ...]:
        return self._hours(self.peak_window)

    @property
    def offpeak_hours(self) -> tuple[int, ...]:
        return self._hours(self.offpeak_window)


@dataclass(frozen=True)
class ChargingEvent:
    vehicle_id: int
    node: int
    start_minute: float  # minutes from midnight, may exceed 1440 before wrapping
    energy_kwh: float
    charger_power_kw: float
    public: bool = False

    @property
    def start_hour(self) -> int:
        return int(self.start_minute // 60) % 24

    @property
    def duration_h(self) -> float:
        return self.energy_kwh / self.charger_power_kw

    def hourly_energy(self) -> list[tuple[int, float]]:
        """Split the event into (clock hour, kWh) pieces at constant charger power."""
        out = []
        t = self.start_minute
        left = self.energy_kwh
        while left > 0:
            hour_end = (math.floor(t / 60) + 1) * 60.0
            e = min(left, self.charger_power_kw * (hour_end - t) / 60.0)
            out.append((int(t // 60) % 24, e))
            left -= e
            if left <= 1e-12 * self.energy_kwh:
                # last sliver from float round-off goes to the current hour
                out[-1] = (out[-1][0], out[-1][1] + left)
                break
            t = hour_end
        return out


@dataclass
class NodeChargingProfile:
    energy: dict[tuple[int, int], float] = field(default_factory=dict)  # (node, hour) -> kWh

    def add(self, node: int, hour: int, kwh: float) -> None:
        if kwh < 0:
            raise ChargingError("charging energy must be >= 0")
        key = (node, hour % 24)
        self.energy[key] = self.energy.get(key, 0.0) + kwh

    def total_kwh(self) -> float:
        return math.fsum(self.energy.values())

    def hourly_totals_kwh(self) -> list[float]:
        per = [[] for _ in range(24)]
        for (_, h), v in self.energy.items():
            per[h].append(v)
        return [math.fsum(p) for p in per]

    def nodes(self) -> list[int]:
        return sorted({n for n, _ in self.energy})

    def get(self, node: int, hour: int) -> float:
        return self.energy.get((node, hour), 0.0)

    def sorted_items(self) -> list[tuple[tuple[int, int], float]]:
        return sorted(self.energy.items())


def _ev_trips(trips: Iterable[TripRecord], assignment: EvAssignment):
    for vid, vtrips in trips_by_vehicle(trips).items():
        if assignment.is_ev(vid):
            yield vid, assignment.vehicles[vid], vtrips


def trip_end_profile(trips: Sequence[TripRecord], assignment: EvAssignment, rates: EnergyRateTable,
                     hot_weather: bool = False) -> NodeChargingProfile:
    """Each EV trip's energy is charged at its end node within its arrival hour."""
    prof = NodeChargingProfile()
    for _, va, vtrips in _ev_trips(trips, assignment):
        for t in vtrips:
            prof.add(t.end_node, t.end_hour, trip_energy(t, va.range_class, rates, hot_weather))
    return prof


def off_peak_profile(trip_end: NodeChargingProfile, params: BehaviorParams | None = None
                     ) -> NodeChargingProfile:
    """Move each node's peak-window energy evenly into the off-peak hours."""
    params = params or BehaviorParams()
    peak = set(params.peak_hours)
    off = params.offpeak_hours
    moved: dict[int, list[float]] = defaultdict(list)
    out = NodeChargingProfile()
    for (node, hour), kwh in trip_end.sorted_items():
        if hour in peak:
            moved[node].append(kwh)
        else:
            out.add(node, hour, kwh)
    for node in sorted(moved):
        share = math.fsum(moved[node]) / len(off)
        for h in off:
            out.add(node, h, share)
    return out


def vehicle_rng(seed: int, vehicle_id: int) -> np.random.Generator:
    """Per-vehicle stream so draws do not depend on which other vehicles are EVs."""
    return np.random.default_rng([seed, vehicle_id])


@dataclass
class MostLikelyRun:
    events: list[ChargingEvent]
    min_soc_kwh: dict[int, float]
    profile: NodeChargingProfile


def simulate_most_likely(trips: Sequence[TripRecord], assignment: EvAssignment,
                         rates: EnergyRateTable, params: BehaviorParams | None = None,
                         hot_weather: bool = False, seed: int = 0) -> MostLikelyRun:
    """Range-anxiety charging along each EV's tour plus an overnight charge to full.

    Each EV starts full. After a trip, if the remaining range (battery energy
    over the vehicle's average kWh/mile) is below its anxiety threshold plus the
    next trip's distance, it tops up at the current node with a public charger
    to cover the next trip plus the threshold. After the last trip it charges
    to full with the home charger, starting at arrival and wrapping past
    midnight.
    """
    params = params or BehaviorParams()
    events: list[ChargingEvent] = []
    min_soc: dict[int, float] = {}
    bad: dict[int, tuple[int, float, float]] = {}
    for vid, va, vtrips in _ev_trips(trips, assignment):
        cap = va.battery_capacity_kwh
        energies = [trip_energy(t, va.range_class, rates, hot_weather) for t in vtrips]
        for t, e in zip(vtrips, energies):
            if e > cap:
                bad[vid] = (t.trip_id, e, cap)
                break
        if vid in bad:
            continue
        miles = math.fsum(t.distance_miles for t in vtrips)
        kwh_per_mile = math.fsum(energies) / miles
        threshold = float(vehicle_rng(seed, vid).uniform(params.anxiety_low_miles,
                                                         params.anxiety_high_miles))
        soc = cap
        lowest = cap
        for k, (t, e) in enumerate(zip(vtrips, energies)):
            soc -= e
            lowest = min(lowest, soc)
            if k + 1 < len(vtrips):
                need = energies[k + 1] + threshold * kwh_per_mile
                if soc < need:
                    target = min(cap, need)
                    events.append(ChargingEvent(vid, t.end_node, t.end_time, target - soc,
                                                params.public_charger_kw, public=True))
                    soc = target
        if soc < cap:
            last = vtrips[-1]
            events.append(ChargingEvent(vid, last.end_node, last.end_time, cap - soc,
                                        params.home_charger_kw))
        min_soc[vid] = lowest
    if bad:
        raise ChargingInfeasibleError(bad)
    prof = NodeChargingProfile()
    for ev in events:
        for h, kwh in ev.hourly_energy():
            prof.add(ev.node, h, kwh)
    return MostLikelyRun(events, min_soc, prof)


def most_likely_profile(trips: Sequence[TripRecord], assignment: EvAssignment,
                        rates: EnergyRateTable, params: BehaviorParams | None = None,
                        hot_weather: bool = False, seed: int = 0) -> NodeChargingProfile:
    return simulate_most_likely(trips, assignment, rates, params, hot_weather, seed).profile


def build_profile(strategy: str, trips: Sequence[TripRecord], assignment: EvAssignment,
                  rates: EnergyRateTable, params: BehaviorParams | None = None,
                  hot_weather: bool = False, seed: int = 0) -> NodeChargingProfile:
    if strategy == "trip-end":
        return trip_end_profile(trips, assignment, rates, hot_weather)
    if strategy == "off-peak":
        return off_peak_profile(trip_end_profile(trips, assignment, rates, hot_weather), params)
    if strategy == "most-likely":
        return most_likely_profile(trips, assignment, rates, params, hot_weather, seed)
    raise ChargingError(f"unknown charging strategy {strategy!r}; expected one of {STRATEGIES}")


def profile_to_mw(profile: NodeChargingProfile) -> dict[tuple[int, int], float]:
    """kWh delivered within an hour, as the average MW over that hour."""
    return {k: v / 1000.0 for k, v in profile.sorted_items()}


PROFILE_COLUMNS = ["node", "hour", "kwh"]


def write_profile_csv(profile: NodeChargingProfile, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PROFILE_COLUMNS)
        for (node, hour), kwh in profile.sorted_items():
            w.writerow([node, hour, repr(kwh)])


def read_profile_csv(path) -> NodeChargingProfile:
    prof = NodeChargingProfile()
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != PROFILE_COLUMNS:
            raise ChargingError(f"{path}: expected columns {PROFILE_COLUMNS}")
        for i, row in enumerate(reader):
            try:
                node, hour, kwh = int(row["node"]), int(row["hour"]), float(row["kwh"])
            except ValueError:
                raise ChargingError(f"{path}: row {i + 2}: bad value") from None
            if not 0 <= hour < 24:
                raise ChargingError(f"{path}: row {i + 2}: hour {hour} outside 0-23")
            prof.add(node, hour, kwh)
    return prof
