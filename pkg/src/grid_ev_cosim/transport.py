"""Vehicle trips, EV assignment, and per-trip electrical energy."""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

MAX_SPEED_MPH = 90.0
SPEED_BIN_MPH = 5
SPEED_BINS = tuple(range(0, int(MAX_SPEED_MPH), SPEED_BIN_MPH))  # lower edges 0..85


class TripError(ValueError):
    pass


class VehicleClass(str, Enum):
    LDV = "LDV"
    HDV = "HDV"


class RangeClass(str, Enum):
    R100 = "R100"
    R200 = "R200"
    R300 = "R300"


DEFAULT_BATTERY_KWH = {RangeClass.R100: 24.0, RangeClass.R200: 60.0, RangeClass.R300: 90.0}
# fleet shares of 100/200/300-mile BEVs; the 10% residual is renormalized away
DEFAULT_RANGE_SHARES = {RangeClass.R100: 0.25, RangeClass.R200: 0.13, RangeClass.R300: 0.52}


def speed_bin(speed_mph: float) -> int:
    """Lower edge of the 5-mph bin holding ``speed_mph`` (90 mph falls in the top bin)."""
    if not 0 < speed_mph <= MAX_SPEED_MPH:
        raise TripError(f"speed {speed_mph} mph outside (0, {MAX_SPEED_MPH}]")
    return min(int(speed_mph // SPEED_BIN_MPH) * SPEED_BIN_MPH, SPEED_BINS[-1])


@dataclass(frozen=True)
class LinkTraversal:
    link_id: int
    node_from: int
    node_to: int
    length_miles: float
    avg_speed_mph: float
    enter_time: float  # minutes from midnight

    @property
    def duration_h(self) -> float:
        return self.length_miles / self.avg_speed_mph


@dataclass(frozen=True)
class TripRecord:
    trip_id: int
    vehicle_id: int
    vehicle_class: VehicleClass
    links: tuple[LinkTraversal, ...]
    end_node: int
    ends_at_home: bool = False

    def __post_init__(self):
        validate_trip(self)

    @property
    def start_time(self) -> float:
        return self.links[0].enter_time

    @property
    def end_time(self) -> float:
        """Arrival in minutes from midnight; may exceed 1440 for trips crossing midnight."""
        last = self.links[-1]
        return last.enter_time + 60.0 * last.duration_h

    @property
    def end_hour(self) -> int:
        return int(self.end_time // 60) % 24

    @property
    def distance_miles(self) -> float:
        return math.fsum(ln.length_miles for ln in self.links)

    @property
    def duration_h(self) -> float:
        return math.fsum(ln.duration_h for ln in self.links)

    @property
    def start_node(self) -> int:
        return self.links[0].node_from


def validate_trip(t: TripRecord) -> None:
    if not t.links:
        raise TripError(f"trip {t.trip_id}: no links")
    for k, ln in enumerate(t.links):
        if not ln.length_miles > 0:
            raise TripError(f"trip {t.trip_id}: link {k} length must be > 0")
        if not 0 < ln.avg_speed_mph <= MAX_SPEED_MPH:
            raise TripError(f"trip {t.trip_id}: link {k} speed {ln.avg_speed_mph} outside (0, 90]")
        if not 0 <= ln.enter_time < 1440:
            raise TripError(f"trip {t.trip_id}: link {k} enter_time {ln.enter_time} outside [0, 1440)")
        if k and t.links[k - 1].node_to != ln.node_from:
            raise TripError(f"trip {t.trip_id}: disconnected link sequence at link {k} "
                            f"({t.links[k - 1].node_to} -> {ln.node_from})")
    if t.end_node != t.links[-1].node_to:
        raise TripError(f"trip {t.trip_id}: end_node {t.end_node} != final node {t.links[-1].node_to}")


def trips_by_vehicle(trips: Iterable[TripRecord]) -> dict[int, list[TripRecord]]:
    out: dict[int, list[TripRecord]] = defaultdict(list)
    for t in trips:
        out[t.vehicle_id].append(t)
    for v in out.values():
        v.sort(key=lambda t: (t.start_time, t.trip_id))
    return dict(sorted(out.items()))


# --------------------------------------------------------------------------
# energy rates

@dataclass(frozen=True)
class EnergyRateTable:
    rates: Mapping[tuple[RangeClass, int], float]  # (class, bin low mph) -> kWh/mile
    ac_aux_kw: float = 3.0

    def __post_init__(self):
        for cls in RangeClass:
            for b in SPEED_BINS:
                r = self.rates.get((cls, b))
                if r is None:
                    raise TripError(f"energy rate table missing ({cls.value}, {b} mph)")
                if not r > 0:
                    raise TripError(f"energy rate ({cls.value}, {b} mph) must be > 0")
        if self.ac_aux_kw < 0:
            raise TripError("ac_aux_kw must be >= 0")

    def rate(self, cls: RangeClass, speed_mph: float) -> float:
        return self.rates[(cls, speed_bin(speed_mph))]


def default_energy_rates(ac_aux_kw: float = 3.0) -> EnergyRateTable:
    """Placeholder U-shaped kWh/mile curves with minima near 40 mph."""
    minima = {RangeClass.R100: 0.28, RangeClass.R200: 0.30, RangeClass.R300: 0.33}
    rates = {}
    for cls, m in minima.items():
        for b in SPEED_BINS:
            v = b + SPEED_BIN_MPH / 2
            rates[(cls, b)] = round(m * (1 + 0.6 * ((v - 40.0) / 40.0) ** 2), 4)
    return EnergyRateTable(rates, ac_aux_kw)


ENERGY_RATE_COLUMNS = ["range_class", "speed_bin_low_mph", "kwh_per_mile"]


def read_energy_rates(path, ac_aux_kw: float = 3.0) -> EnergyRateTable:
    rates = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ENERGY_RATE_COLUMNS:
            raise TripError(f"{path}: expected columns {ENERGY_RATE_COLUMNS}")
        for i, row in enumerate(reader):
            try:
                rates[(RangeClass(row["range_class"]), int(row["speed_bin_low_mph"]))] = \
                    float(row["kwh_per_mile"])
            except ValueError as exc:
                raise TripError(f"{path}: row {i + 1}: {exc}") from None
    return EnergyRateTable(rates, ac_aux_kw)


def write_energy_rates(table: EnergyRateTable, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ENERGY_RATE_COLUMNS)
        for cls in RangeClass:
            for b in SPEED_BINS:
                w.writerow([cls.value, b, repr(table.rates[(cls, b)])])


def trip_energy(trip: TripRecord, cls: RangeClass, rates: EnergyRateTable,
                hot_weather: bool = False) -> float:
    """Battery energy (kWh) used by ``trip`` for a vehicle of range class ``cls``.

    Link energy is length times the speed-binned rate; hot weather adds the
    air-conditioning draw over the driving time.
    """
    kwh = 0.0
    for ln in trip.links:
        kwh += ln.length_miles * rates.rate(cls, ln.avg_speed_mph)
    if hot_weather:
        kwh += rates.ac_aux_kw * trip.duration_h
    return kwh


# --------------------------------------------------------------------------
# EV assignment

@dataclass(frozen=True)
class VehicleAssignment:
    is_ev: bool
    range_class: RangeClass | None = None
    battery_capacity_kwh: float = 0.0


@dataclass(frozen=True)
class EvAssignment:
    vehicles: Mapping[int, VehicleAssignment]
    penetration: float
    seed: int

    def is_ev(self, vehicle_id: int) -> bool:
        v = self.vehicles.get(vehicle_id)
        return v is not None and v.is_ev

    @property
    def ev_ids(self) -> list[int]:
        return sorted(vid for vid, v in self.vehicles.items() if v.is_ev)


def normalized_shares(shares: Mapping[RangeClass, float]) -> dict[RangeClass, float]:
    if any(v < 0 for v in shares.values()):
        raise TripError("range shares must be non-negative")
    total = math.fsum(shares.values())
    if total > 1 + 1e-12:
        raise TripError(f"range shares sum to {total} > 1")
    if total <= 0:
        raise TripError("range shares are all zero")
    return {cls: shares.get(cls, 0.0) / total for cls in RangeClass}


def assign_evs(trips: Sequence[TripRecord], penetration: float,
               range_shares: Mapping[RangeClass, float] | None = None, seed: int = 0,
               battery_kwh: Mapping[RangeClass, float] | None = None) -> EvAssignment:
    """Mark ``round(penetration * n_LDV)`` light-duty vehicles as BEVs.

    Every LDV gets one uniform draw; the EVs are the vehicles with the smallest
    draws, so the EV set at a lower penetration is always a subset of the set at
    a higher one (same seed). A second independent draw picks the range class.
    HDVs are never electrified.
    """
    if not 0 <= penetration <= 1:
        raise TripError(f"penetration {penetration} outside [0, 1]")
    shares = normalized_shares(range_shares or DEFAULT_RANGE_SHARES)
    caps = dict(DEFAULT_BATTERY_KWH)
    if battery_kwh:
        caps.update(battery_kwh)
    if not caps[RangeClass.R100] < caps[RangeClass.R200] < caps[RangeClass.R300]:
        raise TripError("battery capacities must increase R100 < R200 < R300")

    classes: dict[int, VehicleClass] = {}
    for t in trips:
        classes.setdefault(t.vehicle_id, t.vehicle_class)
    ldv = sorted(v for v, c in classes.items() if c is VehicleClass.LDV)
    rng = np.random.default_rng(seed)
    order_draw = rng.random(len(ldv))
    class_draw = rng.random(len(ldv))
    n_ev = int(math.floor(penetration * len(ldv) + 0.5))
    ev_idx = set(np.argsort(order_draw, kind="stable")[:n_ev].tolist())

    order = list(RangeClass)
    cum = np.cumsum([shares[c] for c in order])
    out: dict[int, VehicleAssignment] = {}
    for i, vid in enumerate(ldv):
        if i in ev_idx:
            k = min(int(np.searchsorted(cum, class_draw[i], side="right")), len(order) - 1)
            while shares[order[k]] == 0:  # guard against draws landing on an empty tail
                k -= 1
            out[vid] = VehicleAssignment(True, order[k], caps[order[k]])
        else:
            out[vid] = VehicleAssignment(False)
    for vid, c in classes.items():
        if c is VehicleClass.HDV:
            out[vid] = VehicleAssignment(False)
    return EvAssignment(dict(sorted(out.items())), penetration, seed)


# --------------------------------------------------------------------------
# trips CSV

TRIP_COLUMNS = ["trip_id", "vehicle_id", "vehicle_class", "link_seq", "link_id", "node_from",
                "node_to", "length_miles", "avg_speed_mph", "enter_time_min", "ends_at_home"]


def _sort_trips(trips: Iterable[TripRecord]) -> list[TripRecord]:
    return sorted(trips, key=lambda t: (t.vehicle_id, t.start_time, t.trip_id))


def parse_trips(path) -> list[TripRecord]:
    """Read the one-row-per-link trips CSV into validated TripRecords."""
    grouped: dict[int, list[tuple[int, dict]]] = defaultdict(list)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return []
        missing = [c for c in TRIP_COLUMNS if c not in reader.fieldnames]
        if missing:
            raise TripError(f"{path}: missing columns {missing}")
        for i, row in enumerate(reader):
            try:
                grouped[int(row["trip_id"])].append((int(row["link_seq"]), row))
            except ValueError:
                raise TripError(f"{path}: row {i + 2}: bad trip_id/link_seq") from None
    trips = []
    for trip_id, rows in grouped.items():
        rows.sort(key=lambda r: r[0])
        first = rows[0][1]
        try:
            links = tuple(LinkTraversal(int(r["link_id"]), int(r["node_from"]), int(r["node_to"]),
                                        float(r["length_miles"]), float(r["avg_speed_mph"]),
                                        float(r["enter_time_min"]))
                          for _, r in rows)
            vclass = VehicleClass(first["vehicle_class"])
            home = first["ends_at_home"].strip().lower() in ("1", "true", "yes")
            vehicle_id = int(first["vehicle_id"])
        except ValueError as exc:
            raise TripError(f"{path}: trip {trip_id}: {exc}") from None
        trips.append(TripRecord(trip_id, vehicle_id, vclass, links, links[-1].node_to, home))
    return _sort_trips(trips)


def write_trips(trips: Iterable[TripRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRIP_COLUMNS)
        for t in trips:
            for k, ln in enumerate(t.links):
                w.writerow([t.trip_id, t.vehicle_id, t.vehicle_class.value, k, ln.link_id,
                            ln.node_from, ln.node_to, repr(ln.length_miles), repr(ln.avg_speed_mph),
                            repr(ln.enter_time), int(t.ends_at_home)])


NODE_COLUMNS = ["node_id", "latitude", "longitude"]


def read_nodes(path) -> dict[int, tuple[float, float]]:
    out = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != NODE_COLUMNS:
            raise TripError(f"{path}: expected columns {NODE_COLUMNS}")
        for row in reader:
            out[int(row["node_id"])] = (float(row["latitude"]), float(row["longitude"]))
    return out


def write_nodes(nodes: Mapping[int, tuple[float, float]], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(NODE_COLUMNS)
        for nid in sorted(nodes):
            lat, lon = nodes[nid]
            w.writerow([nid, repr(lat), repr(lon)])


# --------------------------------------------------------------------------
# synthetic trips

@dataclass
class TripGenParams:
    hdv_share: float = 0.08
    median_daily_miles: float = 30.0
    daily_miles_sigma: float = 0.5
    max_trip_miles: float = 30.0
    evening_outing_prob: float = 0.55
    speed_range_mph: tuple[float, float] = (18.0, 68.0)


def generate_synthetic_nodes(n_nodes: int, seed: int,
                             bbox: tuple[float, float, float, float] = (30.02, 30.52, -97.99, -97.49)
                             ) -> dict[int, tuple[float, float]]:
    """Random transport node coordinates inside ``(lat_min, lat_max, lon_min, lon_max)``."""
    if n_nodes < 1:
        raise TripError("n_nodes must be >= 1")
    rng = np.random.default_rng([seed, 7])
    lat = rng.uniform(bbox[0], bbox[1], n_nodes)
    lon = rng.uniform(bbox[2], bbox[3], n_nodes)
    return {i + 1: (round(float(lat[i]), 6), round(float(lon[i]), 6)) for i in range(n_nodes)}


def _pick_other(rng, n_nodes: int, avoid: int) -> int:
    if n_nodes == 1:
        return 1
    k = int(rng.integers(1, n_nodes))
    return k if k < avoid else k + 1


def generate_synthetic_trips(n_vehicles: int, n_nodes: int, seed: int,
                             params: TripGenParams | None = None) -> list[TripRecord]:
    """Home-based daily tours standing in for traffic-assignment trajectories.

    Each vehicle leaves home in the morning, visits one or more stops, returns
    home, and may make an evening outing. Daily distance is lognormal with the
    configured median; it is split across enough trips that none exceeds
    roughly ``max_trip_miles``.
    """
    if n_vehicles < 1 or n_nodes < 1:
        raise TripError("n_vehicles and n_nodes must be >= 1")
    p = params or TripGenParams()
    rng = np.random.default_rng(seed)
    trips: list[TripRecord] = []
    trip_id = 1
    v_lo, v_hi = p.speed_range_mph
    for vid in range(1, n_vehicles + 1):
        vclass = VehicleClass.HDV if rng.random() < p.hdv_share else VehicleClass.LDV
        home = int(rng.integers(1, n_nodes + 1))
        daily = float(rng.lognormal(math.log(p.median_daily_miles), p.daily_miles_sigma))
        daily = min(max(daily, 1.0), 8 * p.max_trip_miles)
        evening = rng.random() < p.evening_outing_prob
        n_trips = max(2 + int(rng.integers(0, 2)), math.ceil(daily / p.max_trip_miles))
        if evening:
            n_trips += 2
        weights = 1.0 + 0.5 * rng.random(n_trips)
        dists = daily * weights / weights.sum()

        # node sequence of the tour: home -> stops -> home [-> outing -> home]
        seq = [home]
        day_trips = n_trips - 2 if evening else n_trips
        for k in range(day_trips - 1):
            seq.append(_pick_other(rng, n_nodes, seq[-1]))
        seq.append(home)
        if evening:
            seq.append(_pick_other(rng, n_nodes, home))
            seq.append(home)

        t = float(np.clip(rng.normal(7.5 * 60, 60), 5 * 60, 10 * 60))
        vehicle_trips = []
        for k in range(n_trips):
            a, b = seq[k], seq[k + 1]
            n_links = int(rng.integers(1, 4))
            path = [a]
            for _ in range(n_links - 1):
                path.append(_pick_other(rng, n_nodes, path[-1]))
            if n_nodes > 1 and path[-1] == b:
                if len(path) > 1:
                    path.pop()
                else:
                    path.append(_pick_other(rng, n_nodes, a))
            path.append(b)
            split = rng.dirichlet(np.full(len(path) - 1, 4.0)) * dists[k]
            links = []
            for i in range(len(path) - 1):
                peak = 7 * 60 <= t % 1440 < 9 * 60 or 16 * 60 <= t % 1440 < 19 * 60
                speed = float(rng.uniform(v_lo, v_hi)) * (0.7 if peak else 1.0)
                length = max(float(split[i]), 0.05)
                links.append([path[i] * n_nodes + path[i + 1], path[i], path[i + 1], length, speed, t])
                t += 60.0 * length / speed
            vehicle_trips.append((links, b == home and k in (day_trips - 1, n_trips - 1)))
            # dwell before the next trip
            if k == 0:
                t += float(rng.uniform(6.5, 9.5)) * 60
            elif evening and k == day_trips - 1:
                t = max(t + 30, float(rng.normal(20.5 * 60, 45)))
            else:
                t += float(rng.uniform(0.3, 2.0)) * 60
        # keep the whole tour inside the day
        last_links = vehicle_trips[-1][0]
        end = last_links[-1][5] + 60.0 * last_links[-1][3] / last_links[-1][4]
        shift = max(0.0, end - 1439.0)
        for links, at_home in vehicle_trips:
            lt = tuple(LinkTraversal(int(l[0]), int(l[1]), int(l[2]), round(l[3], 4),
                                     round(min(l[4], MAX_SPEED_MPH), 3),
                                     round(max(l[5] - shift, 0.0), 3))
                       for l in links)
            trips.append(TripRecord(trip_id, vid, vclass, lt, lt[-1].node_to, at_home))
            trip_id += 1
    return _sort_trips(trips)
