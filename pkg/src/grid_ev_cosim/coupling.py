"""Map transport nodes to substations and add EV charging to the static bus load."""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .charging import NodeChargingProfile, profile_to_mw
from .grid_core import HOURS, GridCase
from .opf import HourlyDemand

EARTH_RADIUS_KM = 6371.0


class CouplingError(ValueError):
    pass


@dataclass(frozen=True)
class ServiceAreaMap:
    node_to_bus: Mapping[int, int]

    def bus_of(self, node: int) -> int:
        try:
            return self.node_to_bus[node]
        except KeyError:
            raise CouplingError(f"transport node {node} is not mapped to any substation") from None

    def validate(self, case: GridCase) -> None:
        subs = set(case.substation_ids)
        for node, bus in self.node_to_bus.items():
            if bus not in subs:
                raise CouplingError(f"node {node} mapped to bus {bus}, which is not a substation "
                                    f"of case {case.label!r}")


def equirectangular_km(lat1, lon1, lat2, lon2):
    """Planar distance approximation, adequate over a metro region."""
    lat1, lon1, lat2, lon2 = (np.asarray(v, dtype=float) for v in (lat1, lon1, lat2, lon2))
    # differences in degrees first so mirror-image points tie exactly
    x = np.radians(lon2 - lon1) * np.cos(np.radians((lat1 + lat2) / 2))
    y = np.radians(lat2 - lat1)
    return EARTH_RADIUS_KM * np.hypot(x, y)


def build_service_areas(case: GridCase, node_coords: Mapping[int, tuple[float, float]]
                        ) -> ServiceAreaMap:
    """Assign every node to its nearest substation; ties go to the lower bus id."""
    subs = sorted((b for b in case.buses if b.is_substation), key=lambda b: b.id)
    if not subs:
        raise CouplingError(f"case {case.label!r} has no substation buses")
    sid = np.array([b.id for b in subs])
    slat = np.array([b.latitude for b in subs])
    slon = np.array([b.longitude for b in subs])
    out = {}
    for node in sorted(node_coords):
        lat, lon = node_coords[node]
        if not (math.isfinite(lat) and math.isfinite(lon)):
            raise CouplingError(f"transport node {node} has non-finite coordinates")
        d = equirectangular_km(lat, lon, slat, slon)
        out[node] = int(sid[int(np.argmin(d))])  # argmin returns the first (lowest id) tie
    return ServiceAreaMap(out)


OVERRIDE_COLUMNS = ["node_id", "bus_id"]


def read_service_area_override(path, case: GridCase | None = None) -> ServiceAreaMap:
    out = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != OVERRIDE_COLUMNS:
            raise CouplingError(f"{path}: expected columns {OVERRIDE_COLUMNS}")
        for i, row in enumerate(reader):
            node, bus = int(row["node_id"]), int(row["bus_id"])
            if node in out:
                raise CouplingError(f"{path}: node {node} mapped twice")
            out[node] = bus
    areas = ServiceAreaMap(dict(sorted(out.items())))
    if case is not None:
        areas.validate(case)
    return areas


def write_service_areas(areas: ServiceAreaMap, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(OVERRIDE_COLUMNS)
        for node in sorted(areas.node_to_bus):
            w.writerow([node, areas.node_to_bus[node]])


def aggregate_ev_load(profile: NodeChargingProfile, areas: ServiceAreaMap, scale: float = 1.0
                      ) -> dict[tuple[int, int], float]:
    """Per-(bus, hour) EV MW: sum of the node MW in each service area.

    ``scale`` multiplies every value; it lets each simulated vehicle stand for
    several real ones.
    """
    parts: dict[tuple[int, int], list[float]] = defaultdict(list)
    for (node, hour), mw in profile_to_mw(profile).items():
        parts[(areas.bus_of(node), hour)].append(mw)
    return {k: math.fsum(v) * scale for k, v in sorted(parts.items())}


def superpose_demand(case: GridCase, ev_load: Mapping[tuple[int, int], float] | None = None
                     ) -> list[HourlyDemand]:
    """Static load plus EV load for each of the 24 hours."""
    ev_load = ev_load or {}
    buses = set(case.bus_ids)
    for (bus, hour), mw in ev_load.items():
        if bus not in buses:
            raise CouplingError(f"EV load at unknown bus {bus}")
        if not 0 <= hour < HOURS:
            raise CouplingError(f"EV load at invalid hour {hour}")
        if not mw >= 0:
            raise CouplingError(f"EV load at bus {bus} hour {hour} must be >= 0")
    out = []
    for h in range(HOURS):
        loads = case.static_load_by_bus(h)
        for (bus, hour), mw in ev_load.items():
            if hour == h and mw:
                loads[bus] = loads.get(bus, 0.0) + mw
        out.append(HourlyDemand(h, dict(sorted(loads.items()))))
    return out


def hourly_mw(ev_load: Mapping[tuple[int, int], float]) -> list[float]:
    per = [[] for _ in range(HOURS)]
    for (_, h), v in ev_load.items():
        per[h].append(v)
    return [math.fsum(p) for p in per]
