"""Transmission grid case: typed data model, JSON case files, synthetic cases."""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

HOURS = 24


class GridCaseError(ValueError):
    """Raised when a grid case is malformed or violates an invariant."""


class FuelType(str, Enum):
    COAL = "coal"
    NATURAL_GAS = "natural_gas"
    WIND = "wind"
    SOLAR = "solar"
    NUCLEAR = "nuclear"
    STORAGE = "storage"
    OTHER = "other"


CARBON_FREE = frozenset({FuelType.WIND, FuelType.SOLAR, FuelType.NUCLEAR, FuelType.STORAGE})


@dataclass(frozen=True)
class Bus:
    id: int
    name: str
    latitude: float
    longitude: float
    is_substation: bool = True


@dataclass(frozen=True)
class TransmissionLine:
    id: int
    from_bus: int
    to_bus: int
    susceptance: float  # per unit on the case base
    flow_limit_mw: float = math.inf


@dataclass(frozen=True)
class Generator:
    id: int
    bus_id: int
    fuel: FuelType
    p_min_mw: float
    p_max_mw: float
    # (upper breakpoint MW, marginal cost $/MWh) per segment, segments start at 0 MW
    cost_curve: tuple[tuple[float, float], ...]
    availability: tuple[float, ...] = (1.0,) * HOURS

    def segments(self, hour: int) -> list[tuple[float, float, float]]:
        """Return ``(lower_mw, upper_mw, marginal_cost)`` bounds for each cost segment.

        The hourly availability scales both output limits; the lowest segments
        are forced on up to the scaled minimum output.
        """
        a = self.availability[hour]
        p_hi = self.p_max_mw * a
        p_lo = self.p_min_mw * a
        out = []
        start = 0.0
        for bp, cost in self.cost_curve:
            end = min(bp, p_hi)
            width = max(end - start, 0.0)
            lo = min(max(p_lo - start, 0.0), width)
            out.append((lo, width, cost))
            start = max(start, bp)
        return out

    def cost(self, p_mw: float) -> float:
        """Dispatch cost in $ for one hour at output ``p_mw``."""
        total = 0.0
        start = 0.0
        for bp, c in self.cost_curve:
            if p_mw <= start:
                break
            total += (min(p_mw, bp) - start) * c
            start = bp
        return total


@dataclass(frozen=True)
class StorageUnit:
    id: int
    bus_id: int
    power_limit_mw: float
    energy_capacity_mwh: float
    round_trip_efficiency: float
    initial_soc_mwh: float


@dataclass(frozen=True)
class StaticLoadSeries:
    bus_id: int
    hourly_load_mw: tuple[float, ...]


@dataclass(frozen=True)
class GridCase:
    buses: tuple[Bus, ...]
    lines: tuple[TransmissionLine, ...]
    generators: tuple[Generator, ...]
    storage_units: tuple[StorageUnit, ...] = ()
    static_loads: tuple[StaticLoadSeries, ...] = ()
    base_mva: float = 100.0
    label: str = ""
    # applied lazily to static loads so repeated scaling composes exactly
    load_scale: float = 1.0

    def __post_init__(self):
        validate_case(self)

    @property
    def bus_ids(self) -> list[int]:
        return [b.id for b in self.buses]

    @property
    def substation_ids(self) -> list[int]:
        return sorted(b.id for b in self.buses if b.is_substation)

    def static_load(self, bus_id: int, hour: int) -> float:
        total = 0.0
        for s in self.static_loads:
            if s.bus_id == bus_id:
                total += s.hourly_load_mw[hour] * self.load_scale
        return total

    def static_load_by_bus(self, hour: int) -> dict[int, float]:
        out = {b.id: 0.0 for b in self.buses}
        for s in self.static_loads:
            out[s.bus_id] += s.hourly_load_mw[hour] * self.load_scale
        return out

    def hourly_total_load(self) -> list[float]:
        return [math.fsum(self.static_load_by_bus(h).values()) for h in range(HOURS)]

    def generator(self, gen_id: int) -> Generator:
        for g in self.generators:
            if g.id == gen_id:
                return g
        raise KeyError(gen_id)

    @property
    def total_capacity_mw(self) -> float:
        return math.fsum(g.p_max_mw for g in self.generators)

    def capacity_by_fuel(self) -> dict[FuelType, float]:
        out: dict[FuelType, float] = {}
        for g in self.generators:
            out[g.fuel] = out.get(g.fuel, 0.0) + g.p_max_mw
        for s in self.storage_units:
            out[FuelType.STORAGE] = out.get(FuelType.STORAGE, 0.0) + s.power_limit_mw
        return out


def _check(cond: bool, msg: str) -> None:
    if not cond:
        raise GridCaseError(msg)


def validate_case(case: GridCase) -> None:
    """Check every GridCase invariant, raising GridCaseError naming the entity."""
    ids = [b.id for b in case.buses]
    _check(len(ids) > 0, "case has no buses")
    _check(len(set(ids)) == len(ids), "duplicate bus ids")
    for b in case.buses:
        _check(math.isfinite(b.latitude) and math.isfinite(b.longitude),
               f"bus {b.id}: non-finite coordinates")
    known = set(ids)
    _check(case.base_mva > 0, "base_mva must be positive")
    _check(case.load_scale > 0, "load_scale must be positive")

    line_ids = [ln.id for ln in case.lines]
    _check(len(set(line_ids)) == len(line_ids), "duplicate line ids")
    for ln in case.lines:
        for end in (ln.from_bus, ln.to_bus):
            _check(end in known, f"line {ln.id}: references unknown bus {end}")
        _check(ln.from_bus != ln.to_bus, f"line {ln.id}: from_bus equals to_bus")
        _check(ln.susceptance > 0, f"line {ln.id}: susceptance must be > 0")
        _check(ln.flow_limit_mw > 0, f"line {ln.id}: flow_limit_mw must be > 0")

    gen_ids = [g.id for g in case.generators]
    _check(len(set(gen_ids)) == len(gen_ids), "duplicate generator ids")
    for g in case.generators:
        _check(g.bus_id in known, f"generator {g.id}: references unknown bus {g.bus_id}")
        _check(isinstance(g.fuel, FuelType), f"generator {g.id}: bad fuel {g.fuel!r}")
        _check(g.fuel is not FuelType.STORAGE,
               f"generator {g.id}: storage belongs in storage units")
        _check(0 <= g.p_min_mw <= g.p_max_mw,
               f"generator {g.id}: need 0 <= p_min_mw <= p_max_mw")
        _check(len(g.cost_curve) > 0, f"generator {g.id}: empty cost_curve")
        prev_bp, prev_c = 0.0, -math.inf
        for bp, c in g.cost_curve:
            _check(bp > prev_bp, f"generator {g.id}: cost_curve breakpoints must increase")
            _check(c >= prev_c, f"generator {g.id}: cost_curve marginal costs must not decrease")
            _check(math.isfinite(c), f"generator {g.id}: non-finite marginal cost")
            prev_bp, prev_c = bp, c
        _check(g.cost_curve[-1][0] >= g.p_max_mw,
               f"generator {g.id}: cost_curve must extend to p_max_mw")
        _check(len(g.availability) == HOURS,
               f"generator {g.id}: availability needs {HOURS} values")
        _check(all(0.0 <= a <= 1.0 for a in g.availability),
               f"generator {g.id}: availability values must lie in [0, 1]")

    st_ids = [s.id for s in case.storage_units]
    _check(len(set(st_ids)) == len(st_ids), "duplicate storage ids")
    for s in case.storage_units:
        _check(s.bus_id in known, f"storage {s.id}: references unknown bus {s.bus_id}")
        _check(s.power_limit_mw > 0, f"storage {s.id}: power_limit_mw must be > 0")
        _check(s.energy_capacity_mwh >= 0, f"storage {s.id}: negative energy capacity")
        _check(0 < s.round_trip_efficiency <= 1,
               f"storage {s.id}: round_trip_efficiency must lie in (0, 1]")
        _check(0 <= s.initial_soc_mwh <= s.energy_capacity_mwh,
               f"storage {s.id}: initial_soc_mwh outside [0, energy_capacity_mwh]")

    for s in case.static_loads:
        _check(s.bus_id in known, f"static load: references unknown bus {s.bus_id}")
        _check(len(s.hourly_load_mw) == HOURS,
               f"static load at bus {s.bus_id}: needs exactly {HOURS} values")
        _check(all(v >= 0 and math.isfinite(v) for v in s.hourly_load_mw),
               f"static load at bus {s.bus_id}: values must be finite and >= 0")

    _check(_is_connected(ids, case.lines), "network is not a single connected island")
    peak = max(case.hourly_total_load()) if case.static_loads else 0.0
    _check(case.total_capacity_mw >= peak,
           f"case not servable: capacity {case.total_capacity_mw:.3f} MW < peak load {peak:.3f} MW")


def _is_connected(ids: Sequence[int], lines: Iterable[TransmissionLine]) -> bool:
    adj: dict[int, list[int]] = {i: [] for i in ids}
    for ln in lines:
        adj[ln.from_bus].append(ln.to_bus)
        adj[ln.to_bus].append(ln.from_bus)
    seen = {ids[0]}
    todo = deque([ids[0]])
    while todo:
        for nb in adj[todo.popleft()]:
            if nb not in seen:
                seen.add(nb)
                todo.append(nb)
    return len(seen) == len(ids)


# --------------------------------------------------------------------------
# case files

_FIELDS = {
    "buses": ("id", "name", "latitude", "longitude", "is_substation"),
    "lines": ("id", "from_bus", "to_bus", "susceptance", "flow_limit_mw"),
    "generators": ("id", "bus_id", "fuel", "p_min_mw", "p_max_mw", "cost_curve", "availability"),
    "storage": ("id", "bus_id", "power_limit_mw", "energy_capacity_mwh",
                "round_trip_efficiency", "initial_soc_mwh"),
    "static_loads": ("bus_id", "hourly_load_mw"),
}
_OPTIONAL = {"lines": {"flow_limit_mw"}, "generators": {"availability"},
             "buses": {"is_substation"}}


def _require(obj: Mapping, section: str, idx: int) -> None:
    if not isinstance(obj, Mapping):
        raise GridCaseError(f"{section}[{idx}]: expected an object")
    for name in _FIELDS[section]:
        if name not in obj and name not in _OPTIONAL.get(section, ()):
            raise GridCaseError(f"{section}[{idx}]: missing field '{name}'")


def _num(obj: Mapping, key: str, section: str, idx: int) -> float:
    try:
        return float(obj[key])
    except (TypeError, ValueError):
        raise GridCaseError(f"{section}[{idx}]: field '{key}' must be a number") from None


def case_from_dict(data: Mapping) -> GridCase:
    """Build a validated GridCase from the decoded JSON object."""
    if not isinstance(data, Mapping):
        raise GridCaseError("case file must hold a JSON object")
    for key in ("buses", "lines", "generators", "storage", "static_loads", "base_mva", "label"):
        if key not in data:
            raise GridCaseError(f"missing top-level field '{key}'")
    buses = []
    for i, b in enumerate(data["buses"]):
        _require(b, "buses", i)
        buses.append(Bus(int(b["id"]), str(b["name"]), _num(b, "latitude", "buses", i),
                         _num(b, "longitude", "buses", i), bool(b.get("is_substation", True))))
    lines = []
    for i, ln in enumerate(data["lines"]):
        _require(ln, "lines", i)
        limit = ln.get("flow_limit_mw")
        lines.append(TransmissionLine(
            int(ln["id"]), int(ln["from_bus"]), int(ln["to_bus"]),
            _num(ln, "susceptance", "lines", i),
            math.inf if limit is None else _num(ln, "flow_limit_mw", "lines", i)))
    gens = []
    for i, g in enumerate(data["generators"]):
        _require(g, "generators", i)
        try:
            fuel = FuelType(g["fuel"])
        except ValueError:
            raise GridCaseError(f"generators[{i}]: unknown fuel {g['fuel']!r}") from None
        try:
            curve = tuple((float(bp), float(c)) for bp, c in g["cost_curve"])
        except (TypeError, ValueError):
            raise GridCaseError(f"generators[{i}]: cost_curve must be [[mw, $/MWh], ...]") from None
        avail = g.get("availability")
        avail = (1.0,) * HOURS if avail is None else tuple(float(a) for a in avail)
        gens.append(Generator(int(g["id"]), int(g["bus_id"]), fuel,
                              _num(g, "p_min_mw", "generators", i),
                              _num(g, "p_max_mw", "generators", i), curve, avail))
    storage = []
    for i, s in enumerate(data["storage"]):
        _require(s, "storage", i)
        storage.append(StorageUnit(int(s["id"]), int(s["bus_id"]),
                                   *(_num(s, k, "storage", i) for k in _FIELDS["storage"][2:])))
    loads = []
    for i, s in enumerate(data["static_loads"]):
        _require(s, "static_loads", i)
        loads.append(StaticLoadSeries(int(s["bus_id"]),
                                      tuple(float(v) for v in s["hourly_load_mw"])))
    try:
        base = float(data["base_mva"])
    except (TypeError, ValueError):
        raise GridCaseError("field 'base_mva' must be a number") from None
    return GridCase(tuple(buses), tuple(lines), tuple(gens), tuple(storage), tuple(loads),
                    base, str(data["label"]), float(data.get("load_scale", 1.0)))


def case_to_dict(case: GridCase) -> dict:
    out = {
        "label": case.label,
        "base_mva": case.base_mva,
        "buses": [{"id": b.id, "name": b.name, "latitude": b.latitude,
                   "longitude": b.longitude, "is_substation": b.is_substation}
                  for b in case.buses],
        "lines": [{"id": ln.id, "from_bus": ln.from_bus, "to_bus": ln.to_bus,
                   "susceptance": ln.susceptance,
                   "flow_limit_mw": None if math.isinf(ln.flow_limit_mw) else ln.flow_limit_mw}
                  for ln in case.lines],
        "generators": [{"id": g.id, "bus_id": g.bus_id, "fuel": g.fuel.value,
                        "p_min_mw": g.p_min_mw, "p_max_mw": g.p_max_mw,
                        "cost_curve": [list(p) for p in g.cost_curve],
                        "availability": list(g.availability)}
                       for g in case.generators],
        "storage": [{"id": s.id, "bus_id": s.bus_id, "power_limit_mw": s.power_limit_mw,
                     "energy_capacity_mwh": s.energy_capacity_mwh,
                     "round_trip_efficiency": s.round_trip_efficiency,
                     "initial_soc_mwh": s.initial_soc_mwh}
                    for s in case.storage_units],
        "static_loads": [{"bus_id": s.bus_id, "hourly_load_mw": list(s.hourly_load_mw)}
                         for s in case.static_loads],
    }
    if case.load_scale != 1.0:
        out["load_scale"] = case.load_scale
    return out


def parse_grid_case(path) -> GridCase:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise GridCaseError(f"cannot read case file {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GridCaseError(f"{path}: invalid JSON ({exc})") from exc
    return case_from_dict(data)


def write_grid_case(case: GridCase, path) -> None:
    Path(path).write_text(json.dumps(case_to_dict(case), indent=1) + "\n")


# --------------------------------------------------------------------------
# transforms

def scale_static_load(case: GridCase, factor: float) -> GridCase:
    """Multiply every hourly static load by ``factor``."""
    if not factor > 0:
        raise GridCaseError(f"load scale factor must be positive, got {factor}")
    return replace(case, load_scale=case.load_scale * factor)


def apply_load_shape(case: GridCase, multipliers: Sequence[float]) -> GridCase:
    """Multiply static load at hour h by ``multipliers[h]`` (weather day shapes)."""
    if len(multipliers) != HOURS or any(not m > 0 for m in multipliers):
        raise GridCaseError(f"load shape needs {HOURS} positive multipliers")
    if all(m == 1.0 for m in multipliers):
        return case
    loads = tuple(StaticLoadSeries(s.bus_id, tuple(v * m for v, m in zip(s.hourly_load_mw, multipliers)))
                  for s in case.static_loads)
    return replace(case, static_loads=loads)


def copper_plate(case: GridCase) -> GridCase:
    """Same case with every line limit removed."""
    lines = tuple(replace(ln, flow_limit_mw=math.inf) for ln in case.lines)
    return replace(case, lines=lines)


# --------------------------------------------------------------------------
# synthetic cases

# mild-day load shape, per unit of daily peak
MILD_DAY_SHAPE = (0.62, 0.58, 0.56, 0.55, 0.56, 0.60, 0.68, 0.75, 0.80, 0.84, 0.88, 0.92,
                  0.95, 0.97, 0.99, 1.00, 1.00, 0.99, 0.95, 0.92, 0.88, 0.82, 0.74, 0.67)

DEFAULT_COSTS: dict[FuelType, tuple[tuple[float, float], ...]] = {
    FuelType.NUCLEAR: ((1.0, 8.0),),
    FuelType.WIND: ((1.0, 0.0),),
    FuelType.SOLAR: ((1.0, 0.0),),
    FuelType.COAL: ((0.6, 19.0), (1.0, 25.0)),
    FuelType.NATURAL_GAS: ((0.65, 22.0), (1.0, 29.0)),
    FuelType.OTHER: ((1.0, 60.0),),
}

_CENTER = (30.27, -97.74)


def wind_profile(rng: np.random.Generator, night: float = 0.6, day: float = 0.3) -> tuple[float, ...]:
    """Hourly wind capacity factors: high overnight, low mid-afternoon."""
    h = np.arange(HOURS)
    base = day + (night - day) * 0.5 * (1 + np.cos(2 * np.pi * (h - 2) / HOURS))
    noise = rng.uniform(-0.03, 0.03, HOURS)
    return tuple(float(v) for v in np.clip(base + noise, 0.0, 1.0))


def solar_profile() -> tuple[float, ...]:
    h = np.arange(HOURS)
    return tuple(float(v) for v in np.clip(np.sin(np.pi * (h - 6) / 14), 0.0, 1.0))


def generate_synthetic_case(n_buses: int, fuel_mix: Mapping[FuelType, float], peak_load_mw: float,
                            seed: int, *, label: str = "synthetic", max_unit_mw: float = 1500.0,
                            storage_hours: float = 4.0) -> GridCase:
    """Random but servable grid case with the requested capacity by fuel.

    Each fuel's capacity is split into equal units no larger than ``max_unit_mw``,
    so capacity shares are reproduced exactly. Storage capacity becomes storage
    units with ``storage_hours`` of energy. Static load follows the mild-day shape
    scaled to ``peak_load_mw``.
    """
    if n_buses < 1:
        raise GridCaseError("n_buses must be >= 1")
    mix = {FuelType(k): float(v) for k, v in fuel_mix.items()}
    if any(v < 0 for v in mix.values()) or peak_load_mw < 0:
        raise GridCaseError("capacities and peak load must be non-negative")
    gen_cap = math.fsum(v for k, v in mix.items() if k is not FuelType.STORAGE)
    if gen_cap < peak_load_mw:
        raise GridCaseError(f"infeasible request: generator capacity {gen_cap} MW "
                            f"< peak load {peak_load_mw} MW")
    rng = np.random.default_rng(seed)

    lat = _CENTER[0] + rng.uniform(-0.25, 0.25, n_buses)
    lon = _CENTER[1] + rng.uniform(-0.25, 0.25, n_buses)
    if n_buses == 1:
        lat[0], lon[0] = _CENTER
    n_sub = n_buses if n_buses < 4 else n_buses - n_buses // 4
    buses = tuple(Bus(i + 1, f"bus{i + 1}", float(lat[i]), float(lon[i]), i < n_sub)
                  for i in range(n_buses))

    # spanning tree to nearest earlier bus, then a few extra short lines
    coords = np.column_stack([lat, lon])
    edges = []
    for i in range(1, n_buses):
        d = np.hypot(*(coords[:i] - coords[i]).T)
        edges.append((int(np.argmin(d)), i))
    have = {tuple(sorted(e)) for e in edges}
    extra = []
    for i in range(n_buses):
        for j in range(i + 1, n_buses):
            if (i, j) not in have:
                extra.append((float(np.hypot(*(coords[i] - coords[j]))), i, j))
    extra.sort()
    edges += [(i, j) for _, i, j in extra[: n_buses // 5]]
    limit = max(gen_cap, 1.0)
    lines = []
    for k, (i, j) in enumerate(edges):
        km = max(111.0 * float(np.hypot(*(coords[i] - coords[j]))), 1.0)
        lines.append(TransmissionLine(k + 1, i + 1, j + 1, round(1.0 / (0.0008 * km), 6), limit))

    gens = []
    storage = []
    gid = 1
    for fuel in FuelType:
        cap = mix.get(fuel, 0.0)
        if cap <= 0:
            continue
        n_units = max(1, math.ceil(cap / max_unit_mw))
        unit = cap / n_units
        for _ in range(n_units):
            bus = int(rng.integers(1, n_buses + 1))
            if fuel is FuelType.STORAGE:
                storage.append(StorageUnit(len(storage) + 1, bus, unit, unit * storage_hours,
                                           0.85, unit * storage_hours / 2))
                continue
            jitter = 1.0 + float(rng.uniform(-0.05, 0.05))
            curve = tuple((frac * unit, round(c * jitter, 4)) for frac, c in DEFAULT_COSTS[fuel])
            if fuel is FuelType.WIND:
                avail = wind_profile(rng)
            elif fuel is FuelType.SOLAR:
                avail = solar_profile()
            else:
                avail = (1.0,) * HOURS
            gens.append(Generator(gid, bus, fuel, 0.0, unit, curve, avail))
            gid += 1

    subs = [b.id for b in buses if b.is_substation]
    w = rng.dirichlet(np.ones(len(subs)))
    loads = tuple(StaticLoadSeries(bid, tuple(peak_load_mw * float(wi) * s for s in MILD_DAY_SHAPE))
                  for bid, wi in zip(subs, w))
    case_kwargs = dict(buses=buses, lines=tuple(lines), generators=tuple(gens),
                       storage_units=tuple(storage), base_mva=100.0, label=label)
    total_peak = max(math.fsum(s.hourly_load_mw[h] for s in loads) for h in range(HOURS))
    if total_peak > gen_cap:  # rounding excess only
        shrink = gen_cap / total_peak * (1 - 1e-12)
        loads = tuple(StaticLoadSeries(s.bus_id, tuple(v * shrink for v in s.hourly_load_mw))
                      for s in loads)
    return GridCase(static_loads=loads, **case_kwargs)
