"""On-road and power-plant emission inventories."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from decimal import Decimal
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .grid_core import CARBON_FREE, FuelType
from .opf import DayDispatch
from .transport import SPEED_BINS, EvAssignment, TripRecord, VehicleClass, speed_bin


class EmissionsError(ValueError):
    pass


class Pollutant(str, Enum):
    CO2 = "CO2"
    NOX = "NOX"
    PM25 = "PM25"
    VOC = "VOC"


class Regime(str, Enum):
    MILD = "mild"
    HOT = "hot"


EGU_PREFIX = "EGU:"


def egu_source(fuel: FuelType) -> str:
    return EGU_PREFIX + fuel.value


# --------------------------------------------------------------------------
# rate tables

@dataclass(frozen=True)
class OnRoadRateTable:
    rates: Mapping[tuple[VehicleClass, int, Pollutant, Regime], float]  # g/mile

    def __post_init__(self):
        for vc in VehicleClass:
            for b in SPEED_BINS:
                for p in Pollutant:
                    for r in Regime:
                        v = self.rates.get((vc, b, p, r))
                        if v is None:
                            raise EmissionsError(f"on-road rate table missing "
                                                 f"({vc.value}, {b}, {p.value}, {r.value})")
                        if not v >= 0 or not math.isfinite(v):
                            raise EmissionsError(f"on-road rate ({vc.value}, {b}, {p.value}, "
                                                 f"{r.value}) must be finite and >= 0")

    def rate(self, vc: VehicleClass, speed_mph: float, p: Pollutant, regime: Regime) -> float:
        return self.rates[(vc, speed_bin(speed_mph), p, regime)]


@dataclass(frozen=True)
class EguRateTable:
    rates: Mapping[tuple[FuelType, Pollutant], float]  # g/MWh

    def __post_init__(self):
        for (fuel, p), v in self.rates.items():
            if not v >= 0 or not math.isfinite(v):
                raise EmissionsError(f"EGU rate ({fuel.value}, {p.value}) must be finite and >= 0")
            if fuel in CARBON_FREE and v != 0:
                raise EmissionsError(f"EGU rate ({fuel.value}, {p.value}) must be zero "
                                     f"for a carbon-free fuel")
        for fuel in CARBON_FREE:
            for p in Pollutant:
                if (fuel, p) not in self.rates:
                    raise EmissionsError(f"EGU rate table missing ({fuel.value}, {p.value})")

    def rate(self, fuel: FuelType, p: Pollutant) -> float:
        try:
            return self.rates[(fuel, p)]
        except KeyError:
            raise EmissionsError(f"EGU rate table missing ({fuel.value}, {p.value})") from None

    def missing_for(self, fuels: Iterable[FuelType]) -> list[tuple[FuelType, Pollutant]]:
        return [(f, p) for f in fuels for p in Pollutant if (f, p) not in self.rates]


# Placeholder magnitudes for tests and demos; not sourced from any rate model.
_EGU_DEFAULTS = {
    FuelType.COAL: {Pollutant.CO2: 950_000.0, Pollutant.NOX: 600.0, Pollutant.PM25: 60.0,
                    Pollutant.VOC: 12.0},
    FuelType.NATURAL_GAS: {Pollutant.CO2: 450_000.0, Pollutant.NOX: 160.0, Pollutant.PM25: 15.0,
                           Pollutant.VOC: 30.0},
    FuelType.OTHER: {Pollutant.CO2: 700_000.0, Pollutant.NOX: 900.0, Pollutant.PM25: 80.0,
                     Pollutant.VOC: 40.0},
}


def default_egu_rates() -> EguRateTable:
    rates = {}
    for fuel in FuelType:
        for p in Pollutant:
            rates[(fuel, p)] = _EGU_DEFAULTS.get(fuel, {}).get(p, 0.0)
    return EguRateTable(rates)


def default_onroad_rates() -> OnRoadRateTable:
    """Placeholder running-exhaust g/mile curves, U-shaped in speed."""
    base = {VehicleClass.LDV: {Pollutant.CO2: 360.0, Pollutant.NOX: 0.20, Pollutant.PM25: 0.005,
                               Pollutant.VOC: 0.04},
            VehicleClass.HDV: {Pollutant.CO2: 1700.0, Pollutant.NOX: 4.0, Pollutant.PM25: 0.12,
                               Pollutant.VOC: 0.25}}
    hot = {Pollutant.CO2: 1.08, Pollutant.NOX: 1.05, Pollutant.PM25: 1.0, Pollutant.VOC: 1.03}
    rates = {}
    for vc, per in base.items():
        for b in SPEED_BINS:
            v = b + 2.5
            shape = 1.0 + 0.8 * ((v - 45.0) / 45.0) ** 2 + (1.5 if v < 10 else 0.0)
            for p, r in per.items():
                rates[(vc, b, p, Regime.MILD)] = round(r * shape, 6)
                rates[(vc, b, p, Regime.HOT)] = round(r * shape * hot[p], 6)
    return OnRoadRateTable(rates)


ONROAD_COLUMNS = ["vehicle_class", "speed_bin_low", "pollutant", "regime", "g_per_mile"]
EGU_COLUMNS = ["fuel", "pollutant", "g_per_mwh"]


def _open_csv(path, columns):
    fh = open(path, newline="")
    reader = csv.DictReader(fh)
    if reader.fieldnames != columns:
        fh.close()
        raise EmissionsError(f"{path}: expected columns {columns}, got {reader.fieldnames}")
    return fh, reader


def read_onroad_rates(path) -> OnRoadRateTable:
    fh, reader = _open_csv(path, ONROAD_COLUMNS)
    rates = {}
    with fh:
        for i, row in enumerate(reader):
            try:
                key = (VehicleClass(row["vehicle_class"]), int(row["speed_bin_low"]),
                       Pollutant(row["pollutant"]), Regime(row["regime"]))
                rates[key] = float(row["g_per_mile"])
            except ValueError as exc:
                raise EmissionsError(f"{path}: row {i + 2}: {exc}") from None
    return OnRoadRateTable(rates)


def write_onroad_rates(table: OnRoadRateTable, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ONROAD_COLUMNS)
        for (vc, b, p, r), v in sorted(table.rates.items(),
                                       key=lambda kv: (kv[0][0].value, kv[0][1], kv[0][2].value,
                                                       kv[0][3].value)):
            w.writerow([vc.value, b, p.value, r.value, repr(v)])


def read_egu_rates(path) -> EguRateTable:
    fh, reader = _open_csv(path, EGU_COLUMNS)
    rates = {}
    with fh:
        for i, row in enumerate(reader):
            try:
                rates[(FuelType(row["fuel"]), Pollutant(row["pollutant"]))] = float(row["g_per_mwh"])
            except ValueError as exc:
                raise EmissionsError(f"{path}: row {i + 2}: {exc}") from None
    return EguRateTable(rates)


def write_egu_rates(table: EguRateTable, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EGU_COLUMNS)
        for fuel in FuelType:
            for p in Pollutant:
                if (fuel, p) in table.rates:
                    w.writerow([fuel.value, p.value, repr(table.rates[(fuel, p)])])


# --------------------------------------------------------------------------
# inventories

@dataclass
class EmissionInventory:
    masses: dict[tuple[str, Pollutant], float] = field(default_factory=dict)  # grams
    label: str = ""

    def sources(self) -> list[str]:
        return sorted({s for s, _ in self.masses})

    def get(self, source: str, p: Pollutant) -> float:
        return self.masses.get((source, p), 0.0)

    def total(self, p: Pollutant) -> float:
        return math.fsum(v for (s, q), v in self.masses.items() if q is p)

    def egu_total(self, p: Pollutant) -> float:
        return math.fsum(v for (s, q), v in self.masses.items()
                         if q is p and s.startswith(EGU_PREFIX))

    def onroad_total(self, p: Pollutant) -> float:
        return math.fsum(v for (s, q), v in self.masses.items()
                         if q is p and not s.startswith(EGU_PREFIX))

    def sorted_items(self):
        return sorted(self.masses.items(), key=lambda kv: (kv[0][0], list(Pollutant).index(kv[0][1])))


def onroad_emissions(trips: Sequence[TripRecord], assignment: EvAssignment | None,
                     rates: OnRoadRateTable, regime: Regime | str = Regime.MILD,
                     vehicle_weight: float = 1.0) -> EmissionInventory:
    """Running-exhaust grams from every non-EV trip: link miles times g/mile.

    ``vehicle_weight`` is the number of real vehicles each simulated one stands for.
    """
    regime = Regime(regime)
    # VMT per (class, speed bin) first, then one multiplication per rate
    vmt = {(vc, b): 0.0 for vc in VehicleClass for b in SPEED_BINS}
    for t in trips:
        if assignment is not None and assignment.is_ev(t.vehicle_id):
            continue
        vc = t.vehicle_class
        for ln in t.links:
            vmt[(vc, speed_bin(ln.avg_speed_mph))] += ln.length_miles
    sums = {}
    for vc in VehicleClass:
        for p in Pollutant:
            sums[(vc.value, p)] = math.fsum(vmt[(vc, b)] * rates.rates[(vc, b, p, regime)]
                                            for b in SPEED_BINS) * vehicle_weight
    return EmissionInventory(sums)


def egu_emissions(dispatch: DayDispatch, rates: EguRateTable) -> EmissionInventory:
    """Per-fuel generation (MWh) times per-fuel g/MWh."""
    missing = rates.missing_for(dispatch.generation_by_fuel_mwh)
    if missing:
        f, p = missing[0]
        raise EmissionsError(f"EGU rate table missing ({f.value}, {p.value})")
    out = {}
    for fuel, mwh in dispatch.generation_by_fuel_mwh.items():
        for p in Pollutant:
            r = rates.rates[(fuel, p)]
            # carbon-free rows are zero; storage may carry negative net output
            out[(egu_source(fuel), p)] = mwh * r if r else 0.0
    return EmissionInventory(out)


def combine_inventories(onroad: EmissionInventory, egu: EmissionInventory,
                        label: str = "") -> EmissionInventory:
    overlap = {s for s, _ in onroad.masses} & {s for s, _ in egu.masses}
    if overlap:
        raise EmissionsError(f"inventories share sources {sorted(overlap)}")
    return EmissionInventory({**onroad.masses, **egu.masses}, label)


def marginal_egu_rate(base: EmissionInventory, with_ev: EmissionInventory, pollutant: Pollutant,
                      ev_mwh: float) -> float:
    """EGU emission increase per MWh of EV charging (g/MWh)."""
    if not ev_mwh > 0:
        raise EmissionsError("marginal rate undefined for zero EV energy")
    sources = sorted({s for s, _ in base.masses} | {s for s, _ in with_ev.masses})
    delta = math.fsum(with_ev.get(s, pollutant) - base.get(s, pollutant)
                      for s in sources if s.startswith(EGU_PREFIX))
    return delta / ev_mwh


def delivered_ev_mwh(base: DayDispatch, with_ev: DayDispatch) -> float:
    """Extra energy served by the EV dispatch (lossless network)."""
    return with_ev.total_load_mwh - base.total_load_mwh


INVENTORY_COLUMNS = ["scenario", "source", "pollutant", "grams", "metric_tons"]


def grams_to_tons_str(grams: float) -> str:
    """Exact decimal metric tons for a float gram value."""
    return format(Decimal(repr(float(grams))).scaleb(-6), "f")


def write_inventory_csv(inventories: Iterable[EmissionInventory], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(INVENTORY_COLUMNS)
        for inv in inventories:
            for (src, p), g in inv.sorted_items():
                w.writerow([inv.label, src, p.value, repr(g), grams_to_tons_str(g)])


def read_inventory_csv(path) -> dict[str, EmissionInventory]:
    out: dict[str, EmissionInventory] = {}
    fh, reader = _open_csv(path, INVENTORY_COLUMNS)
    with fh:
        for i, row in enumerate(reader):
            try:
                g = float(row["grams"])
                tons = Decimal(row["metric_tons"])
                p = Pollutant(row["pollutant"])
            except (ValueError, ArithmeticError) as exc:
                raise EmissionsError(f"{path}: row {i + 2}: {exc}") from None
            if tons != Decimal(repr(g)).scaleb(-6):
                raise EmissionsError(f"{path}: row {i + 2}: metric_tons disagrees with grams")
            inv = out.setdefault(row["scenario"], EmissionInventory(label=row["scenario"]))
            inv.masses[(row["source"], p)] = g
    return out
