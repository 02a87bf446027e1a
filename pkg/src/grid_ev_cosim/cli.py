"""Command-line front end: validate, synth, run, sweep.

Exit codes: 0 success, 1 usage error, 2 validation failure, 3 runtime or
infeasibility error, 4 sweep finished with some failed scenarios.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from . import DEMO_CONFIG
from .charging import STRATEGIES, BehaviorParams, write_profile_csv
from .coupling import build_service_areas, read_service_area_override
from .emissions import (EguRateTable, default_egu_rates, default_onroad_rates, read_egu_rates,
                        read_onroad_rates, write_inventory_csv)
from .grid_core import FuelType, generate_synthetic_case, parse_grid_case, write_grid_case
from .opf import write_dispatch_csv
from .scenario import (ScenarioData, ScenarioSpec, default_matrix, run_matrix,
                       run_scenario, write_baselines_csv, write_emissions_by_scenario,
                       write_failures_csv, write_load_stack, write_marginal_generation,
                       write_summary_csv)
from .transport import (RangeClass, TripGenParams, default_energy_rates, generate_synthetic_nodes,
                        generate_synthetic_trips, parse_trips, read_energy_rates, read_nodes,
                        write_nodes, write_trips)

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_RUNTIME, EXIT_PARTIAL = 0, 1, 2, 3, 4

log = logging.getLogger("grid_ev_cosim")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    base_dir: Path
    cases: dict[str, Any]
    trips: Any
    nodes: Any
    service_areas: str | None = None
    energy_rates: str | None = None
    onroad_rates: str | None = None
    egu_rates: str | None = None
    behavior: dict = field(default_factory=dict)
    range_shares: dict | None = None
    vehicle_weight: float = 1.0
    matrix: dict = field(default_factory=dict)
    seed: int = 0
    workers: int = 1
    out: str = "out"

    def path(self, p: str) -> Path:
        q = Path(p)
        return q if q.is_absolute() else self.base_dir / q


_CONFIG_KEYS = {"cases", "trips", "nodes", "service_areas", "energy_rates", "onroad_rates",
                "egu_rates", "behavior", "range_shares", "vehicle_weight", "matrix", "seed",
                "workers", "out"}


def load_config(path: str | Path | None) -> RunConfig:
    path = Path(path) if path else DEMO_CONFIG
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from None
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise UsageError(f"config {path}: unknown keys {sorted(unknown)}")
    for key in ("cases", "trips", "nodes"):
        if key not in raw:
            raise UsageError(f"config {path}: missing key {key!r}")
    base = path.resolve().parent
    return RunConfig(base_dir=base, **raw)


# --------------------------------------------------------------------------
# loading inputs

def _load_trips(cfg: RunConfig):
    if isinstance(cfg.trips, dict):
        s = dict(cfg.trips["synthetic"])
        params = TripGenParams(**s.pop("params", {}))
        return generate_synthetic_trips(s["n_vehicles"], s["n_nodes"], s["seed"], params)
    return parse_trips(cfg.path(cfg.trips))


def _load_nodes(cfg: RunConfig):
    if isinstance(cfg.nodes, dict):
        s = cfg.nodes["synthetic"]
        return generate_synthetic_nodes(s["n_nodes"], s["seed"])
    return read_nodes(cfg.path(cfg.nodes))


def _matrix_axes(cfg: RunConfig, overrides: dict | None = None) -> dict:
    m = {"weather": ["mild", "hot"], "mix_year": sorted(cfg.cases),
         "penetration": [0.05, 0.10, 0.15, 0.20], "strategy": list(STRATEGIES)}
    m.update(cfg.matrix)
    m.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return m


def collect_inputs(cfg: RunConfig) -> tuple[ScenarioData | None, list[str]]:
    """Load and check every input; return the data and every problem found."""
    problems: list[str] = []

    def attempt(what, fn):
        try:
            return fn()
        except Exception as exc:  # noqa: BLE001 - reported, not raised
            problems.append(f"{what}: {exc}")
            return None

    cases = {}
    for label, p in cfg.cases.items():
        c = attempt(f"grid case {label!r}", lambda p=p: parse_grid_case(cfg.path(p)))
        if c is not None:
            cases[label] = c
    trips = attempt("trips", lambda: _load_trips(cfg))
    nodes = attempt("nodes", lambda: _load_nodes(cfg))
    energy = attempt("energy rates", lambda: read_energy_rates(cfg.path(cfg.energy_rates))
                     if cfg.energy_rates else default_energy_rates())
    onroad = attempt("on-road rates", lambda: read_onroad_rates(cfg.path(cfg.onroad_rates))
                     if cfg.onroad_rates else default_onroad_rates())
    egu = attempt("EGU rates", lambda: read_egu_rates(cfg.path(cfg.egu_rates))
                  if cfg.egu_rates else default_egu_rates())
    behavior = attempt("behavior params", lambda: BehaviorParams(
        **{k: tuple(v) if isinstance(v, list) else v for k, v in cfg.behavior.items()}))
    shares = attempt("range shares", lambda: {RangeClass(k): float(v)
                                              for k, v in cfg.range_shares.items()}
                     if cfg.range_shares else None)
    if not cfg.vehicle_weight > 0:
        problems.append("vehicle_weight must be > 0")

    if isinstance(egu, EguRateTable):
        for label, c in cases.items():
            fuels = {g.fuel for g in c.generators} | ({FuelType.STORAGE} if c.storage_units else set())
            for f, p in egu.missing_for(sorted(fuels, key=list(FuelType).index)):
                problems.append(f"EGU rates: missing row (fuel={f.value}, pollutant={p.value}) "
                                f"needed by case {label!r}")
    areas_by_case = {}
    if nodes is not None:
        for label, c in cases.items():
            if cfg.service_areas:
                a = attempt(f"service areas for case {label!r}",
                            lambda c=c: read_service_area_override(cfg.path(cfg.service_areas), c))
            else:
                a = attempt(f"service areas for case {label!r}", lambda c=c: build_service_areas(c, nodes))
            if a is not None:
                areas_by_case[label] = a
    if trips is not None and areas_by_case:
        used = {t.end_node for t in trips} | {t.start_node for t in trips}
        for label, a in areas_by_case.items():
            unmapped = sorted(used - set(a.node_to_bus))
            if unmapped:
                problems.append(f"service areas for case {label!r}: trip nodes without a "
                                f"substation: {unmapped[:10]}")
    if problems:
        return None, problems
    first = next(iter(areas_by_case.values()))
    if any(a.node_to_bus != first.node_to_bus for a in areas_by_case.values()):
        problems.append("grid cases disagree on substation layout; service areas differ by case")
        return None, problems
    data = ScenarioData(cases, trips, first, energy, onroad, egu, behavior,
                        shares or ScenarioData.__dataclass_fields__["range_shares"].default_factory(),
                        float(cfg.vehicle_weight))
    return data, problems


# --------------------------------------------------------------------------
# commands

def cmd_validate(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    data, problems = collect_inputs(cfg)
    if problems:
        print(f"validation failed: {len(problems)} problem(s)", file=out)
        for p in problems:
            print(f"  - {p}", file=out)
        return EXIT_INVALID
    print(f"ok: {len(data.cases)} grid case(s), {len(data.trips)} trips, "
          f"{len(data.areas.node_to_bus)} transport nodes", file=out)
    return EXIT_OK


def _write_scenario_files(res, case, outdir: Path) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    write_dispatch_csv(res.day_dispatch, case, outdir / "dispatch.csv")
    write_profile_csv(res.profile, outdir / "profile.csv")
    write_inventory_csv([res.inventory, res.baseline_inventory], outdir / "inventory.csv")
    write_load_stack(res, outdir / "load_stack.txt")
    write_marginal_generation(res, outdir / "marginal_generation.txt")


def cmd_run(cfg: RunConfig, spec: ScenarioSpec, out_dir: Path) -> int:
    data, problems = collect_inputs(cfg)
    if problems:
        for p in problems:
            log.error("%s", p)
        return EXIT_INVALID
    try:
        res = run_scenario(spec, data)
    except Exception as exc:  # noqa: BLE001
        log.error("%s", exc)
        return EXIT_RUNTIME
    _write_scenario_files(res, res.case, out_dir)
    write_summary_csv([res], out_dir / "summary.csv")
    log.info("wrote %s", out_dir)
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, axes: dict, out_dir: Path, workers: int, details: bool) -> int:
    specs = default_matrix(cfg.seed, axes["weather"], axes["mix_year"], axes["penetration"],
                           axes["strategy"])
    data, problems = collect_inputs(cfg)
    if problems:
        for p in problems:
            log.error("%s", p)
        return EXIT_INVALID
    t0 = time.perf_counter()
    result = run_matrix(specs, data, workers)
    log.info("sweep of %d scenarios took %.1f s", len(specs), time.perf_counter() - t0)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_summary_csv(result.results, out_dir / "summary.csv")
    write_baselines_csv(result.baselines, out_dir / "baselines.csv")
    write_failures_csv(result.failures, out_dir / "failures.csv")
    write_inventory_csv([r.inventory for r in result.baselines.values()]
                        + [r.inventory for r in result.results], out_dir / "inventory.csv")
    plots = out_dir / "plots"
    plots.mkdir(exist_ok=True)
    write_emissions_by_scenario(list(result.baselines.values()) + result.results,
                                plots / "emissions_by_scenario.txt")
    for r in result.results:
        write_load_stack(r, plots / f"load_stack_{r.spec.name}.txt")
        write_marginal_generation(r, plots / f"marginal_generation_{r.spec.name}.txt")
        if details:
            _write_scenario_files(r, r.case, out_dir / "scenarios" / r.spec.name)
    for f in result.failures:
        log.error("%s", f.message)
    if not result.results:
        return EXIT_RUNTIME
    return EXIT_PARTIAL if result.failures else EXIT_OK


def _parse_mix(text: str) -> dict[FuelType, float]:
    out = {}
    for part in text.split(","):
        if not part.strip():
            continue
        k, _, v = part.partition("=")
        try:
            out[FuelType(k.strip())] = float(v)
        except ValueError:
            raise UsageError(f"bad fuel mix entry {part!r}; use fuel=MW with fuel in "
                             f"{[f.value for f in FuelType]}") from None
    if not out:
        raise UsageError("empty fuel mix")
    return out


DEFAULT_SYNTH_MIX = "nuclear=438,coal=875,natural_gas=2188,wind=875"


def cmd_synth(args, out_dir: Path, seed: int) -> int:
    mix = _parse_mix(args.mix)
    try:
        case = generate_synthetic_case(args.n_buses, mix, args.peak_mw, seed, label=args.label)
        trips = generate_synthetic_trips(args.n_vehicles, args.n_nodes, seed)
        nodes = generate_synthetic_nodes(args.n_nodes, seed)
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_RUNTIME
    out_dir.mkdir(parents=True, exist_ok=True)
    write_grid_case(case, out_dir / "case.json")
    write_trips(trips, out_dir / "trips.csv")
    write_nodes(nodes, out_dir / "nodes.csv")
    cfg = {"cases": {args.label: "case.json"}, "trips": "trips.csv", "nodes": "nodes.csv",
           "vehicle_weight": args.vehicle_weight, "seed": seed,
           "matrix": {"weather": ["mild", "hot"], "mix_year": [args.label],
                      "penetration": [0.05, 0.10, 0.15, 0.20], "strategy": list(STRATEGIES)}}
    (out_dir / "config.json").write_text(json.dumps(cfg, indent=2) + "\n")
    print(f"wrote {out_dir / 'case.json'}, {len(trips)} trips, {len(nodes)} nodes")
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _csv_list(cast):
    def parse(text: str):
        items = [x.strip() for x in text.split(",") if x.strip()]
        return [cast(x) for x in items]
    return parse


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON run config (default: bundled demo)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    common.add_argument("--workers", type=int, default=argparse.SUPPRESS)

    ap = _Parser(prog="grid-ev-cosim", description="EV charging, grid dispatch and emissions "
                 "co-simulation.", parents=[common])
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    sub.add_parser("validate", parents=[common], help="check every input")
    run = sub.add_parser("run", parents=[common], help="run one scenario")
    run.add_argument("--mix", required=True)
    run.add_argument("--weather", choices=["mild", "hot"], default="mild")
    run.add_argument("--penetration", type=float, default=0.2)
    run.add_argument("--strategy", choices=STRATEGIES, default="trip-end")
    sw = sub.add_parser("sweep", parents=[common], help="run the full scenario matrix")
    sw.add_argument("--weathers", type=_csv_list(str))
    sw.add_argument("--mixes", type=_csv_list(str))
    sw.add_argument("--penetrations", type=_csv_list(float))
    sw.add_argument("--strategies", type=_csv_list(str))
    sw.add_argument("--details", action="store_true", help="write per-scenario detail directories")
    sy = sub.add_parser("synth", parents=[common], help="write a synthetic case and trips")
    sy.add_argument("--n-buses", type=int, default=10)
    sy.add_argument("--n-vehicles", type=int, default=1000)
    sy.add_argument("--n-nodes", type=int, default=50)
    sy.add_argument("--peak-mw", type=float, default=2400.0)
    sy.add_argument("--mix", default=DEFAULT_SYNTH_MIX, help="fuel=MW pairs, comma separated")
    sy.add_argument("--label", default="synthetic")
    sy.add_argument("--vehicle-weight", type=float, default=100.0)
    return ap


def _setup_logging() -> None:
    level = os.environ.get("GRID_EV_COSIM_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv=None) -> int:
    _setup_logging()
    ap = build_parser()
    args = ap.parse_args(argv)
    if not args.command:
        ap.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "synth":
            return cmd_synth(args, Path(getattr(args, "out", "synth")), getattr(args, "seed", 0))
        cfg = load_config(getattr(args, "config", None))
        if hasattr(args, "seed"):
            cfg.seed = args.seed
        workers = getattr(args, "workers", cfg.workers)
        if workers < 1:
            raise UsageError("--workers must be >= 1")
        out_dir = Path(getattr(args, "out", cfg.out))
        if args.command == "validate":
            return cmd_validate(cfg)
        if args.command == "run":
            if args.mix not in cfg.cases:
                raise UsageError(f"unknown mix {args.mix!r}; config has {sorted(cfg.cases)}")
            try:
                spec = ScenarioSpec(args.weather, args.mix, args.penetration, args.strategy, cfg.seed)
            except ValueError as exc:
                raise UsageError(str(exc)) from None
            return cmd_run(cfg, spec, out_dir)
        axes = _matrix_axes(cfg, {"weather": args.weathers, "mix_year": args.mixes,
                                  "penetration": args.penetrations, "strategy": args.strategies})
        for k, v in axes.items():
            if not v:
                raise UsageError(f"sweep axis {k!r} is empty")
        unknown = [m for m in axes["mix_year"] if m not in cfg.cases]
        if unknown:
            raise UsageError(f"unknown mix year(s) {unknown}; config has {sorted(cfg.cases)}")
        try:
            default_matrix(cfg.seed, axes["weather"], axes["mix_year"], axes["penetration"],
                           axes["strategy"])
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        return cmd_sweep(cfg, axes, out_dir, workers, args.details)
    except UsageError as exc:
        print(f"grid-ev-cosim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
