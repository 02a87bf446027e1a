"""Run the bundled 48-scenario sweep and print a compact CO2 table."""

from __future__ import annotations

import argparse
import math
from pathlib import Path

from grid_ev_cosim.cli import main as cli_main
from grid_ev_cosim.scenario import read_baselines_csv, read_summary_csv


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("out/demo_sweep"))
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args(argv)
    code = cli_main(["sweep", "--out", str(args.out), "--workers", str(args.workers)])
    if code not in (0, 4):
        return code
    for b in read_baselines_csv(args.out / "baselines.csv"):
        print(f"baseline {b['weather']:>4} {b['mix_year']}: {b['total_co2_t']:.1f} t CO2")
    print(f"{'scenario':<32} {'EV MWh':>9} {'dCO2 %':>8} {'margin g/MWh':>13}")
    for r in read_summary_csv(args.out / "summary.csv"):
        name = f"{r['weather']}-{r['mix_year']}-p{r['penetration']:g}-{r['strategy']}"
        rate = r["marginal_rate_co2_g_per_mwh"]
        rate_s = "n/a" if math.isnan(rate) else f"{rate:.0f}"
        print(f"{name:<32} {r['ev_energy_mwh']:>9.1f} {r['pct_co2_reduction']:>8.2f} {rate_s:>13}")
    return code


if __name__ == "__main__":
    raise SystemExit(main())
