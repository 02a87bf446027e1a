import math

import pytest

from builders import commuter_trips, scenario_data
from conftest import one_bus_case
from grid_ev_cosim import DATA_DIR
from grid_ev_cosim.charging import BehaviorParams
from grid_ev_cosim.coupling import build_service_areas
from grid_ev_cosim.emissions import Pollutant, default_egu_rates, default_onroad_rates
from grid_ev_cosim.grid_core import FuelType, copper_plate, parse_grid_case
from grid_ev_cosim.scenario import (HOT_LOAD_MULTIPLIERS, ScenarioData, ScenarioError,
                                    ScenarioSpec, default_matrix, read_baselines_csv,
                                    read_columns, read_failures_csv, read_summary_csv,
                                    run_baseline, run_matrix, run_scenario, summary_row,
                                    write_baselines_csv, write_emissions_by_scenario,
                                    write_failures_csv, write_load_stack,
                                    write_marginal_generation, write_summary_csv)
from grid_ev_cosim.transport import (RangeClass, default_energy_rates, generate_synthetic_nodes,
                                     generate_synthetic_trips)

CO2 = Pollutant.CO2


@pytest.fixture(scope="module")
def small_data():
    cases = {"2016": parse_grid_case(DATA_DIR / "demo_2016.json"),
             "2030": parse_grid_case(DATA_DIR / "demo_2030.json")}
    trips = generate_synthetic_trips(1500, 30, seed=4)
    areas = build_service_areas(cases["2016"], generate_synthetic_nodes(30, 4))
    return ScenarioData(cases, trips, areas, default_energy_rates(), default_onroad_rates(),
                        default_egu_rates(), vehicle_weight=400.0)


def test_hot_multipliers_shape():
    assert len(HOT_LOAD_MULTIPLIERS) == 24
    assert min(HOT_LOAD_MULTIPLIERS) == pytest.approx(1.08)
    assert max(HOT_LOAD_MULTIPLIERS) == HOT_LOAD_MULTIPLIERS[15]


def test_spec_validation():
    with pytest.raises(ValueError):
        ScenarioSpec("tepid", "2016", 0.1, "trip-end")
    with pytest.raises(ValueError):
        ScenarioSpec("mild", "2016", 0.1, "sometimes")
    with pytest.raises(ValueError):
        ScenarioSpec("mild", "2016", 1.5, "trip-end")
    assert ScenarioSpec("hot", "2030", 0.15, "off-peak").name == "hot-2030-p0.15-off-peak"


def test_zero_penetration_has_zero_deltas(small_data):
    res = run_scenario(ScenarioSpec("mild", "2016", 0.0, "most-likely"), small_data)
    assert res.ev_energy_mwh == 0.0
    assert all(d == (0.0, 0.0) for d in res.deltas.values())
    assert all(math.isnan(v) for v in res.marginal_egu_rates.values())


def test_same_spec_twice_is_identical(small_data):
    spec = ScenarioSpec("hot", "2030", 0.1, "most-likely", seed=3)
    a, b = run_scenario(spec, small_data), run_scenario(spec, small_data)
    assert summary_row(a) == summary_row(b)
    assert a.inventory.masses == b.inventory.masses
    assert [h.p_gen_mw for h in a.day_dispatch.hours] == [h.p_gen_mw for h in b.day_dispatch.hours]


def test_hot_2016_evs_reduce_co2(small_data):
    res = run_scenario(ScenarioSpec("hot", "2016", 0.2, "trip-end"), small_data)
    assert res.deltas[CO2][0] < 0
    assert res.deltas[CO2][0] == res.inventory.total(CO2) - res.baseline_inventory.total(CO2)


def test_ev_energy_matches_profile(small_data):
    res = run_scenario(ScenarioSpec("mild", "2016", 0.15, "off-peak"), small_data)
    assert res.ev_energy_mwh == pytest.approx(res.profile.total_kwh() / 1000 * 400.0, rel=1e-15)
    delivered = res.day_dispatch.total_load_mwh - res.baseline.day_dispatch.total_load_mwh
    assert delivered == pytest.approx(res.ev_energy_mwh, rel=1e-9)


def test_baseline_equals_zero_penetration_run(small_data):
    base = run_baseline("hot", "2016", small_data)
    zero = run_scenario(ScenarioSpec("hot", "2016", 0.0, "trip-end"), small_data, base)
    assert zero.inventory.masses == base.inventory.masses
    assert zero.day_dispatch.total_cost == base.day_dispatch.total_cost


def test_matrix_counts_and_sharing(small_data):
    specs = default_matrix(weather=("mild",), mixes=("2016", "2030"), penetrations=(0.05, 0.2))
    m = run_matrix(specs, small_data)
    assert m.complete and len(m.results) == len(specs) == 12
    assert set(m.baselines) == {("mild", "2016"), ("mild", "2030")}
    for r in m.results:
        assert r.baseline is m.baselines[(r.spec.weather, r.spec.mix_year)]
    assert [r.spec for r in m.results] == specs
    assert len(default_matrix()) == 48


def test_singleton_matrix(small_data):
    m = run_matrix([ScenarioSpec("mild", "2030", 0.05, "trip-end")], small_data)
    assert len(m.results) == 1 and not m.failures
    with pytest.raises(ValueError):
        run_matrix([], small_data)


def test_threaded_matrix_matches_sequential(small_data):
    specs = default_matrix(weather=("hot",), mixes=("2030",), penetrations=(0.1,))
    seq = run_matrix(specs, small_data, workers=1)
    par = run_matrix(specs, small_data, workers=3)
    assert [summary_row(r) for r in seq.results] == [summary_row(r) for r in par.results]


def test_ev_energy_equal_across_strategies(small_data):
    specs = default_matrix(weather=("mild", "hot"), mixes=("2016",), penetrations=(0.15,))
    m = run_matrix(specs, small_data)
    for w in ("mild", "hot"):
        e = [r.ev_energy_mwh for r in m.results if r.spec.weather == w]
        assert len(e) == 3 and max(e) - min(e) <= 1e-6


def test_reduction_grows_with_penetration(small_data):
    data = ScenarioData({"2016": copper_plate(small_data.cases["2016"])}, small_data.trips,
                        small_data.areas, small_data.energy_rates, small_data.onroad_rates,
                        small_data.egu_rates, vehicle_weight=small_data.vehicle_weight)
    m = run_matrix(default_matrix(weather=("mild",), mixes=("2016",), strategies=("trip-end",)), data)
    pct = [-r.deltas[CO2][1] for r in m.results]
    assert all(b >= a for a, b in zip(pct, pct[1:]))
    assert pct[0] > 0


def tight_data():
    # one LDV return trip per vehicle lands in the hot-afternoon peak hour
    tight = one_bus_case([(FuelType.NATURAL_GAS, 1000.0, [(1000.0, 30.0)])], 600.0, "tight")
    roomy = one_bus_case([(FuelType.NATURAL_GAS, 2000.0, [(2000.0, 30.0)])], 600.0, "roomy")
    trips = commuter_trips(100, out_min=480.0, back_min=900.0)
    return scenario_data({"2016": tight, "2030": roomy}, trips, range_shares={RangeClass.R300: 1.0},
                         vehicle_weight=1100.0, behavior=BehaviorParams(home_charger_kw=3.6))


def test_one_infeasible_scenario_is_isolated():
    m = run_matrix(default_matrix(), tight_data())
    assert len(m.results) == 47 and len(m.failures) == 1
    bad = m.failures[0]
    assert bad.spec == ScenarioSpec("hot", "2016", 0.2, "trip-end")
    assert "hour 15" in bad.message and "hot-2016-p0.2-trip-end" in bad.message
    assert len(m.baselines) == 4


def test_run_scenario_attaches_context():
    with pytest.raises(ScenarioError, match="hot-2016-p0.2-trip-end"):
        run_scenario(ScenarioSpec("hot", "2016", 0.2, "trip-end"), tight_data())


def test_unknown_mix_is_scenario_error(small_data):
    with pytest.raises(ScenarioError, match="2050"):
        run_scenario(ScenarioSpec("mild", "2050", 0.1, "trip-end"), small_data)


def test_report_files_round_trip(tmp_path, small_data):
    specs = default_matrix(weather=("mild",), mixes=("2030",), penetrations=(0.05, 0.1))
    m = run_matrix(specs, small_data)
    write_summary_csv(m.results, tmp_path / "s.csv")
    rows = read_summary_csv(tmp_path / "s.csv")
    assert len(rows) == 6
    for row, r in zip(rows, m.results):
        assert row["penetration"] == r.spec.penetration
        assert row["ev_energy_mwh"] == r.ev_energy_mwh
        assert row["marginal_rate_co2_g_per_mwh"] == r.marginal_egu_rates[CO2]
        assert row["total_co2_t"] == pytest.approx(r.inventory.total(CO2) / 1e6, rel=1e-15)
    write_baselines_csv(m.baselines, tmp_path / "b.csv")
    assert read_baselines_csv(tmp_path / "b.csv")[0]["mix_year"] == "2030"
    fails = run_matrix(default_matrix(), tight_data()).failures
    write_failures_csv(fails, tmp_path / "f.csv")
    assert read_failures_csv(tmp_path / "f.csv")[0]["penetration"] == 0.2
    r = m.results[-1]
    write_load_stack(r, tmp_path / "l.dat")
    cols = read_columns(tmp_path / "l.dat")
    assert cols["hour"] == list(range(24))
    assert cols["ev_mw"] == pytest.approx(
        [math.fsum(v for (b, h), v in r.ev_load_mw.items() if h == k) for k in range(24)])
    write_marginal_generation(r, tmp_path / "mg.dat")
    assert len(read_columns(tmp_path / "mg.dat")["hour"]) == 24
    write_emissions_by_scenario(m.results, tmp_path / "e.dat")
    assert read_columns(tmp_path / "e.dat")["scenario"] == [x.spec.name for x in m.results]
