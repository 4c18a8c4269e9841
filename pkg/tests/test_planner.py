import math

import numpy as np
import pytest

from microplan.catalog import ProjectParams, catalog_economics, default_catalog, total_npc
from microplan.dispatch import Sizing
from microplan.exceptions import ConfigError, ResourceLimitError
from microplan.planner import (
    PlanSolution,
    SearchSpace,
    _Evaluator,
    autonomy_hours,
    brute_force_plan,
    evaluate,
    plan_autonomy,
    plan_optimal,
)
from microplan.resources import AvailabilitySeries, availability, synthesize_weather, with_renewable_gap

from builders import make_catalog, no_reserve, scenario, small_planning_case
from oracles import autonomy_oracle, ceil_div


def test_zero_load_picks_lower_corner():
    cat = make_catalog(n_max=(5, 5, 5))
    series = scenario([0, 800, 0], [0.0, 0.0, 0.0])
    sol = plan_optimal(cat, series, availability(series), SearchSpace.from_catalog(cat), ProjectParams())
    assert sol.feasible and sol.sizing.counts == (0, 0, 0) and sol.npc == 0


def test_single_step_pv_only_closed_form():
    cat = make_catalog(pv_kw=0.1, n_max=(60, 5, 5))
    series = scenario([500.0], [1.0])
    space = SearchSpace.from_catalog(cat, fix_wt=0, fix_bess=0)
    sol = plan_optimal(cat, series, availability(series), space, no_reserve())
    assert sol.sizing.counts == (ceil_div(1.0, 0.5 * 0.1), 0, 0) == (20, 0, 0)
    assert brute_force_plan(cat, series, availability(series), space, no_reserve()).sizing == sol.sizing


def test_matches_brute_force_on_random_cases():
    rng = np.random.default_rng(2024)
    for _ in range(12):
        cat, series, params = small_planning_case(rng)
        avail = availability(series)
        space = SearchSpace.from_catalog(cat)
        best = plan_optimal(cat, series, avail, space, params)
        ref = brute_force_plan(cat, series, avail, space, params)
        assert best.feasible == ref.feasible
        if best.feasible:
            assert best.npc == ref.npc and best.sizing == ref.sizing
            assert best.candidates_evaluated <= space.volume


def test_brute_force_edge_cases():
    cat = make_catalog(n_max=(2, 0, 1))
    series = scenario([0.0, 0.0], [5.0, 5.0])
    space = SearchSpace.from_catalog(cat)
    sol = brute_force_plan(cat, series, availability(series), space, no_reserve())
    assert not sol.feasible and sol.sizing.counts == space.upper
    assert not plan_optimal(cat, series, availability(series), space, no_reserve()).feasible

    one = SearchSpace((1, 1), (0, 0), (1, 1))
    series = scenario([1000.0, 0.0], [0.05, 0.05])
    sol = brute_force_plan(cat, series, availability(series), one, no_reserve())
    assert sol.feasible and sol.sizing.counts == (1, 0, 1)

    with pytest.raises(ResourceLimitError):
        brute_force_plan(cat, series, availability(series), SearchSpace((0, 100), (0, 100), (0, 100)),
                         no_reserve())


def test_feasibility_is_monotone():
    rng = np.random.default_rng(8)
    for _ in range(10):
        cat, series, params = small_planning_case(rng, steps=72)
        ev = _Evaluator(cat, series, availability(series), params)
        for _ in range(20):
            lo = tuple(int(rng.integers(0, h + 1)) for h in (cat.pv.n_max, cat.wt.n_max, cat.bess.n_max))
            hi = tuple(int(rng.integers(a, h + 1)) for a, h in zip(lo, (cat.pv.n_max, cat.wt.n_max, cat.bess.n_max)))
            if ev(lo):
                assert ev(hi)


def test_npc_monotone_in_caps():
    rng = np.random.default_rng(9)
    for _ in range(6):
        cat, series, params = small_planning_case(rng, steps=96)
        avail, space = availability(series), SearchSpace.from_catalog(cat)
        previous = math.inf
        for cap in (0.0, 0.001, 0.01, 0.05):
            sol = plan_optimal(cat, series, avail, space, params.replace(max_unserved_fraction=cap))
            npc = sol.npc if sol.feasible else math.inf
            assert npc <= previous
            previous = npc


def test_parallel_search_is_deterministic():
    rng = np.random.default_rng(77)
    cat, series, params = small_planning_case(rng, steps=120)
    avail, space = availability(series), SearchSpace.from_catalog(cat)
    a = plan_optimal(cat, series, avail, space, params)
    b = plan_optimal(cat, series, avail, space, params, n_jobs=2)
    assert a.sizing == b.sizing and a.npc == b.npc
    assert a.candidates_evaluated == b.candidates_evaluated
    assert a.to_json(include_wall_time=False) == b.to_json(include_wall_time=False)


def test_max_nodes_guard():
    cat = make_catalog(n_max=(50, 5, 5))
    series = scenario([1000.0] * 4, [2.0] * 4)
    with pytest.raises(ResourceLimitError):
        plan_optimal(cat, series, availability(series), SearchSpace.from_catalog(cat), no_reserve(), max_nodes=5)


@pytest.mark.parametrize("n, reference", [(1, 6.96), (3, 20.9), (6, 41.8), (7, 48.7), (9, 62.6)])
def test_autonomy_hours_within_two_percent(n, reference):
    value = autonomy_hours(default_catalog("la").bess, n, 19.01)
    assert value == pytest.approx(autonomy_oracle(n), rel=1e-12)
    assert abs(value - reference) / reference < 0.02


def test_autonomy_hours_basics():
    bess = default_catalog("la").bess
    assert autonomy_hours(bess, 0, 19.01) == 0
    assert autonomy_hours(bess, 3, 19.01) == pytest.approx(21.18, abs=0.01)
    assert autonomy_hours(bess, 4, 19.01) == pytest.approx(2 * autonomy_hours(bess, 2, 19.01))
    with pytest.raises(ValueError):
        autonomy_hours(bess, 1, 0.0)


def gap_scenario(days=20, gap_start=5, gap_days=3):
    base = synthesize_weather(days=days, seed=3)
    return with_renewable_gap(base, gap_start * 24, gap_days * 24)


def test_autonomy_infeasible_on_long_gap():
    cat = default_catalog("la")
    series = gap_scenario()
    sol = plan_autonomy(cat, series, availability(series), 1, SearchSpace.from_catalog(cat), ProjectParams())
    assert not sol.feasible and sol.sizing.n_bess == 1
    assert sol.autonomy_hours == pytest.approx(autonomy_oracle(1), rel=1e-6)


def test_autonomy_wind_superset_and_brute_force():
    cat = make_catalog(pv_kw=0.5, bess_kwh=5.0, n_max=(15, 3, 6))
    series = synthesize_weather(days=4, seed=12)
    series = scenario(series.ghi, series.load * 0.5, series.wind_speed)
    avail = availability(series)
    params = ProjectParams(max_unserved_fraction=0.01)
    full = SearchSpace.from_catalog(cat)
    with_wt = plan_autonomy(cat, series, avail, 4, full, params)
    pv_only = plan_autonomy(cat, series, avail, 4, SearchSpace.from_catalog(cat, fix_wt=0), params)
    assert with_wt.feasible
    assert with_wt.npc <= (pv_only.npc if pv_only.feasible else math.inf)
    ref = brute_force_plan(cat, series, avail, full.fix(bess=4), params)
    assert ref.sizing == with_wt.sizing and ref.npc == with_wt.npc


def test_evaluate_consistency():
    rng = np.random.default_rng(4)
    cat, series, params = small_planning_case(rng, steps=96)
    avail, space = availability(series), SearchSpace.from_catalog(cat)
    sol = plan_optimal(cat, series, avail, space, params)
    if sol.feasible:
        again = evaluate(sol.sizing, cat, series, avail, params)
        assert again.npc == sol.npc
        assert again.real_unserved_fraction == sol.real_unserved_fraction
        assert again.npc == pytest.approx(total_npc(sol.sizing, catalog_economics(cat, params)))

    tiny = evaluate(Sizing.for_catalog(cat, 0, 0, 0), cat, series, avail, params.replace(max_unserved_fraction=0.01))
    assert not tiny.feasible and tiny.real_unserved_fraction > 0.01


def test_solution_json_round_trip():
    cat = default_catalog("la")
    series = synthesize_weather(days=2)
    sol = evaluate(Sizing.for_catalog(cat, 130, 0, 4), cat, series, availability(series), ProjectParams())
    assert sol.npc == pytest.approx(188249, abs=1)
    back = PlanSolution.from_dict(__import__("json").loads(sol.to_json()))
    assert back == sol


def test_search_space_validation():
    cat = make_catalog(n_max=(5, 5, 5))
    with pytest.raises(ConfigError):
        SearchSpace((3, 2), (0, 0), (0, 0))
    with pytest.raises(ConfigError):
        SearchSpace.from_catalog(cat, fix_bess=9)
    space = SearchSpace.from_catalog(cat).fix(wt=0)
    assert space.wt == (0, 0) and space.volume == 36


def test_enlarging_bounds_never_raises_npc():
    rng = np.random.default_rng(21)
    for _ in range(6):
        cat, series, params = small_planning_case(rng, steps=72)
        avail = availability(series)
        full = SearchSpace.from_catalog(cat)
        cut = SearchSpace(*[(lo, max(lo, hi - int(rng.integers(0, 4)))) for lo, hi in (full.pv, full.wt, full.bess)])
        big, small = plan_optimal(cat, series, avail, full, params), plan_optimal(cat, series, avail, cut, params)
        assert (big.npc if big.feasible else math.inf) <= (small.npc if small.feasible else math.inf)


def test_equal_cost_ties_prefer_fewer_turbines():
    # PV and turbine units cost the same, so (1, 0, 0) and (0, 1, 0) tie.
    cat = make_catalog(pv_kw=1.0, wt_kw=1.0, n_max=(3, 3, 0), costs=(1000.0, 1000.0, 1000.0))
    series = scenario([1000.0], [1.0], wind=[12.0])
    avail = AvailabilitySeries([1.0], [1.0])
    sol = plan_optimal(cat, series, avail, SearchSpace.from_catalog(cat), no_reserve())
    assert sol.sizing.counts == (1, 0, 0)
    assert brute_force_plan(cat, series, avail, SearchSpace.from_catalog(cat), no_reserve()).sizing.counts == (1, 0, 0)
