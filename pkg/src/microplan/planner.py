"""Least-NPC integer sizing by cost-ordered lattice search.

Candidates ``(n_pv, n_wt, n_bess)`` are expanded from the lower corner of
the search box in order of increasing NPC. Unit NPCs are positive, so every
lattice point is reached only after its cheaper ``-1`` neighbours and the
first feasible candidate popped is the cheapest feasible one. Feasibility
is monotone in every count (more units never hurt the greedy dispatch or
the reserve margin), which makes an infeasible upper corner a certificate
that the whole box is infeasible.
"""
from __future__ import annotations

import heapq
import itertools
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Any

import numpy as np

from .catalog import (
    Catalog,
    ComponentSpec,
    ProjectParams,
    UnitEconomics,
    catalog_economics,
    lcoe,
    total_npc,
)
from .dispatch import (
    FEASIBILITY_ATOL,
    Sizing,
    check_feasible,
    greedy_unserved_total,
    simulate_greedy,
    unmet_reserve_profile,
    _check_inputs,
)
from .exceptions import ConfigError, ResourceLimitError
from .resources import AvailabilitySeries, ScenarioSeries

logger = logging.getLogger(__name__)

HOURS_PER_YEAR = 8760.0
_KINDS = ("pv", "wt", "bess")


@dataclass(frozen=True)
class SearchSpace:
    """Inclusive count bounds per component."""

    pv: tuple[int, int]
    wt: tuple[int, int]
    bess: tuple[int, int]

    def __post_init__(self):
        for kind in _KINDS:
            lo, hi = getattr(self, kind)
            if not 0 <= lo <= hi:
                raise ConfigError(f"{kind} bounds must satisfy 0 <= lo <= hi, got {(lo, hi)}")
            object.__setattr__(self, kind, (int(lo), int(hi)))

    @classmethod
    def from_catalog(
        cls,
        catalog: Catalog,
        fix_pv: int | None = None,
        fix_wt: int | None = None,
        fix_bess: int | None = None,
    ) -> "SearchSpace":
        bounds = {}
        for kind, fixed in zip(_KINDS, (fix_pv, fix_wt, fix_bess)):
            spec: ComponentSpec = getattr(catalog, kind)
            if fixed is None:
                bounds[kind] = (spec.n_min, spec.n_max)
            elif not spec.n_min <= fixed <= spec.n_max:
                raise ConfigError(f"fixed {kind} count {fixed} outside [{spec.n_min}, {spec.n_max}]")
            else:
                bounds[kind] = (fixed, fixed)
        return cls(**bounds)

    def fix(self, **counts: int) -> "SearchSpace":
        bounds = {k: getattr(self, k) for k in _KINDS}
        for kind, value in counts.items():
            lo, hi = bounds[kind]
            if not lo <= value <= hi:
                raise ConfigError(f"fixed {kind} count {value} outside [{lo}, {hi}]")
            bounds[kind] = (value, value)
        return SearchSpace(**bounds)

    @property
    def lower(self) -> tuple[int, int, int]:
        return (self.pv[0], self.wt[0], self.bess[0])

    @property
    def upper(self) -> tuple[int, int, int]:
        return (self.pv[1], self.wt[1], self.bess[1])

    @property
    def volume(self) -> int:
        return int(np.prod([hi - lo + 1 for lo, hi in (self.pv, self.wt, self.bess)]))

    def contains(self, counts: tuple[int, int, int]) -> bool:
        return all(lo <= n <= hi for n, (lo, hi) in zip(counts, (self.pv, self.wt, self.bess)))


@dataclass
class PlanSolution:
    """Outcome of a planning run or of auditing one sizing."""

    feasible: bool
    sizing: Sizing
    npc: float
    lcoe: float | None
    breakdown: dict[str, dict[str, Any]]
    real_unserved_fraction: float
    real_unmet_reserve_fraction: float
    dispatch_summary: dict[str, float]
    candidates_evaluated: int = 0
    wall_time: float = 0.0
    mode: str = "evaluate"
    autonomy_hours: float | None = None

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["sizing"] = self.sizing.to_dict()
        return out

    def to_json(self, include_wall_time: bool = True) -> str:
        data = self.to_dict()
        if not include_wall_time:
            data.pop("wall_time")
        return json.dumps(data, indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "PlanSolution":
        data = dict(data)
        data["sizing"] = Sizing.from_dict(data["sizing"])
        data.setdefault("wall_time", 0.0)
        return cls(**data)


class _Evaluator:
    """Feasibility test for one candidate; picklable so workers can share it."""

    def __init__(self, catalog: Catalog, series: ScenarioSeries, avail: AvailabilitySeries,
                 params: ProjectParams):
        _check_inputs(series, avail, params)
        self.catalog = catalog
        self.series = series
        self.avail = avail
        self.params = params
        total_load = float(series.load.sum())
        self.ul_budget = params.max_unserved_fraction * total_load + FEASIBILITY_ATOL
        self.ur_budget = params.max_unmet_reserve_fraction * total_load + FEASIBILITY_ATOL
        self.load_list = series.load.tolist()

    def sizing(self, counts: tuple[int, int, int]) -> Sizing:
        return Sizing.for_catalog(self.catalog, *counts)

    def __call__(self, counts: tuple[int, int, int]) -> bool:
        sizing = self.sizing(counts)
        ur = unmet_reserve_profile(sizing, self.series, self.avail, self.params)
        if float(ur.sum()) > self.ur_budget:
            return False
        bess = self.catalog.bess
        e_rate = sizing.bess_energy
        soc0 = bess.soc_max if self.params.initial_soc is None else self.params.initial_soc
        e0 = soc0 * e_rate
        ul, e_end = greedy_unserved_total(
            (sizing.pv_rating * self.avail.pv_per_kw).tolist(),
            (sizing.n_wt * self.avail.wt_per_unit).tolist(),
            self.load_list,
            e0, bess.soc_min * e_rate, bess.soc_max * e_rate,
            sizing.bess_power, bess.one_way_efficiency, self.params.step_hours,
            budget=self.ul_budget,
        )
        if ul > self.ul_budget:
            return False
        if self.params.cyclic_soc and e_end < e0 - 1e-9:
            return False
        return True


_WORKER: _Evaluator | None = None


def _init_worker(evaluator: _Evaluator) -> None:
    global _WORKER
    _WORKER = evaluator


def _worker_eval(counts: tuple[int, int, int]) -> bool:
    return _WORKER(counts)


def _cost_key(counts: tuple[int, int, int], econ: dict[str, UnitEconomics]) -> tuple:
    n_pv, n_wt, n_bess = counts
    cost = total_npc({"pv": n_pv, "wt": n_wt, "bess": n_bess}, econ)
    # Equal costs resolve to the lexicographically smallest (n_wt, n_bess, n_pv).
    return (cost, n_wt, n_bess, n_pv)


def _require_positive(econ: dict[str, UnitEconomics]) -> None:
    for kind, e in econ.items():
        if not e.unit_npc > 0:
            raise ConfigError(f"{kind} unit NPC must be positive, got {e.unit_npc}")


def evaluate(
    sizing: Sizing,
    catalog: Catalog,
    series: ScenarioSeries,
    availability: AvailabilitySeries,
    params: ProjectParams,
    mode: str = "evaluate",
) -> PlanSolution:
    """Economics, full dispatch and cap check for a single sizing."""
    econ = catalog_economics(catalog, params)
    result = simulate_greedy(sizing, series, availability, catalog.bess, params)
    report = check_feasible(result, series, params)
    npc = total_npc(sizing, econ)

    served = float((series.load - result.unserved).sum() * params.step_hours)
    horizon_hours = len(series) * params.step_hours
    annual_served = served * HOURS_PER_YEAR / horizon_hours
    lcoe_value = lcoe(npc, annual_served, params) if annual_served > 0 else None

    breakdown = {}
    for kind, count in zip(_KINDS, sizing.counts):
        breakdown[kind] = {
            "count": count,
            "unit": econ[kind].to_dict(),
            "total_npc": count * econ[kind].unit_npc,
        }
    summary = result.summary()
    summary["annual_served_energy_kwh"] = annual_served
    summary["total_load_kwh"] = float(series.load.sum() * params.step_hours)
    return PlanSolution(
        feasible=report.feasible,
        sizing=sizing,
        npc=npc,
        lcoe=lcoe_value,
        breakdown=breakdown,
        real_unserved_fraction=report.unserved_fraction,
        real_unmet_reserve_fraction=report.unmet_reserve_fraction,
        dispatch_summary=summary,
        mode=mode,
    )


def plan_optimal(
    catalog: Catalog,
    series: ScenarioSeries,
    availability: AvailabilitySeries,
    space: SearchSpace,
    params: ProjectParams,
    n_jobs: int = 1,
    max_nodes: int = 5_000_000,
    mode: str = "optimal",
) -> PlanSolution:
    """Cheapest feasible sizing in ``space``.

    Returns a solution with ``feasible=False`` (evaluated at the upper corner)
    when no sizing satisfies the caps. ``n_jobs > 1`` evaluates batches of
    the cheapest pending candidates in worker processes; results are still
    consumed in cost order, so the answer does not depend on ``n_jobs``.
    ``max_nodes`` bounds the number of queued candidates.
    """
    start = time.perf_counter()
    econ = catalog_economics(catalog, params)
    _require_positive(econ)
    evaluator = _Evaluator(catalog, series, availability, params)

    if not evaluator(space.upper):
        logger.info("upper corner %s infeasible; search space has no feasible sizing", space.upper)
        sol = evaluate(evaluator.sizing(space.upper), catalog, series, availability, params, mode)
        sol.candidates_evaluated = 1
        sol.wall_time = time.perf_counter() - start
        return sol

    pool = None
    if n_jobs > 1:
        pool = ProcessPoolExecutor(max_workers=n_jobs, initializer=_init_worker, initargs=(evaluator,))
    cache: dict[tuple[int, int, int], bool] = {}
    lower = space.lower
    heap = [(_cost_key(lower, econ), lower)]
    queued = {lower}
    popped = 0
    try:
        while heap:
            key, counts = heapq.heappop(heap)
            popped += 1
            if counts not in cache:
                if pool is None:
                    cache[counts] = evaluator(counts)
                else:
                    batch = [counts] + [
                        c for _, c in heapq.nsmallest(4 * n_jobs, heap) if c not in cache
                    ]
                    for c, ok in zip(batch, pool.map(_worker_eval, batch)):
                        cache[c] = ok
            if cache[counts]:
                logger.info("optimum %s after %d candidates", counts, popped)
                sol = evaluate(evaluator.sizing(counts), catalog, series, availability, params, mode)
                sol.candidates_evaluated = popped
                sol.wall_time = time.perf_counter() - start
                return sol
            for axis in range(3):
                nxt = list(counts)
                nxt[axis] += 1
                nxt = tuple(nxt)
                if nxt in queued or not space.contains(nxt):
                    continue
                queued.add(nxt)
                heapq.heappush(heap, (_cost_key(nxt, econ), nxt))
            if len(queued) > max_nodes:
                raise ResourceLimitError(
                    f"search queued more than max_nodes={max_nodes} candidates; "
                    "tighten the count bounds or raise max_nodes"
                )
    finally:
        if pool is not None:
            pool.shutdown()
    # Unreachable when the upper corner is feasible; kept as a guard.
    raise RuntimeError("search exhausted without reaching the feasible upper corner")


def brute_force_plan(
    catalog: Catalog,
    series: ScenarioSeries,
    availability: AvailabilitySeries,
    space: SearchSpace,
    params: ProjectParams,
    max_volume: int = 200_000,
    mode: str = "brute-force",
) -> PlanSolution:
    """Evaluate every lattice point; reference answer for :func:`plan_optimal`."""
    if space.volume > max_volume:
        raise ResourceLimitError(f"lattice volume {space.volume} exceeds max_volume={max_volume}")
    start = time.perf_counter()
    econ = catalog_economics(catalog, params)
    _require_positive(econ)
    evaluator = _Evaluator(catalog, series, availability, params)

    best_key, best = None, None
    for counts in itertools.product(*(range(lo, hi + 1) for lo, hi in (space.pv, space.wt, space.bess))):
        if evaluator(counts):
            key = _cost_key(counts, econ)
            if best_key is None or key < best_key:
                best_key, best = key, counts
    target = best if best is not None else space.upper
    sol = evaluate(evaluator.sizing(target), catalog, series, availability, params, mode)
    sol.candidates_evaluated = space.volume
    sol.wall_time = time.perf_counter() - start
    return sol


def autonomy_hours(bess_spec: ComponentSpec, n_bess: int, daily_load: float) -> float:
    """Hours the usable battery window covers the average load."""
    if not daily_load > 0:
        raise ValueError("daily_load must be positive")
    energy = n_bess * bess_spec.unit_energy
    return 24.0 * (bess_spec.soc_max - bess_spec.soc_min) * energy / daily_load


def mean_daily_load(series: ScenarioSeries, params: ProjectParams) -> float:
    days = len(series) * params.step_hours / 24.0
    return float(series.load.sum() * params.step_hours / days)


def plan_autonomy(
    catalog: Catalog,
    series: ScenarioSeries,
    availability: AvailabilitySeries,
    n_bess_fixed: int,
    space: SearchSpace,
    params: ProjectParams,
    **kwargs,
) -> PlanSolution:
    """:func:`plan_optimal` with the battery count pinned to ``n_bess_fixed``."""
    pinned = space.fix(bess=n_bess_fixed)
    sol = plan_optimal(catalog, series, availability, pinned, params, mode="autonomy", **kwargs)
    daily = mean_daily_load(series, params)
    sol.autonomy_hours = autonomy_hours(catalog.bess, n_bess_fixed, daily) if daily > 0 else None
    return sol
