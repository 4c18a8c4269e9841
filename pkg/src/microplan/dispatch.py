"""Chronological battery dispatch for a fixed sizing, plus an exhaustive DP check.

The greedy policy serves load from renewables first, charges with any
surplus and discharges on any deficit, each as hard as the power rating and
state-of-charge window allow. With a single store and unserved energy as
the only cost this policy is optimal; :func:`dp_oracle` verifies that on
small instances by searching every discretised storage trajectory.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .catalog import Catalog, ComponentSpec, ProjectParams
from .exceptions import ResourceLimitError, ScenarioError
from .resources import AvailabilitySeries, ScenarioSeries

# Absolute slack (kW summed over steps) on the unserved and reserve caps.
FEASIBILITY_ATOL = 1e-9

TRACE_COLUMNS = (
    "pv_used", "wt_used", "charge", "discharge", "discharging_flag",
    "bess_power", "stored_energy", "unserved", "unmet_reserve",
)


@dataclass(frozen=True, order=True)
class Sizing:
    """Unit counts plus the unit sizes they multiply.

    Ratings are always derived from counts and unit sizes, never stored.
    """

    n_pv: int
    n_wt: int
    n_bess: int
    pv_unit_kw: float = 0.1
    wt_unit_kw: float = 2.0
    bess_unit_kwh: float = 9.32
    bess_full_charge_hours: float = 5.0

    @classmethod
    def for_catalog(cls, catalog: Catalog, n_pv: int, n_wt: int, n_bess: int) -> "Sizing":
        return cls(
            int(n_pv), int(n_wt), int(n_bess),
            catalog.pv.unit_power, catalog.wt.unit_power,
            catalog.bess.unit_energy, catalog.bess.full_charge_hours,
        )

    @property
    def counts(self) -> tuple[int, int, int]:
        return (self.n_pv, self.n_wt, self.n_bess)

    @property
    def pv_rating(self) -> float:
        return self.n_pv * self.pv_unit_kw

    @property
    def wt_rating(self) -> float:
        return self.n_wt * self.wt_unit_kw

    @property
    def bess_energy(self) -> float:
        return self.n_bess * self.bess_unit_kwh

    @property
    def bess_power(self) -> float:
        return self.bess_energy / self.bess_full_charge_hours

    def with_counts(self, n_pv: int, n_wt: int, n_bess: int) -> "Sizing":
        return Sizing(n_pv, n_wt, n_bess, self.pv_unit_kw, self.wt_unit_kw,
                      self.bess_unit_kwh, self.bess_full_charge_hours)

    def to_dict(self) -> dict:
        return {
            "n_pv": self.n_pv, "n_wt": self.n_wt, "n_bess": self.n_bess,
            "pv_kw": self.pv_rating, "wt_kw": self.wt_rating,
            "bess_kwh": self.bess_energy, "bess_kw": self.bess_power,
            "pv_unit_kw": self.pv_unit_kw, "wt_unit_kw": self.wt_unit_kw,
            "bess_unit_kwh": self.bess_unit_kwh,
            "bess_full_charge_hours": self.bess_full_charge_hours,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Sizing":
        return cls(**{f: data[f] for f in (
            "n_pv", "n_wt", "n_bess", "pv_unit_kw", "wt_unit_kw",
            "bess_unit_kwh", "bess_full_charge_hours",
        )})


@dataclass(frozen=True, eq=False)
class DispatchResult:
    """Per-step powers (kW) and stored energy (kWh) for one simulated horizon."""

    pv_used: np.ndarray
    wt_used: np.ndarray
    charge: np.ndarray
    discharge: np.ndarray
    stored_energy: np.ndarray
    unserved: np.ndarray
    unmet_reserve: np.ndarray
    curtailed: np.ndarray
    initial_energy: float
    step_hours: float

    @property
    def discharging_flag(self) -> np.ndarray:
        return self.discharge > 0

    @property
    def bess_power(self) -> np.ndarray:
        return self.discharge - self.charge

    @property
    def unserved_energy(self) -> float:
        return float(self.unserved.sum() * self.step_hours)

    @property
    def unmet_reserve_energy(self) -> float:
        return float(self.unmet_reserve.sum() * self.step_hours)

    @property
    def served_energy(self) -> float:
        served = self.pv_used + self.wt_used + self.discharge - self.charge
        return float(served.sum() * self.step_hours)

    @property
    def curtailed_energy(self) -> float:
        return float(self.curtailed.sum() * self.step_hours)

    def summary(self) -> dict[str, float]:
        return {
            "unserved_energy_kwh": self.unserved_energy,
            "unmet_reserve_energy_kwh": self.unmet_reserve_energy,
            "served_energy_kwh": self.served_energy,
            "curtailed_energy_kwh": self.curtailed_energy,
            "charged_energy_kwh": float(self.charge.sum() * self.step_hours),
            "discharged_energy_kwh": float(self.discharge.sum() * self.step_hours),
            "final_stored_energy_kwh": float(self.stored_energy[-1]),
        }

    def write_csv(self, path: str | Path) -> None:
        """One row per step, columns named after the per-step fields."""
        columns = [getattr(self, name) for name in TRACE_COLUMNS]
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(("step",) + TRACE_COLUMNS)
            for t in range(len(self.pv_used)):
                row = [t]
                for col in columns:
                    value = col[t]
                    row.append(int(value) if col.dtype == bool else repr(float(value)))
                writer.writerow(row)


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    unserved_fraction: float
    unmet_reserve_fraction: float
    unserved_slack_kwh: float
    reserve_slack_kwh: float
    terminal_ok: bool = True


def _check_inputs(series: ScenarioSeries, avail: AvailabilitySeries, params: ProjectParams) -> None:
    if len(series) != len(avail):
        raise ScenarioError(f"availability has {len(avail)} steps but series has {len(series)}")
    if abs(series.step_hours - params.step_hours) > 1e-9 and len(series) > 1:
        raise ScenarioError(
            f"series spacing is {series.step_hours} h but params.step_hours is {params.step_hours}"
        )


def _initial_energy(sizing: Sizing, bess: ComponentSpec, params: ProjectParams) -> float:
    soc0 = bess.soc_max if params.initial_soc is None else params.initial_soc
    return soc0 * sizing.bess_energy


def _available(sizing: Sizing, avail: AvailabilitySeries) -> tuple[np.ndarray, np.ndarray]:
    return sizing.pv_rating * avail.pv_per_kw, sizing.n_wt * avail.wt_per_unit


def simulate_greedy(
    sizing: Sizing,
    series: ScenarioSeries,
    availability: AvailabilitySeries,
    bess_spec: ComponentSpec,
    params: ProjectParams,
) -> DispatchResult:
    """Run the greedy policy over the whole horizon.

    PV is used before wind, so curtailment falls on wind first. Stored
    energy starts at ``initial_soc`` (default ``soc_max``) of the rating.
    """
    _check_inputs(series, availability, params)
    pv_avail, wt_avail = _available(sizing, availability)
    load = series.load
    if not (np.all(np.isfinite(pv_avail)) and np.all(np.isfinite(wt_avail))):
        raise ScenarioError("availability contains non-finite values")

    dt = params.step_hours
    eta = bess_spec.one_way_efficiency
    e_min = bess_spec.soc_min * sizing.bess_energy
    e_max = bess_spec.soc_max * sizing.bess_energy
    p_rate = sizing.bess_power
    e = e0 = _initial_energy(sizing, bess_spec, params)

    n = len(load)
    out = {name: [0.0] * n for name in ("pv", "wt", "ch", "dch", "e", "ul", "curt")}
    pv_l, wt_l, load_l = pv_avail.tolist(), wt_avail.tolist(), load.tolist()
    for t in range(n):
        pv, wt, demand = pv_l[t], wt_l[t], load_l[t]
        ren = pv + wt
        if ren >= demand:
            ch = min(ren - demand, p_rate, (e_max - e) / (eta * dt))
            if ch < 0.0:
                ch = 0.0
            e = e + eta * ch * dt
            used = demand + ch
            pv_used = min(pv, used)
            out["pv"][t] = pv_used
            out["wt"][t] = min(wt, used - pv_used)
            out["ch"][t] = ch
            out["curt"][t] = ren - used
        else:
            deficit = demand - ren
            dch = min(deficit, p_rate, (e - e_min) * eta / dt)
            if dch < 0.0:
                dch = 0.0
            e = e - dch / eta * dt
            out["pv"][t] = pv
            out["wt"][t] = wt
            out["dch"][t] = dch
            out["ul"][t] = deficit - dch
        out["e"][t] = e

    return DispatchResult(
        pv_used=np.array(out["pv"]),
        wt_used=np.array(out["wt"]),
        charge=np.array(out["ch"]),
        discharge=np.array(out["dch"]),
        stored_energy=np.array(out["e"]),
        unserved=np.array(out["ul"]),
        unmet_reserve=unmet_reserve_profile(sizing, series, availability, params),
        curtailed=np.array(out["curt"]),
        initial_energy=e0,
        step_hours=dt,
    )


def greedy_unserved_total(
    pv_avail: list[float],
    wt_avail: list[float],
    load: list[float],
    e0: float,
    e_min: float,
    e_max: float,
    p_rate: float,
    eta: float,
    dt: float,
    budget: float = float("inf"),
) -> tuple[float, float]:
    """Sum of unserved power and final stored energy under the greedy policy.

    Same arithmetic as :func:`simulate_greedy` without recording the trace.
    Stops as soon as the running sum exceeds ``budget`` (the caller only
    needs to know the cap is broken).
    """
    e = e0
    total = 0.0
    for pv, wt, demand in zip(pv_avail, wt_avail, load):
        ren = pv + wt
        if ren >= demand:
            ch = min(ren - demand, p_rate, (e_max - e) / (eta * dt))
            if ch > 0.0:
                e = e + eta * ch * dt
        else:
            deficit = demand - ren
            dch = min(deficit, p_rate, (e - e_min) * eta / dt)
            if dch < 0.0:
                dch = 0.0
            e = e - dch / eta * dt
            total += deficit - dch
            if total > budget:
                return total, e
    return total, e


def unmet_reserve_profile(
    sizing: Sizing,
    series: ScenarioSeries,
    availability: AvailabilitySeries,
    params: ProjectParams,
) -> np.ndarray:
    """Reserve shortfall per step; credits the full battery power rating."""
    pv_avail, wt_avail = _available(sizing, availability)
    need = (1.0 + params.reserve_factor) * series.load
    return np.maximum(0.0, need - pv_avail - wt_avail - sizing.bess_power)


def check_feasible(
    result: DispatchResult, series: ScenarioSeries, params: ProjectParams
) -> FeasibilityReport:
    """Compare unserved load and unmet reserve totals against their caps."""
    if len(result.unserved) != len(series):
        raise ScenarioError("dispatch result and series lengths differ")
    total_load = float(series.load.sum())
    ul = float(result.unserved.sum())
    ur = float(result.unmet_reserve.sum())
    ul_slack = params.max_unserved_fraction * total_load - ul
    ur_slack = params.max_unmet_reserve_fraction * total_load - ur
    terminal_ok = (not params.cyclic_soc) or result.stored_energy[-1] >= result.initial_energy - 1e-9
    dt = params.step_hours
    return FeasibilityReport(
        feasible=bool(ul_slack >= -FEASIBILITY_ATOL and ur_slack >= -FEASIBILITY_ATOL and terminal_ok),
        unserved_fraction=ul / total_load if total_load > 0 else 0.0,
        unmet_reserve_fraction=ur / total_load if total_load > 0 else 0.0,
        unserved_slack_kwh=ul_slack * dt,
        reserve_slack_kwh=ur_slack * dt,
        terminal_ok=bool(terminal_ok),
    )


def _min_plus_convolve(values: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """``out[i + k] = min(values[i] + kernel[k])`` over all pairs."""
    out = np.full(len(values) + len(kernel) - 1, np.inf)
    short, long_ = (values, kernel) if len(values) <= len(kernel) else (kernel, values)
    n = len(long_)
    for i, v in enumerate(short):
        if np.isfinite(v):
            np.minimum(out[i:i + n], long_ + v, out=out[i:i + n])
    return out


def dp_oracle(
    sizing: Sizing,
    series: ScenarioSeries,
    availability: AvailabilitySeries,
    bess_spec: ComponentSpec,
    params: ProjectParams,
    soc_levels: int = 2001,
    max_work: float = 5e9,
) -> float:
    """Minimum total unserved energy (kWh) over a stored-energy lattice.

    Stored energy is restricted to ``soc_levels`` evenly spaced values in
    ``[soc_min, soc_max] * E_rate``. Every transition between levels that
    respects the power rating and the available renewable surplus is
    allowed, including wasteful ones (charging during a deficit, discharging
    into a surplus). Any lattice-feasible trajectory is also feasible for the
    continuous problem, so the result is an upper bound on the true minimum
    within roughly ``T * E_rate / (soc_levels - 1)``.
    """
    _check_inputs(series, availability, params)
    if soc_levels < 2:
        raise ValueError("soc_levels must be >= 2")
    n = len(series)
    if n * float(soc_levels) ** 2 > max_work:
        raise ResourceLimitError(
            f"DP over {n} steps x {soc_levels}^2 transitions exceeds max_work={max_work:g}"
        )
    pv_avail, wt_avail = _available(sizing, availability)
    ren_all = pv_avail + wt_avail
    load = series.load
    dt = params.step_hours

    if sizing.bess_energy == 0:
        return float(np.maximum(load - ren_all, 0.0).sum() * dt)

    eta = bess_spec.one_way_efficiency
    p_rate = sizing.bess_power
    e_min = bess_spec.soc_min * sizing.bess_energy
    e_max = bess_spec.soc_max * sizing.bess_energy
    step = (e_max - e_min) / (soc_levels - 1)
    e0 = _initial_energy(sizing, bess_spec, params)
    # Start on the highest lattice level not above the initial energy.
    start = int(np.clip(np.floor((e0 - e_min) / step + 1e-9), 0, soc_levels - 1))

    shifts = np.arange(-(soc_levels - 1), soc_levels)  # level change k
    delta = shifts * step
    charge = np.where(delta > 0, delta / (eta * dt), 0.0)
    discharge = np.where(delta < 0, -delta * eta / dt, 0.0)
    tol = 1e-9 * max(1.0, p_rate)
    power_ok = (charge <= p_rate + tol) & (discharge <= p_rate + tol)

    value = np.full(soc_levels, np.inf)
    value[start] = 0.0
    for t in range(n):
        ren, demand = ren_all[t], load[t]
        ok = power_ok & (charge <= ren + tol)
        unserved = np.maximum(0.0, demand - ren + charge - discharge) * dt
        kernel = np.where(ok, unserved, np.inf)
        finite_k = np.flatnonzero(np.isfinite(kernel))
        finite_v = np.flatnonzero(np.isfinite(value))
        k_lo, k_hi = finite_k[0], finite_k[-1]
        v_lo, v_hi = finite_v[0], finite_v[-1]
        conv = _min_plus_convolve(value[v_lo:v_hi + 1], kernel[k_lo:k_hi + 1])
        # conv[m] lands on level v_lo + (k_lo - (soc_levels - 1)) + m.
        offset = v_lo + k_lo - (soc_levels - 1)
        new = np.full(soc_levels, np.inf)
        lo = max(0, offset)
        hi = min(soc_levels, offset + len(conv))
        new[lo:hi] = conv[lo - offset:hi - offset]
        value = new

    if params.cyclic_soc:
        value = value[start:]
    return float(value.min())
