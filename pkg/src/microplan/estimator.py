"""scikit-learn style wrappers around the planning pipeline.

``AvailabilityTransformer`` turns a scenario into per-unit availability;
``MicrogridPlanner.fit`` sizes the system for a scenario and ``predict``
dispatches the fitted sizing over another one. Both follow the estimator
conventions (constructor only stores parameters, fitted state ends in an
underscore) so ``get_params``/``set_params``/``clone`` work.
"""
from __future__ import annotations

from pathlib import Path
from typing import Mapping

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .catalog import Catalog, ProjectParams, default_catalog, load_config, params_from_dict, catalog_from_dict
from .dispatch import DispatchResult, simulate_greedy
from .exceptions import ConfigError, InfeasiblePlanError, ScenarioError
from .planner import (
    PlanSolution,
    SearchSpace,
    brute_force_plan,
    evaluate,
    plan_autonomy,
    plan_optimal,
)
from .resources import AvailabilitySeries, PowerCurve, ScenarioSeries, availability, default_power_curve


def check_scenario(X, step_hours: float | None = None) -> ScenarioSeries:
    """Coerce ``X`` into a validated :class:`ScenarioSeries`.

    Accepts a ``ScenarioSeries``, a DataFrame (or mapping of columns) with
    ``ghi_wm2``, ``wind_ms`` and ``load_kw`` and optionally ``timestamp``, or
    an ``(n, 3)`` array with those three columns in that order.
    """
    if isinstance(X, ScenarioSeries):
        series = X
    elif hasattr(X, "columns") or isinstance(X, Mapping):
        cols = {c: np.asarray(X[c]) for c in ("ghi_wm2", "wind_ms", "load_kw") if c in X}
        missing = {"ghi_wm2", "wind_ms", "load_kw"} - set(cols)
        if missing:
            raise ScenarioError(f"scenario is missing column(s) {sorted(missing)}")
        if "timestamp" in X:
            ts = np.asarray(X["timestamp"])
        elif hasattr(X, "index") and np.issubdtype(np.asarray(X.index).dtype, np.datetime64):
            ts = np.asarray(X.index).astype("datetime64[s]")
        else:
            ts = np.arange(len(cols["load_kw"]), dtype=np.int64)
        series = ScenarioSeries(ts, cols["ghi_wm2"], cols["wind_ms"], cols["load_kw"])
    else:
        arr = np.asarray(X, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise ScenarioError("array input must have shape (n_steps, 3): ghi, wind, load")
        series = ScenarioSeries.hourly(arr[:, 0], arr[:, 1], arr[:, 2])
    if step_hours is not None and len(series) > 1 and abs(series.step_hours - step_hours) > 1e-9:
        raise ScenarioError(f"scenario spacing {series.step_hours} h does not match step_hours={step_hours}")
    return series


def check_catalog(catalog) -> Catalog:
    if catalog is None:
        return default_catalog("la")
    if isinstance(catalog, Catalog):
        return catalog
    if isinstance(catalog, str) and catalog in ("la", "lfp"):
        return default_catalog(catalog)
    if isinstance(catalog, (str, Path)):
        loaded, _ = load_config(catalog)
        if loaded is None:
            raise ConfigError(f"{catalog} has no 'components' section")
        return loaded
    if isinstance(catalog, Mapping):
        return catalog_from_dict(catalog)
    raise ConfigError(f"cannot interpret {type(catalog).__name__} as a catalog")


def check_params(params) -> ProjectParams:
    if params is None:
        return ProjectParams()
    if isinstance(params, ProjectParams):
        return params
    if isinstance(params, (str, Path)):
        _, loaded = load_config(params)
        if loaded is None:
            raise ConfigError(f"{params} has no 'project' section")
        return loaded
    if isinstance(params, Mapping):
        return params_from_dict(params)
    raise ConfigError(f"cannot interpret {type(params).__name__} as project parameters")


class AvailabilityTransformer(TransformerMixin, BaseEstimator):
    """Scenario -> per-kW PV and per-turbine wind availability."""

    def __init__(self, derate: float = 1.0, power_curve: PowerCurve | None = None):
        self.derate = derate
        self.power_curve = power_curve

    def fit(self, X, y=None):
        check_scenario(X)
        if not 0 < self.derate <= 1.2:
            raise ValueError("derate must lie in (0, 1.2]")
        self.power_curve_ = self.power_curve if self.power_curve is not None else default_power_curve()
        return self

    def transform(self, X) -> AvailabilitySeries:
        check_is_fitted(self, "power_curve_")
        return availability(check_scenario(X), self.derate, self.power_curve_)


class MicrogridPlanner(BaseEstimator):
    """Least-NPC PV/wind/battery sizing.

    Parameters
    ----------
    catalog : Catalog, path, mapping, "la", "lfp" or None
        Component catalog; ``None`` uses the bundled lead-acid catalog.
    params : ProjectParams, path, mapping or None
        Project economics and caps; ``None`` uses the defaults.
    fix_pv, fix_wt, fix_bess : int or None
        Pin a count. ``fix_bess`` switches to autonomy mode; ``fix_wt=0``
        gives a PV-only plan.
    method : {"best-first", "brute-force"}
        Search strategy. Both return the same optimum.
    n_jobs : int
        Worker processes for candidate evaluation (best-first only).
    power_curve : PowerCurve or None
        Turbine curve; ``None`` uses the bundled GV-2kW table.

    Attributes
    ----------
    solution_ : PlanSolution
    sizing_ : Sizing
    catalog_, params_ : validated inputs used by ``fit``
    """

    def __init__(
        self,
        catalog=None,
        params=None,
        fix_pv: int | None = None,
        fix_wt: int | None = None,
        fix_bess: int | None = None,
        method: str = "best-first",
        n_jobs: int = 1,
        power_curve: PowerCurve | None = None,
    ):
        self.catalog = catalog
        self.params = params
        self.fix_pv = fix_pv
        self.fix_wt = fix_wt
        self.fix_bess = fix_bess
        self.method = method
        self.n_jobs = n_jobs
        self.power_curve = power_curve

    def _availability(self, series: ScenarioSeries) -> AvailabilitySeries:
        return availability(series, self.params_.pv_derate, self.power_curve)

    def fit(self, X, y=None):
        if self.method not in ("best-first", "brute-force"):
            raise ValueError(f"unknown method {self.method!r}")
        self.catalog_ = check_catalog(self.catalog)
        self.params_ = check_params(self.params)
        series = check_scenario(X, self.params_.step_hours)
        avail = self._availability(series)
        space = SearchSpace.from_catalog(self.catalog_, self.fix_pv, self.fix_wt)
        if self.method == "brute-force":
            if self.fix_bess is not None:
                space = space.fix(bess=self.fix_bess)
            solution = brute_force_plan(self.catalog_, series, avail, space, self.params_)
        elif self.fix_bess is not None:
            solution = plan_autonomy(self.catalog_, series, avail, self.fix_bess, space, self.params_,
                                     n_jobs=self.n_jobs)
        else:
            solution = plan_optimal(self.catalog_, series, avail, space, self.params_, n_jobs=self.n_jobs)
        self.solution_ = solution
        if not solution.feasible:
            raise InfeasiblePlanError("infeasible: no sizing in the search space meets the caps", solution)
        self.sizing_ = solution.sizing
        return self

    def predict(self, X) -> DispatchResult:
        """Dispatch the fitted sizing over scenario ``X``."""
        check_is_fitted(self, "sizing_")
        series = check_scenario(X, self.params_.step_hours)
        return simulate_greedy(self.sizing_, series, self._availability(series), self.catalog_.bess, self.params_)

    def evaluate(self, X) -> PlanSolution:
        """Full economics and cap check of the fitted sizing on scenario ``X``."""
        check_is_fitted(self, "sizing_")
        series = check_scenario(X, self.params_.step_hours)
        return evaluate(self.sizing_, self.catalog_, series, self._availability(series), self.params_)

    def score(self, X, y=None) -> float:
        """Negative NPC if the fitted sizing meets the caps on ``X``, else ``-inf``."""
        sol = self.evaluate(X)
        return -sol.npc if sol.feasible else float("-inf")
