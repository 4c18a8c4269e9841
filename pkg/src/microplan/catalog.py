"""Component catalog, project parameters and per-unit discounted economics.

All money is carried as float in a single (unspecified) currency; rounding
only happens when reports are formatted.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from enum import Enum
from importlib import resources as _pkg_resources
from pathlib import Path
from typing import Any, Mapping

from .exceptions import ConfigError


class ComponentKind(str, Enum):
    PV = "pv"
    WT = "wt"
    BESS = "bess"


@dataclass(frozen=True)
class ComponentSpec:
    """One purchasable unit (a PV string, a turbine or a battery string).

    ``unit_power`` is set for PV and WT, ``unit_energy`` for BESS. The state
    of charge window, ``full_charge_hours`` and ``one_way_efficiency`` only
    matter for BESS.
    """

    kind: ComponentKind
    capital_per_unit: float
    lifespan_years: int
    om_fraction: float = 0.015
    replacement_per_unit: float | None = None
    unit_power: float | None = None
    unit_energy: float | None = None
    n_min: int = 0
    n_max: int = 0
    soc_min: float = 0.0
    soc_max: float = 1.0
    full_charge_hours: float = 1.0
    one_way_efficiency: float = 1.0
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "kind", ComponentKind(self.kind))
        if self.replacement_per_unit is None:
            object.__setattr__(self, "replacement_per_unit", self.capital_per_unit)
        if self.kind is ComponentKind.BESS:
            if self.unit_energy is None or self.unit_power is not None:
                raise ConfigError("bess components need unit_energy and no unit_power")
            if not self.unit_energy > 0:
                raise ConfigError("unit_energy must be positive")
        else:
            if self.unit_power is None or self.unit_energy is not None:
                raise ConfigError(f"{self.kind.value} components need unit_power and no unit_energy")
            if not self.unit_power > 0:
                raise ConfigError("unit_power must be positive")
        if not 0.0 <= self.soc_min < self.soc_max <= 1.0:
            raise ConfigError(f"need 0 <= soc_min < soc_max <= 1, got {self.soc_min}, {self.soc_max}")
        if not 0.0 < self.one_way_efficiency <= 1.0:
            raise ConfigError("one_way_efficiency must lie in (0, 1]")
        if not self.full_charge_hours > 0:
            raise ConfigError("full_charge_hours must be positive")
        if int(self.lifespan_years) != self.lifespan_years or self.lifespan_years < 1:
            raise ConfigError("lifespan_years must be an integer >= 1")
        if not 0 <= self.n_min <= self.n_max:
            raise ConfigError(f"need 0 <= n_min <= n_max, got {self.n_min}, {self.n_max}")
        for name in ("capital_per_unit", "replacement_per_unit", "om_fraction"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ConfigError(f"{name} must be finite and non-negative")

    @property
    def unit_bess_power(self) -> float:
        """Power rating of one battery unit, energy over full-charge hours."""
        if self.kind is not ComponentKind.BESS:
            raise AttributeError("unit_bess_power is only defined for bess")
        return self.unit_energy / self.full_charge_hours

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["kind"] = self.kind.value
        return {k: v for k, v in out.items() if v is not None}


@dataclass(frozen=True)
class ProjectParams:
    horizon_years: int = 25
    discount_rate: float = 0.05
    reserve_factor: float = 0.15
    max_unserved_fraction: float = 0.0
    max_unmet_reserve_fraction: float = 0.0
    step_hours: float = 1.0
    pv_derate: float = 1.0
    # None means start full (soc_max).
    initial_soc: float | None = None
    # Require end-of-horizon stored energy >= initial stored energy.
    cyclic_soc: bool = False

    def __post_init__(self):
        if int(self.horizon_years) != self.horizon_years or self.horizon_years < 1:
            raise ConfigError("horizon_years must be an integer >= 1")
        if not self.discount_rate >= 0:
            raise ConfigError("discount_rate must be >= 0")
        for name in ("reserve_factor", "max_unserved_fraction", "max_unmet_reserve_fraction"):
            if not getattr(self, name) >= 0:
                raise ConfigError(f"{name} must be >= 0")
        if not self.step_hours > 0:
            raise ConfigError("step_hours must be positive")
        if not 0 < self.pv_derate <= 1.2:
            raise ConfigError("pv_derate must lie in (0, 1.2]")
        if self.initial_soc is not None and not 0 <= self.initial_soc <= 1:
            raise ConfigError("initial_soc must lie in [0, 1]")

    def replace(self, **changes) -> "ProjectParams":
        return ProjectParams(**{**asdict(self), **changes})

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class UnitEconomics:
    capital: float
    replacement_npv: float
    om_npv: float
    salvage_npv: float
    unit_npc: float
    n_replacements: int

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class Catalog:
    """The three component types a plan chooses counts for."""

    pv: ComponentSpec
    wt: ComponentSpec
    bess: ComponentSpec

    def __post_init__(self):
        for key in ("pv", "wt", "bess"):
            spec = getattr(self, key)
            if spec.kind.value != key:
                raise ConfigError(f"catalog slot {key!r} holds a {spec.kind.value} component")

    def __iter__(self):
        yield from (self.pv, self.wt, self.bess)

    def replace(self, **changes) -> "Catalog":
        return Catalog(**{"pv": self.pv, "wt": self.wt, "bess": self.bess, **changes})

    def to_dict(self) -> dict[str, Any]:
        return {"pv": self.pv.to_dict(), "wt": self.wt.to_dict(), "bess": self.bess.to_dict()}


def _discount(rate: float, year: int) -> float:
    return (1.0 + rate) ** -year


def replacement_years(spec: ComponentSpec, params: ProjectParams) -> list[int]:
    """Years at which a unit is re-bought, strictly inside the horizon."""
    life, horizon = int(spec.lifespan_years), int(params.horizon_years)
    return list(range(life, horizon, life))


def unit_economics(spec: ComponentSpec, params: ProjectParams) -> UnitEconomics:
    """Discounted capital, replacement, O&M and salvage of a single unit.

    Replacements are bought at every multiple of the lifespan before the
    final year. O&M is ``om_fraction * capital`` paid at the end of every
    year. Salvage refunds the unused share of the last purchase, discounted
    from the final year.
    """
    rate, horizon, life = params.discount_rate, int(params.horizon_years), int(spec.lifespan_years)
    years = replacement_years(spec, params)
    n_rep = len(years)
    capital = float(spec.capital_per_unit)

    replacement = math.fsum(spec.replacement_per_unit * _discount(rate, y) for y in years)
    om = math.fsum(spec.om_fraction * capital * _discount(rate, y) for y in range(1, horizon + 1))
    remaining = (1 + n_rep) * life - horizon
    salvage = max(0.0, capital * remaining / (life * (1.0 + rate) ** horizon))

    npc = capital + replacement + om - salvage
    if not npc > 0:
        raise ConfigError(
            f"{spec.kind.value} unit NPC is {npc!r}; cost-ordered search needs positive unit costs"
        )
    return UnitEconomics(
        capital=capital,
        replacement_npv=replacement,
        om_npv=om,
        salvage_npv=salvage,
        unit_npc=npc,
        n_replacements=n_rep,
    )


def catalog_economics(catalog: Catalog, params: ProjectParams) -> dict[str, UnitEconomics]:
    return {spec.kind.value: unit_economics(spec, params) for spec in catalog}


def total_npc(counts, econ: Mapping[str, UnitEconomics]) -> float:
    """Net present cost of a sizing: sum of count times unit NPC.

    ``counts`` is a ``(n_pv, n_wt, n_bess)`` tuple, anything with those
    attributes, or a mapping keyed by ``"pv"``, ``"wt"``, ``"bess"``.
    """
    if isinstance(counts, Mapping):
        n = (counts.get("pv", 0), counts.get("wt", 0), counts.get("bess", 0))
    elif isinstance(counts, tuple) and len(counts) == 3:
        n = counts
    else:
        n = (counts.n_pv, counts.n_wt, counts.n_bess)
    # Fixed summation order keeps equal sizings bit-identical across callers.
    return n[0] * econ["pv"].unit_npc + n[1] * econ["wt"].unit_npc + n[2] * econ["bess"].unit_npc


def capital_recovery_factor(params: ProjectParams) -> float:
    rate, horizon = params.discount_rate, params.horizon_years
    if rate == 0:
        raise ValueError("capital recovery factor is undefined for a zero discount rate; use 1/Y")
    growth = (1.0 + rate) ** horizon
    return rate * growth / (growth - 1.0)


def lcoe(npc: float, annual_served_energy: float, params: ProjectParams) -> float:
    """Cost per served kWh: NPC spread over undiscounted lifetime energy."""
    if not annual_served_energy > 0:
        raise ValueError("annual served energy must be positive")
    return npc / (params.horizon_years * annual_served_energy)


def annualized_lcoe(npc: float, annual_served_energy: float, params: ProjectParams) -> float:
    """CRF-based alternative, reported alongside but not used for ranking."""
    if not annual_served_energy > 0:
        raise ValueError("annual served energy must be positive")
    if params.discount_rate == 0:
        return npc / (params.horizon_years * annual_served_energy)
    return npc * capital_recovery_factor(params) / annual_served_energy


# -- configuration files -------------------------------------------------

_SPEC_KEYS = {f.name for f in fields(ComponentSpec)}
_PARAM_KEYS = {f.name for f in fields(ProjectParams)}


def component_from_dict(data: Mapping[str, Any], kind: str | None = None) -> ComponentSpec:
    data = dict(data)
    if kind is not None:
        data.setdefault("kind", kind)
    unknown = set(data) - _SPEC_KEYS
    if unknown:
        raise ConfigError(f"unknown component keys: {sorted(unknown)}")
    if data.get("kind") == "bess" and "one_way_efficiency" not in data:
        raise ConfigError("bess entries must set one_way_efficiency explicitly")
    try:
        return ComponentSpec(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def params_from_dict(data: Mapping[str, Any]) -> ProjectParams:
    unknown = set(data) - _PARAM_KEYS
    if unknown:
        raise ConfigError(f"unknown project keys: {sorted(unknown)}")
    return ProjectParams(**data)


def catalog_from_dict(data: Mapping[str, Any]) -> Catalog:
    comps = data.get("components", data)
    try:
        return Catalog(**{k: component_from_dict(comps[k], k) for k in ("pv", "wt", "bess")})
    except KeyError as exc:
        raise ConfigError(f"catalog is missing component {exc.args[0]!r}") from exc


def _read_json(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def load_config(path: str | Path) -> tuple[Catalog | None, ProjectParams | None]:
    """Read a JSON file holding ``components`` and/or ``project`` sections."""
    data = _read_json(path)
    catalog = catalog_from_dict(data) if "components" in data else None
    params = params_from_dict(data["project"]) if "project" in data else None
    if catalog is None and params is None:
        raise ConfigError(f"{path}: expected a 'components' or 'project' section")
    return catalog, params


def dump_config(path: str | Path, catalog: Catalog | None = None, params: ProjectParams | None = None) -> None:
    data: dict[str, Any] = {}
    if catalog is not None:
        data["components"] = catalog.to_dict()
    if params is not None:
        data["project"] = params.to_dict()
    Path(path).write_text(json.dumps(data, indent=2) + "\n")


def default_catalog(battery: str = "la") -> Catalog:
    """Bundled catalog with the lead-acid (``"la"``) or LFP (``"lfp"``) battery."""
    if battery not in ("la", "lfp"):
        raise ValueError("battery must be 'la' or 'lfp'")
    text = _pkg_resources.files("microplan.data").joinpath(f"catalog_{battery}.json").read_text()
    return catalog_from_dict(json.loads(text))


def default_params(**overrides) -> ProjectParams:
    return ProjectParams(**overrides)
