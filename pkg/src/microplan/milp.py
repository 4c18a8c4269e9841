"""Explicit mixed-integer model of the sizing problem, LP-file export and audit.

Variable names (``t`` runs from 1 to T)::

    n_pv, n_wt, n_bess        integer unit counts
    ppv_t, pwt_t              utilised PV / wind power (kW)
    pch_t, pdch_t             battery charge / discharge power (kW)
    soc_t                     stored energy at the end of step t (kWh)
    pul_t, pur_t              unserved load / unmet reserve (kW)
    u_t                       1 when the battery may discharge in step t

Rows per step::

    pv_cap_t    ppv_t - Punit_pv * p_pv_t * n_pv            <= 0
    wt_cap_t    pwt_t - p_wt_t * n_wt                        <= 0
    dch_cap_t   pdch_t - Pbess_unit * n_bess                 <= 0
    dch_mode_t  pdch_t - Pmax * u_t                          <= 0
    ch_cap_t    pch_t - Pbess_unit * n_bess                  <= 0
    ch_mode_t   pch_t + Pmax * u_t                           <= Pmax
    soc_bal_t   soc_t - soc_{t-1} - eta*dt*pch_t + dt/eta*pdch_t = 0
    soc_min_t   soc_t - SOCmin * Eunit * n_bess              >= 0
    soc_max_t   soc_t - SOCmax * Eunit * n_bess              <= 0
    balance_t   ppv_t + pwt_t + pdch_t - pch_t + pul_t       >= load_t
    reserve_t   pur_t + Punit_pv*p_pv_t*n_pv + p_wt_t*n_wt + Pbess_unit*n_bess >= (1+k_res)*load_t

plus ``unserved_cap`` and ``reserve_cap`` over all steps and, for cyclic
studies, ``terminal_soc``. ``soc_0`` is not a variable: it is
``SOC0 * Eunit * n_bess`` folded into ``soc_bal_1``. ``Pmax`` is the battery
power at the upper count bound, which keeps the charge/discharge exclusion
linear.
"""
from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .catalog import Catalog, ProjectParams, catalog_economics
from .dispatch import DispatchResult, Sizing
from .exceptions import MicroplanError, ResourceLimitError
from .planner import SearchSpace
from .resources import AvailabilitySeries, ScenarioSeries

logger = logging.getLogger(__name__)

ROWS_PER_STEP = 11
STEP_FAMILIES = ("ppv", "pwt", "pch", "pdch", "soc", "pul", "pur")
SENSES = ("<=", ">=", "=")


class MissingVariableError(MicroplanError, KeyError):
    pass


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str = "continuous"  # continuous | integer | binary
    lower: float = 0.0
    upper: float = math.inf

    def __post_init__(self):
        if self.kind not in ("continuous", "integer", "binary"):
            raise ValueError(f"unknown variable kind {self.kind!r}")
        if self.kind == "binary" and (self.lower, self.upper) != (0.0, 1.0):
            raise ValueError(f"binary {self.name} must have bounds [0, 1]")


@dataclass(frozen=True)
class Constraint:
    name: str
    coeffs: dict[str, float]
    sense: str
    rhs: float

    def __post_init__(self):
        if self.sense not in SENSES:
            raise ValueError(f"unknown sense {self.sense!r}")


@dataclass
class LinearModel:
    variables: list[Variable] = field(default_factory=list)
    objective: dict[str, float] = field(default_factory=dict)
    constraints: list[Constraint] = field(default_factory=list)
    objective_constant: float = 0.0

    def __post_init__(self):
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise ValueError("variable names must be unique")
        declared = set(names)
        rows = set()
        for c in self.constraints:
            if c.name in rows:
                raise ValueError(f"duplicate constraint name {c.name}")
            rows.add(c.name)
            undeclared = set(c.coeffs) - declared
            if undeclared:
                raise ValueError(f"{c.name} references undeclared {sorted(undeclared)[:3]}")
        if set(self.objective) - declared:
            raise ValueError("objective references undeclared variables")

    def variable(self, name: str) -> Variable:
        for v in self.variables:
            if v.name == name:
                return v
        raise MissingVariableError(name)

    def counts_by_kind(self) -> dict[str, int]:
        out = {"integer": 0, "continuous": 0, "binary": 0}
        for v in self.variables:
            out[v.kind] += 1
        return out

    def objective_value(self, assignment: Mapping[str, float]) -> float:
        return self.objective_constant + math.fsum(
            c * assignment[name] for name, c in self.objective.items()
        )


def _nz(coeffs: dict[str, float]) -> dict[str, float]:
    return {k: float(v) for k, v in coeffs.items() if v != 0}


def build_model(
    catalog: Catalog,
    series: ScenarioSeries,
    availability: AvailabilitySeries,
    space: SearchSpace,
    params: ProjectParams,
    max_rows: int = 2_000_000,
) -> LinearModel:
    """Assemble the full sizing MILP for ``series``."""
    T = len(series)
    n_rows = ROWS_PER_STEP * T + 3
    if n_rows > max_rows:
        raise ResourceLimitError(f"model would have {n_rows} rows, above max_rows={max_rows}")
    econ = catalog_economics(catalog, params)
    bess = catalog.bess
    dt, eta = params.step_hours, bess.one_way_efficiency
    p_unit_bess = bess.unit_bess_power
    p_max = space.bess[1] * p_unit_bess
    soc0 = bess.soc_max if params.initial_soc is None else params.initial_soc
    pv_coef = catalog.pv.unit_power * availability.pv_per_kw
    wt_coef = availability.wt_per_unit
    load = series.load

    variables = [
        Variable("n_pv", "integer", float(space.pv[0]), float(space.pv[1])),
        Variable("n_wt", "integer", float(space.wt[0]), float(space.wt[1])),
        Variable("n_bess", "integer", float(space.bess[0]), float(space.bess[1])),
    ]
    for fam in STEP_FAMILIES:
        variables.extend(Variable(f"{fam}_{t}") for t in range(1, T + 1))
    variables.extend(Variable(f"u_{t}", "binary", 0.0, 1.0) for t in range(1, T + 1))

    rows: list[Constraint] = []
    for i in range(T):
        t = i + 1
        prev = {f"soc_{t - 1}": -1.0} if t > 1 else {"n_bess": -soc0 * bess.unit_energy}
        rows += [
            Constraint(f"pv_cap_{t}", _nz({f"ppv_{t}": 1.0, "n_pv": -pv_coef[i]}), "<=", 0.0),
            Constraint(f"wt_cap_{t}", _nz({f"pwt_{t}": 1.0, "n_wt": -wt_coef[i]}), "<=", 0.0),
            Constraint(f"dch_cap_{t}", _nz({f"pdch_{t}": 1.0, "n_bess": -p_unit_bess}), "<=", 0.0),
            Constraint(f"dch_mode_{t}", _nz({f"pdch_{t}": 1.0, f"u_{t}": -p_max}), "<=", 0.0),
            Constraint(f"ch_cap_{t}", _nz({f"pch_{t}": 1.0, "n_bess": -p_unit_bess}), "<=", 0.0),
            Constraint(f"ch_mode_{t}", _nz({f"pch_{t}": 1.0, f"u_{t}": p_max}), "<=", p_max),
            Constraint(
                f"soc_bal_{t}",
                _nz({f"soc_{t}": 1.0, **prev, f"pch_{t}": -eta * dt, f"pdch_{t}": dt / eta}),
                "=", 0.0,
            ),
            Constraint(f"soc_min_{t}", _nz({f"soc_{t}": 1.0, "n_bess": -bess.soc_min * bess.unit_energy}), ">=", 0.0),
            Constraint(f"soc_max_{t}", _nz({f"soc_{t}": 1.0, "n_bess": -bess.soc_max * bess.unit_energy}), "<=", 0.0),
            Constraint(
                f"balance_{t}",
                {f"ppv_{t}": 1.0, f"pwt_{t}": 1.0, f"pdch_{t}": 1.0, f"pch_{t}": -1.0, f"pul_{t}": 1.0},
                ">=", float(load[i]),
            ),
            Constraint(
                f"reserve_{t}",
                _nz({f"pur_{t}": 1.0, "n_pv": pv_coef[i], "n_wt": wt_coef[i], "n_bess": p_unit_bess}),
                ">=", float((1.0 + params.reserve_factor) * load[i]),
            ),
        ]
    total_load = float(load.sum())
    rows.append(Constraint(
        "unserved_cap", {f"pul_{t}": 1.0 for t in range(1, T + 1)}, "<=",
        params.max_unserved_fraction * total_load,
    ))
    rows.append(Constraint(
        "reserve_cap", {f"pur_{t}": 1.0 for t in range(1, T + 1)}, "<=",
        params.max_unmet_reserve_fraction * total_load,
    ))
    if params.cyclic_soc:
        rows.append(Constraint(
            "terminal_soc", {f"soc_{T}": 1.0, "n_bess": -soc0 * bess.unit_energy}, ">=", 0.0,
        ))

    objective = {"n_pv": econ["pv"].unit_npc, "n_wt": econ["wt"].unit_npc, "n_bess": econ["bess"].unit_npc}
    model = LinearModel(variables, objective, rows)
    counts = model.counts_by_kind()
    logger.info(
        "built model: %d integer + %d continuous (%d per step) + %d binary variables, %d rows",
        counts["integer"], counts["continuous"], len(STEP_FAMILIES), counts["binary"], len(rows),
    )
    return model


def assignment_from_dispatch(
    sizing: Sizing, result: DispatchResult
) -> dict[str, float]:
    """Map a simulated dispatch onto model variable names."""
    out = {"n_pv": float(sizing.n_pv), "n_wt": float(sizing.n_wt), "n_bess": float(sizing.n_bess)}
    columns = {
        "ppv": result.pv_used, "pwt": result.wt_used, "pch": result.charge,
        "pdch": result.discharge, "soc": result.stored_energy, "pul": result.unserved,
        "pur": result.unmet_reserve, "u": result.discharging_flag.astype(float),
    }
    for fam, values in columns.items():
        for t, v in enumerate(values.tolist(), start=1):
            out[f"{fam}_{t}"] = float(v)
    return out


@dataclass
class ValidationReport:
    feasible: bool
    max_violation: float
    objective: float
    residuals: dict[str, float]
    violations: list[tuple[str, float]]

    def violation_of(self, row: str) -> float:
        for name, amount in self.violations:
            if name == row:
                return amount
        return 0.0


def validate_solution(
    model: LinearModel, assignment: Mapping[str, float], tolerance: float = 1e-6
) -> ValidationReport:
    """Signed residual (lhs - rhs) for every row, and violations beyond ``tolerance``.

    Variable bounds and integrality are checked too and reported under
    ``bound:<name>`` / ``integrality:<name>``.
    """
    missing = [v.name for v in model.variables if v.name not in assignment]
    if missing:
        raise MissingVariableError(f"assignment lacks {len(missing)} variable(s), e.g. {missing[:3]}")

    residuals: dict[str, float] = {}
    violations: list[tuple[str, float]] = []
    for c in model.constraints:
        lhs = math.fsum(coef * assignment[name] for name, coef in c.coeffs.items())
        r = lhs - c.rhs
        residuals[c.name] = r
        amount = {"<=": r, ">=": -r, "=": abs(r)}[c.sense]
        if amount > tolerance:
            violations.append((c.name, amount))
    for v in model.variables:
        x = assignment[v.name]
        amount = max(v.lower - x, x - v.upper, 0.0)
        if amount > tolerance:
            violations.append((f"bound:{v.name}", amount))
        if v.kind != "continuous" and abs(x - round(x)) > tolerance:
            violations.append((f"integrality:{v.name}", abs(x - round(x))))
    max_violation = max((a for _, a in violations), default=0.0)
    return ValidationReport(
        feasible=not violations,
        max_violation=max_violation,
        objective=model.objective_value(assignment),
        residuals=residuals,
        violations=violations,
    )


# -- LP text format -------------------------------------------------------

_TERMS_PER_LINE = 8


def _num(x: float) -> str:
    if x == math.inf:
        return "+inf"
    if x == -math.inf:
        return "-inf"
    return repr(float(x))


def _expr_lines(coeffs: Mapping[str, float]) -> list[str]:
    terms = []
    for name, c in coeffs.items():
        sign = "-" if c < 0 else "+"
        terms.append(f"{sign} {_num(abs(c))} {name}")
    return [" ".join(terms[i:i + _TERMS_PER_LINE]) for i in range(0, len(terms), _TERMS_PER_LINE)]


def export_lp(model: LinearModel) -> str:
    """CPLEX-style LP text. Output depends only on the model, so it is reproducible."""
    counts = model.counts_by_kind()
    out = [
        f"\\ sizing MILP: {counts['integer']} integer, {counts['continuous']} continuous, "
        f"{counts['binary']} binary variables; {len(model.constraints)} rows",
        "Minimize",
    ]
    obj = _expr_lines(model.objective) or [""]
    if model.objective_constant:
        obj[-1] += f" + {_num(model.objective_constant)} __constant"
    out.append((" obj: " + obj[0]).rstrip())
    out.extend("   " + line for line in obj[1:])
    out.append("Subject To")
    for c in model.constraints:
        lines = _expr_lines(c.coeffs)
        if not lines:
            raise ValueError(f"constraint {c.name} has no terms")
        lines[-1] += f" {c.sense} {_num(c.rhs)}"
        out.append(f" {c.name}: " + lines[0])
        out.extend("   " + line for line in lines[1:])
    out.append("Bounds")
    for v in model.variables:
        if v.kind == "binary":
            continue
        if v.lower == v.upper:
            out.append(f" {v.name} = {_num(v.lower)}")
        else:
            out.append(f" {_num(v.lower)} <= {v.name} <= {_num(v.upper)}")
    generals = [v.name for v in model.variables if v.kind == "integer"]
    binaries = [v.name for v in model.variables if v.kind == "binary"]
    if generals:
        out.append("Generals")
        out.extend(" " + n for n in generals)
    if binaries:
        out.append("Binaries")
        out.extend(" " + n for n in binaries)
    out.append("End")
    return "\n".join(out) + "\n"


def write_lp(model: LinearModel, path: str | Path) -> None:
    Path(path).write_text(export_lp(model))


_SECTION = {
    "minimize": "obj", "minimum": "obj", "min": "obj",
    "subject to": "st", "such that": "st", "st": "st", "s.t.": "st",
    "bounds": "bounds", "bound": "bounds",
    "generals": "gen", "general": "gen", "gen": "gen",
    "binaries": "bin", "binary": "bin", "bin": "bin",
    "end": "end",
}


def _parse_float(tok: str) -> float:
    return {"+inf": math.inf, "inf": math.inf, "-inf": -math.inf}.get(tok.lower(), None) or float(tok)


def _parse_expr(tokens: list[str]) -> dict[str, float]:
    coeffs: dict[str, float] = {}
    i = 0
    while i < len(tokens):
        sign = 1.0
        if tokens[i] in "+-":
            sign = -1.0 if tokens[i] == "-" else 1.0
            i += 1
        try:
            coef = float(tokens[i])
            i += 1
        except ValueError:
            coef = 1.0
        name = tokens[i]
        i += 1
        coeffs[name] = coeffs.get(name, 0.0) + sign * coef
    return coeffs


def read_lp(text: str) -> LinearModel:
    """Parse the LP subset written by :func:`export_lp`."""
    section = None
    obj_tokens: list[str] = []
    rows: list[tuple[str, list[str]]] = []
    bounds: list[list[str]] = []
    generals: list[str] = []
    binaries: list[str] = []
    for raw in text.splitlines():
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        key = line.lower()
        if key in _SECTION:
            section = _SECTION[key]
            continue
        if section == "obj":
            if ":" in line:
                line = line.split(":", 1)[1]
            obj_tokens += line.split()
        elif section == "st":
            m = re.match(r"^([^\s:]+)\s*:(.*)$", line)
            if m:
                rows.append((m.group(1), m.group(2).split()))
            else:
                rows[-1][1].extend(line.split())
        elif section == "bounds":
            bounds.append(line.split())
        elif section == "gen":
            generals += line.split()
        elif section == "bin":
            binaries += line.split()

    constant = 0.0
    if "__constant" in obj_tokens:
        idx = obj_tokens.index("__constant")
        constant = float(obj_tokens[idx - 1]) * (-1.0 if obj_tokens[idx - 2] == "-" else 1.0)
        del obj_tokens[idx - 2:idx + 1]
    objective = _parse_expr(obj_tokens)

    constraints = []
    for name, toks in rows:
        sense, rhs = toks[-2], _parse_float(toks[-1])
        constraints.append(Constraint(name, _parse_expr(toks[:-2]), sense, rhs))

    gen_set, bin_set = set(generals), set(binaries)
    variables = []
    for toks in bounds:
        if len(toks) == 3 and toks[1] == "=":
            name, lo, hi = toks[0], _parse_float(toks[2]), _parse_float(toks[2])
        elif len(toks) == 5:
            lo, name, hi = _parse_float(toks[0]), toks[2], _parse_float(toks[4])
        else:
            raise ValueError(f"unsupported bound line: {' '.join(toks)}")
        kind = "integer" if name in gen_set else "continuous"
        variables.append(Variable(name, kind, lo, hi))
    variables.extend(Variable(name, "binary", 0.0, 1.0) for name in binaries)
    declared = {v.name for v in variables}
    seen = list(objective) + [n for c in constraints for n in c.coeffs]
    for name in dict.fromkeys(seen):
        if name not in declared:
            kind = "binary" if name in bin_set else ("integer" if name in gen_set else "continuous")
            variables.append(Variable(name, kind, 0.0, 1.0 if kind == "binary" else math.inf))
            declared.add(name)
    return LinearModel(variables, objective, constraints, constant)


def read_solution(path: str | Path) -> dict[str, float]:
    """Read ``name value`` lines, or JSON (``{"variables": {...}}`` or a flat object)."""
    text = Path(path).read_text()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        data = json.loads(text)
        data = data.get("variables", data)
        return {str(k): float(v) for k, v in data.items()}
    out = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        name, value = line.split()[:2]
        out[name] = float(value)
    return out


def write_solution(assignment: Mapping[str, float], path: str | Path) -> None:
    Path(path).write_text("".join(f"{k} {v!r}\n" for k, v in assignment.items()))


# -- optional cross-check with scipy's HiGHS ------------------------------

def solve_highs(model: LinearModel, time_limit: float = 60.0) -> tuple[float, dict[str, float]] | None:
    """Solve ``model`` with :func:`scipy.optimize.milp`.

    Returns ``(objective, assignment)`` or ``None`` if the solver proves the
    model infeasible. Meant for small instances in tests and audits.
    """
    from scipy.optimize import Bounds, LinearConstraint, milp
    from scipy.sparse import coo_matrix

    index = {v.name: i for i, v in enumerate(model.variables)}
    n = len(index)
    c = np.zeros(n)
    for name, coef in model.objective.items():
        c[index[name]] = coef
    rows, cols, vals, lo, hi = [], [], [], [], []
    for r, con in enumerate(model.constraints):
        for name, coef in con.coeffs.items():
            rows.append(r)
            cols.append(index[name])
            vals.append(coef)
        lo.append(con.rhs if con.sense in (">=", "=") else -np.inf)
        hi.append(con.rhs if con.sense in ("<=", "=") else np.inf)
    A = coo_matrix((vals, (rows, cols)), shape=(len(model.constraints), n)).tocsr()
    integrality = np.array([0 if v.kind == "continuous" else 1 for v in model.variables])
    bounds = Bounds([v.lower for v in model.variables], [v.upper for v in model.variables])
    res = milp(c, constraints=LinearConstraint(A, lo, hi), integrality=integrality,
               bounds=bounds, options={"time_limit": time_limit})
    if res.status == 2:
        return None
    if res.x is None:
        raise RuntimeError(f"HiGHS failed: {res.message}")
    assignment = {v.name: float(x) for v, x in zip(model.variables, res.x)}
    return float(res.fun) + model.objective_constant, assignment
