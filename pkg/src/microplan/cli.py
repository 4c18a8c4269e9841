"""Command-line entry point.

Exit codes: 0 success, 1 usage, 2 input validation, 3 infeasible,
4 resource limit.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .catalog import ProjectParams, default_catalog, load_config
from .dispatch import Sizing, simulate_greedy
from .exceptions import ConfigError, ResourceLimitError, ScenarioError
from .milp import build_model, read_solution, validate_solution, write_lp
from .planner import PlanSolution, SearchSpace, brute_force_plan, evaluate, plan_autonomy, plan_optimal
from .report import compare_report
from .resources import (
    ScenarioSeries,
    availability,
    daily_energy,
    default_power_curve,
    read_load,
    read_power_curve,
    read_scenario,
    synthesize_load,
    synthesize_weather,
    window_for_daily_energy,
    with_renewable_gap,
    write_load,
    write_scenario,
)

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_RESOURCE = 0, 1, 2, 3, 4
MODES = ("plan", "autonomy", "evaluate", "export-milp", "synth-load", "synth-weather", "compare")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="microplan", description="Size PV, wind and battery units for an islanded microgrid.")
    p.add_argument("--config", help="JSON file supplying any of the options below (flags win)")
    p.add_argument("--mode", choices=MODES, default="plan")
    p.add_argument("--weather", help="weather CSV (timestamp, ghi_wm2, wind_ms[, load_kw])")
    p.add_argument("--load", help="load CSV (timestamp, load_kw)")
    p.add_argument("--curve", help="turbine power curve CSV (speed_ms, power_kw)")
    p.add_argument("--catalog", help="catalog JSON ('components' and optionally 'project')")
    p.add_argument("--battery", choices=("la", "lfp"), default="la", help="bundled catalog when --catalog is absent")
    p.add_argument("--params", help="project parameter JSON ('project' section)")
    p.add_argument("--unmet-cap", type=float, help="max unserved fraction of total load")
    p.add_argument("--reserve-cap", type=float, help="max unmet-reserve fraction of total load")
    p.add_argument("--fix-bess", type=int, help="pin the battery count (autonomy mode)")
    p.add_argument("--no-wt", action="store_true", help="PV-only: pin the turbine count to 0")
    p.add_argument("--brute-force", action="store_true", help="exhaustive search instead of best-first")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for candidate evaluation")
    p.add_argument("--seed", type=int, default=2018, help="seed for the synthetic scenario")
    p.add_argument("--days", type=int, default=365, help="length of synthetic series in days")
    p.add_argument("--gap-start-day", type=int, help="zero out renewables from this day ...")
    p.add_argument("--gap-days", type=int, default=0, help="... for this many days")
    p.add_argument("--n-pv", type=int, help="evaluate mode: PV count")
    p.add_argument("--n-wt", type=int, help="evaluate mode: turbine count")
    p.add_argument("--n-bess", type=int, help="evaluate mode: battery count")
    p.add_argument("--solution", help="export-milp: solution file to validate against the model")
    p.add_argument("--solutions", nargs="+", help="compare mode: solution JSON files")
    p.add_argument("--labels", nargs="+", help="compare mode: column labels")
    p.add_argument("--base-kw", type=float, default=0.43)
    p.add_argument("--peak-kw", type=float, default=1.33)
    p.add_argument("--daily-kwh", type=float, default=19.01, help="synth-load: target daily energy")
    p.add_argument("--window-start", type=float, default=8.0, help="synth-load: hour the peak starts")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    first, _ = parser.parse_known_args(argv)
    if first.config:
        try:
            data = json.loads(Path(first.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {first.config}: {exc}") from exc
        known = {a.dest for a in parser._actions}
        data = {k.replace("-", "_"): v for k, v in data.items()}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        parser.set_defaults(**data)
    args = parser.parse_args(argv)
    for name in ("unmet_cap", "reserve_cap"):
        value = getattr(args, name)
        if value is not None and not 0 <= value <= 1:
            parser.error(f"--{name.replace('_', '-')} must lie in [0, 1]")
    return args


def _load_inputs(args):
    catalog, params = None, None
    if args.catalog:
        catalog, params = load_config(args.catalog)
    if catalog is None:
        catalog = default_catalog(args.battery)
    if args.params:
        _, params = load_config(args.params)
    params = params or ProjectParams()
    changes = {}
    if args.unmet_cap is not None:
        changes["max_unserved_fraction"] = args.unmet_cap
    if args.reserve_cap is not None:
        changes["max_unmet_reserve_fraction"] = args.reserve_cap
    params = params.replace(**changes) if changes else params

    if args.weather:
        series = read_scenario(args.weather, args.load)
    else:
        series = synthesize_weather(days=args.days, seed=args.seed)
        if args.load:
            series = ScenarioSeries(series.timestamps, series.ghi, series.wind_speed, read_load(args.load))
    if args.gap_start_day is not None and args.gap_days > 0:
        steps_per_day = int(round(24 / params.step_hours))
        series = with_renewable_gap(series, args.gap_start_day * steps_per_day, args.gap_days * steps_per_day)
    curve = read_power_curve(args.curve) if args.curve else default_power_curve()
    avail = availability(series, params.pv_derate, curve)
    return catalog, params, series, avail


def _write_solution(sol: PlanSolution, label: str, out: Path, catalog, series, params, avail) -> None:
    (out / "solution.json").write_text(sol.to_json(include_wall_time=False) + "\n")
    text, csv_text = compare_report([sol], [label])
    (out / "report.txt").write_text(text)
    (out / "report.csv").write_text(csv_text)
    simulate_greedy(sol.sizing, series, avail, catalog.bess, params).write_csv(out / "dispatch.csv")
    sys.stdout.write(text)


def run(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if args.mode == "synth-load":
        window = (args.window_start, args.window_start + window_for_daily_energy(args.base_kw, args.peak_kw, args.daily_kwh))
        if window[1] > 24:
            raise ConfigError("peak window runs past midnight; lower --window-start")
        load = synthesize_load(args.base_kw, args.peak_kw, window, args.days)
        write_load(range(len(load)), load, out / "load.csv")
        print(f"wrote {out / 'load.csv'}: {args.days} day(s), {daily_energy(args.base_kw, args.peak_kw, window):.2f} kWh/day")
        return EXIT_OK

    if args.mode == "synth-weather":
        series = synthesize_weather(days=args.days, seed=args.seed)
        write_scenario(series, out / "weather.csv", out / "load.csv")
        print(f"wrote {out / 'weather.csv'} and {out / 'load.csv'} ({len(series)} steps, seed {args.seed})")
        return EXIT_OK

    if args.mode == "compare":
        if not args.solutions:
            raise ConfigError("compare mode needs --solutions")
        sols = [PlanSolution.from_dict(json.loads(Path(f).read_text())) for f in args.solutions]
        text, csv_text = compare_report(sols, args.labels or [Path(f).stem for f in args.solutions])
        (out / "compare.txt").write_text(text)
        (out / "compare.csv").write_text(csv_text)
        sys.stdout.write(text)
        return EXIT_OK

    catalog, params, series, avail = _load_inputs(args)
    space = SearchSpace.from_catalog(catalog, fix_wt=0 if args.no_wt else None)

    if args.mode == "export-milp":
        model = build_model(catalog, series, avail, space, params)
        write_lp(model, out / "model.lp")
        counts = model.counts_by_kind()
        print(f"wrote {out / 'model.lp'}: {counts} variables, {len(model.constraints)} rows")
        if args.solution:
            report = validate_solution(model, read_solution(args.solution))
            summary = {"feasible": report.feasible, "max_violation": report.max_violation,
                       "objective": report.objective, "violations": report.violations[:50]}
            (out / "validation.json").write_text(json.dumps(summary, indent=2) + "\n")
            print(f"solution {'satisfies' if report.feasible else 'violates'} the model "
                  f"(max violation {report.max_violation:.3g}, objective {report.objective:,.2f})")
            return EXIT_OK if report.feasible else EXIT_INFEASIBLE
        return EXIT_OK

    if args.mode == "evaluate":
        if None in (args.n_pv, args.n_wt, args.n_bess):
            raise ConfigError("evaluate mode needs --n-pv, --n-wt and --n-bess")
        sizing = Sizing.for_catalog(catalog, args.n_pv, args.n_wt, args.n_bess)
        sol = evaluate(sizing, catalog, series, avail, params)
        _write_solution(sol, "evaluated", out, catalog, series, params, avail)
        return EXIT_OK

    if args.mode == "autonomy":
        if args.fix_bess is None:
            raise ConfigError("autonomy mode needs --fix-bess")
        sol = plan_autonomy(catalog, series, avail, args.fix_bess, space, params, n_jobs=args.jobs)
    elif args.brute_force:
        if args.fix_bess is not None:
            space = space.fix(bess=args.fix_bess)
        sol = brute_force_plan(catalog, series, avail, space, params)
    else:
        if args.fix_bess is not None:
            space = space.fix(bess=args.fix_bess)
        sol = plan_optimal(catalog, series, avail, space, params, n_jobs=args.jobs)

    if not sol.feasible:
        (out / "solution.json").write_text(sol.to_json(include_wall_time=False) + "\n")
        print("infeasible: even the largest configuration in the search space misses the caps", file=sys.stderr)
        return EXIT_INFEASIBLE
    _write_solution(sol, args.mode, out, catalog, series, params, avail)
    return EXIT_OK


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except ConfigError as exc:
        print(f"microplan: {exc}", file=sys.stderr)
        return EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except (ConfigError, ScenarioError, ValueError) as exc:
        print(f"microplan: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ResourceLimitError as exc:
        print(f"microplan: resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
