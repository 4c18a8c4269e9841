"""Side-by-side result tables (NPC, LCOE, capacities, real unmet)."""
from __future__ import annotations

import csv
import io
from typing import Sequence

from .planner import PlanSolution

ROWS = ("NPC ($)", "LCOE ($/kWh)", "BESS (kWh)", "PV (kW)", "WT (kW)", "% Real Unmet")


def _cells(sol: PlanSolution) -> list[str]:
    if not sol.feasible and sol.mode != "evaluate":
        return ["Infeasible"] * len(ROWS)
    s = sol.sizing
    return [
        f"{sol.npc:,.0f}",
        "-" if sol.lcoe is None else f"{sol.lcoe:.3f}",
        f"{s.bess_energy:.2f}",
        f"{s.pv_rating:.2f}",
        "-" if s.n_wt == 0 else f"{s.wt_rating:.2f}",
        f"{100 * sol.real_unserved_fraction:.2f}%",
    ]


def percent_change(new: float, base: float) -> str:
    return f"{100.0 * (new - base) / base:+.2f}%"


def compare_report(solutions: Sequence[PlanSolution], labels: Sequence[str] | None = None) -> tuple[str, str]:
    """Text table and CSV comparing solutions column by column.

    With two or more solutions every later column gets a companion column of
    NPC and LCOE changes relative to the first one.
    """
    if not solutions:
        raise ValueError("need at least one solution")
    labels = list(labels) if labels else [f"#{i + 1}" for i in range(len(solutions))]
    if len(labels) != len(solutions):
        raise ValueError("labels and solutions differ in length")

    base = solutions[0]
    header = ["", labels[0]]
    columns = [_cells(base)]
    for label, sol in zip(labels[1:], solutions[1:]):
        header += [label, f"vs {labels[0]}"]
        columns.append(_cells(sol))
        diff = [""] * len(ROWS)
        if sol.feasible and base.feasible:
            diff[0] = percent_change(sol.npc, base.npc)
            if sol.lcoe is not None and base.lcoe:
                diff[1] = percent_change(sol.lcoe, base.lcoe)
        columns.append(diff)

    table = [header] + [[row] + [col[i] for col in columns] for i, row in enumerate(ROWS)]
    widths = [max(len(r[j]) for r in table) for j in range(len(header))]
    lines = []
    for k, r in enumerate(table):
        lines.append(" | ".join(cell.rjust(w) if j else cell.ljust(w) for j, (cell, w) in enumerate(zip(r, widths))))
        if k == 0:
            lines.append("-+-".join("-" * w for w in widths))
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(table)
    return "\n".join(lines) + "\n", buf.getvalue()
