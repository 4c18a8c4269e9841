import copy
import csv
import io

import pytest

from microplan.catalog import ProjectParams, default_catalog
from microplan.dispatch import Sizing
from microplan.planner import evaluate
from microplan.report import ROWS, compare_report, percent_change
from microplan.resources import availability, synthesize_weather


@pytest.fixture(scope="module")
def solution():
    cat = default_catalog("la")
    series = synthesize_weather(days=3)
    return evaluate(Sizing.for_catalog(cat, 130, 1, 4), cat, series, availability(series), ProjectParams())


def test_percent_change():
    assert percent_change(93940, 101530) == "-7.48%"
    assert percent_change(125272, 132616) == "-5.54%"
    assert percent_change(5.0, 5.0) == "+0.00%"


def test_single_solution_has_no_difference_column(solution):
    text, table = compare_report([solution], ["LA"])
    rows = list(csv.reader(io.StringIO(table)))
    assert rows[0] == ["", "LA"]
    assert [r[0] for r in rows[1:]] == list(ROWS)
    assert rows[1][1] == f"{solution.npc:,.0f}"
    assert rows[3][1] == f"{solution.sizing.bess_energy:.2f}"
    assert "vs" not in text


def test_identical_solutions_show_zero_change(solution):
    _, table = compare_report([solution, copy.deepcopy(solution)], ["a", "b"])
    rows = list(csv.reader(io.StringIO(table)))
    assert rows[0] == ["", "a", "b", "vs a"]
    assert rows[1][3] == "+0.00%" and rows[2][3] == "+0.00%"


def test_table_numbers_come_from_json(solution):
    data = solution.to_dict()
    _, table = compare_report([solution])
    rows = {r[0]: r[1] for r in csv.reader(io.StringIO(table)) if r[0]}
    assert rows["NPC ($)"] == f"{data['npc']:,.0f}"
    assert rows["LCOE ($/kWh)"] == f"{data['lcoe']:.3f}"
    assert rows["PV (kW)"] == f"{data['sizing']['pv_kw']:.2f}"
    assert rows["WT (kW)"] == f"{data['sizing']['wt_kw']:.2f}"
    assert rows["% Real Unmet"] == f"{100 * data['real_unserved_fraction']:.2f}%"


def test_errors(solution):
    with pytest.raises(ValueError):
        compare_report([])
    with pytest.raises(ValueError):
        compare_report([solution], ["a", "b"])
