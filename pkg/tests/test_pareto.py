import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import FIXTURES
from readiness_harness.errors import DataError
from readiness_harness.pareto import (
    LATENCY_SCORE,
    FrontierExport,
    FrontierPoint,
    Objective,
    dominates,
    format_coordinates,
    frontier,
    parse_coordinates,
)

LAT, SCORE = LATENCY_SCORE


def pt(name, lat, sc):
    return FrontierPoint(name, {"p95_latency_ms": lat, "score": sc})


def test_dominance_rules():
    a, b, c = pt("a", 1, 0.9), pt("b", 2, 0.8), pt("c", 1, 0.9)
    assert dominates(a, b, LATENCY_SCORE)
    assert not dominates(a, c, LATENCY_SCORE) and not dominates(c, a, LATENCY_SCORE)


def test_duplicates_and_sort():
    pts = [pt("z", 3, 0.9), pt("a", 1, 0.5), pt("dup", 1, 0.5), pt("x", 2, 0.4)]
    out = frontier(pts, LATENCY_SCORE)
    assert [p.run_id for p in out] == ["a", "dup", "z"]
    assert frontier([], LATENCY_SCORE) == []
    with pytest.raises(DataError):
        frontier(pts, [])


def test_objective_parse():
    assert Objective.parse("cost:min") == Objective("cost", "minimize")
    assert Objective.parse("score") == Objective("score", "maximize")
    with pytest.raises(DataError):
        Objective.parse("x:sideways")


def test_missing_metric_raises():
    with pytest.raises(DataError):
        frontier([FrontierPoint("a", {"score": 1})], LATENCY_SCORE)


def brute(points, objectives):
    return {p.run_id for p in points if not any(dominates(q, p, objectives) for q in points)}


@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5), st.integers(0, 5)), max_size=30),
       st.lists(st.sampled_from(["maximize", "minimize"]), min_size=3, max_size=3))
def test_frontier_matches_brute_force(rows, directions):
    objectives = [Objective(f"o{i}", d) for i, d in enumerate(directions)]
    points = [FrontierPoint(f"p{i}", {f"o{j}": v for j, v in enumerate(r)}) for i, r in enumerate(rows)]
    assert {p.run_id for p in frontier(points, objectives)} == brute(points, objectives)


@given(st.lists(st.tuples(st.floats(0, 100), st.floats(0, 1)), max_size=20))
def test_frontier_is_idempotent(rows):
    points = [pt(f"p{i}", a, b) for i, (a, b) in enumerate(rows)]
    once = frontier(points, LATENCY_SCORE)
    assert frontier(once, LATENCY_SCORE) == once


def test_coordinate_round_trip():
    text = (FIXTURES / "scifact_sla-first.coords").read_text().strip()
    points = parse_coordinates(text, "x", "y")
    assert format_coordinates(points, "x", "y") == text
    with pytest.raises(DataError):
        parse_coordinates("(1,2,3)")


def test_export_dict_marks_frontier():
    pts = [pt("a", 1, 0.5), pt("b", 2, 0.4)]
    exp = FrontierExport(LATENCY_SCORE, ("ds",), pts, frontier(pts, LATENCY_SCORE))
    doc = exp.to_dict()
    assert [s["on_frontier"] for s in doc["scatter"]] == [True, False]
