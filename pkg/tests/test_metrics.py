import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from readiness_harness.artifacts import RunLogRecord
from readiness_harness.errors import ConfigError, DataError
from readiness_harness.metrics import (
    Budget,
    MetricSet,
    ModelPrice,
    aggregate_run,
    estimate_cost,
    hit_at_k,
    macro_f1,
    mean_hit_at_k,
    normalize_budget,
    p95_nearest_rank,
    parse_qrels,
    policy_pass_rate,
    workflow_success_rate,
)


def rec(i, **kw):
    base = dict(item_id=f"q{i}", latency_ms=100.0 + i, tokens_in=1000, tokens_out=200)
    base.update(kw)
    return RunLogRecord(**base)


def test_p95_small_lists():
    assert p95_nearest_rank([5.0]) == 5.0
    assert p95_nearest_rank(list(range(1, 21))) == 19
    assert p95_nearest_rank(list(range(1, 101))) == 95
    assert p95_nearest_rank(list(range(1, 102))) == 96
    with pytest.raises(DataError):
        p95_nearest_rank([])


@given(st.lists(st.floats(min_value=0, max_value=1e6, allow_nan=False), min_size=1, max_size=200))
def test_p95_is_a_member_and_upper_tail(xs):
    p = p95_nearest_rank(xs)
    assert p in xs
    assert sum(1 for x in xs if x <= p) >= 0.95 * len(xs)


def test_hit_at_k():
    assert hit_at_k(["a", "b", "c"], {"c"}, 3) == 1
    assert hit_at_k(["a", "b", "c"], {"c"}, 2) == 0
    with pytest.raises(DataError):
        hit_at_k(["a"], set(), 1)


def test_mean_hit_at_k_excludes_unjudged():
    runs = {"q1": ["a"], "q2": ["x"], "q3": ["z"]}
    mean, unjudged = mean_hit_at_k(runs, {"q1": {"a"}, "q2": {"b"}}, 1)
    assert mean == 0.5 and unjudged == 1
    assert mean_hit_at_k({"q": ["a"]}, {}, 1) == (None, 1)


def test_parse_qrels_skips_header_and_zero_relevance():
    text = "query-id corpus-id score\nq1 d1 1\nq1 d2 0\nq2 d3 2 # comment\n"
    assert parse_qrels(text) == {"q1": {"d1"}, "q2": {"d3"}}
    with pytest.raises(DataError):
        parse_qrels("q1 d1\n")


def test_macro_f1_out_of_universe_prediction():
    records = [rec(0, gold_label="a", predicted_label="a"), rec(1, gold_label="b", predicted_label="zzz")]
    # a: F1 1; b: tp 0, fn 1 -> 0
    assert macro_f1(records) == 0.5


def test_workflow_requires_policy_routing_and_escalation():
    records = [
        rec(0, gold_label="a", predicted_label="a", gold_escalate=True, should_escalate=True),
        rec(1, gold_label="a", predicted_label="a", gold_escalate=True, should_escalate=False),
        rec(2, gold_label="a", predicted_label="a", policy_violations=["asks_for_password"]),
        rec(3, gold_label="a", predicted_label="a", schema_valid=False),
    ]
    assert workflow_success_rate(records) == 0.25
    assert policy_pass_rate(records) == 0.5


def test_estimate_cost_and_unknown_model():
    prices = {"m": ModelPrice(2.0, 8.0)}
    assert math.isclose(estimate_cost(1_000_000, 500_000, "m", prices), 6.0)
    with pytest.raises(ConfigError):
        estimate_cost(1, 1, "other", prices)


def test_budget_normalization():
    b = Budget("cost", 1.0, 3.0)
    assert normalize_budget(0.5, b) == 1.0
    assert normalize_budget(2.0, b) == 0.5
    assert normalize_budget(9.0, b) == 0.0
    with pytest.raises(ConfigError):
        Budget("cost", 3.0, 1.0)
    with pytest.raises(ConfigError):
        Budget("tokens", 1.0, 2.0)


def test_metricset_rejects_out_of_range():
    with pytest.raises(DataError):
        MetricSet(faithfulness=1.5)
    with pytest.raises(DataError):
        MetricSet(cost_usd=-1.0)
    assert MetricSet(faithfulness=0.5).present() == {"faithfulness"}


def test_aggregate_retrieval_and_ticket():
    recs = [rec(i, retrieved_doc_ids=[f"d{i}"], faithfulness=0.5) for i in range(4)]
    notes = []
    ms = aggregate_run(recs, "retrieval", model="m", prices={"m": ModelPrice(1, 1)}, top_k=1,
                       qrels={"q0": {"d0"}, "q1": {"x"}, "q2": {"d2"}}, diagnostics=notes)
    assert ms.retrieval_hit_k == 2 / 3 and ms.faithfulness == 0.5
    assert ms.cost_usd == pytest.approx(4 * 1200 / 1e6)
    assert ms.workflow_success is None
    assert any("unjudged" in n for n in notes)

    tickets = [rec(i, gold_label="a", predicted_label="a" if i else "b") for i in range(4)]
    ms = aggregate_run(tickets, "t1/t2", model="m")
    assert ms.routing_accuracy == 0.75 and ms.retrieval_hit_k is None and ms.cost_usd is None
    assert ms.p95_latency_ms == 103.0


def test_aggregate_ignores_record_order():
    recs = [rec(i, retrieved_doc_ids=["d"], faithfulness=i / 10) for i in range(10)]
    a = aggregate_run(recs, "retrieval", model="m", prices={"m": ModelPrice(0.3, 0.7)})
    b = aggregate_run(list(reversed(recs)), "retrieval", model="m", prices={"m": ModelPrice(0.3, 0.7)})
    assert a == b


def test_failed_records_excluded_from_latency():
    recs = [rec(0, latency_ms=5000.0, error="boom"), rec(1)]
    assert aggregate_run(recs, "retrieval", model="m").p95_latency_ms == 101.0
