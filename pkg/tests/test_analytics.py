from datetime import date
from fractions import Fraction

import pytest

from bridgetrace.analytics import (
    CROSS_CHAIN,
    INTRA_CHAIN,
    MEAN,
    MEDIAN,
    P90,
    collection_graph,
    composition_to_csv,
    daily_series_to_csv,
    edges_to_csv,
    flag_ratio_spikes,
    flow_series,
    flow_series_to_csv,
    long_latency_report,
    long_latency_to_csv,
    lower_middle_median,
    match_rate_table,
    rate_cell,
    rate_table_to_csv,
    time_cost_series,
    token_composition,
)
from bridgetrace.model import AMBIGUOUS, EXACT, UNMATCHED, AssetClass, Direction, ResultRow
from tests.conftest import mk_event, mk_transfer, tx

DAY0 = 1_640_995_200  # 2022-01-01T00:00:00Z
DAY = 86_400


def rr(n, outcome=EXACT, ts=DAY0, elapsed=600):
    return ResultRow(
        event_id=f"e{n}",
        outcome=outcome,
        source_timestamp=ts,
        counterpart_tx_id=tx(n) if outcome == EXACT else None,
        elapsed_seconds=elapsed if outcome == EXACT else None,
    )


# --- statistics ----------------------------------------------------------------

def test_lower_middle_median():
    assert lower_middle_median([5]) == 5
    assert lower_middle_median([1, 2, 3]) == 2
    assert lower_middle_median([1, 2, 3, 4]) == 2  # even n takes the lower middle
    assert lower_middle_median([4, 1, 3, 2]) == 2  # order-free


def test_time_cost_single_match():
    series = time_cost_series([rr(1, elapsed=600)])
    assert len(series.points) == 1
    assert series.points[0].value == 600
    assert series.points[0].samples == 1
    assert series.points[0].day == date(2022, 1, 1)


def test_time_cost_day_bucketing_and_exact_only():
    results = [
        rr(1, ts=DAY0, elapsed=100),
        rr(2, ts=DAY0 + 10, elapsed=300),
        rr(3, ts=DAY0 + DAY, elapsed=900),
        rr(4, outcome=UNMATCHED, ts=DAY0),
        rr(5, outcome=AMBIGUOUS, ts=DAY0),
    ]
    series = time_cost_series(results, MEDIAN)
    assert [(p.day, p.value, p.samples) for p in series.points] == [
        (date(2022, 1, 1), 100, 2),  # lower-middle of [100, 300]
        (date(2022, 1, 2), 900, 1),
    ]


def test_time_cost_mean_and_p90():
    results = [rr(i, elapsed=v) for i, v in enumerate([100, 200, 300, 400])]
    assert time_cost_series(results, MEAN).points[0].value == 250
    many = [rr(i, elapsed=v) for i, v in enumerate(range(10, 110, 10))]
    assert time_cost_series(many, P90).points[0].value == 90  # ceil(0.9*10)-1 = index 8


def test_time_cost_empty_and_bad_statistic():
    assert time_cost_series([]).points == ()
    with pytest.raises(ValueError):
        time_cost_series([], "mode")


# --- flows ----------------------------------------------------------------------

def test_flow_ratio():
    deposits = [rr(i, ts=DAY0 + i) for i in range(10)]
    withdrawals = [rr(100 + i, ts=DAY0 + i) for i in range(4)]
    series = flow_series(deposits, withdrawals)
    assert series.points[0].deposits == 10
    assert series.points[0].withdrawals == 4
    assert series.points[0].ratio == Fraction(2, 5)


def test_flow_ratio_undefined_on_zero_deposits():
    withdrawals = [rr(i, ts=DAY0) for i in range(3)]
    series = flow_series([], withdrawals)
    assert series.points[0].ratio is None
    csv_text = flow_series_to_csv(series)
    assert csv_text.splitlines()[1].endswith("n/a")


def test_flow_counts_include_all_outcomes_and_are_order_free():
    deposits = [rr(1, ts=DAY0), rr(2, outcome=UNMATCHED, ts=DAY0), rr(3, outcome=AMBIGUOUS, ts=DAY0)]
    a = flow_series(deposits, [])
    b = flow_series(list(reversed(deposits)), [])
    assert a == b
    assert a.points[0].deposits == 3
    exact_only = flow_series(deposits, [], exact_only=True)
    assert exact_only.points[0].deposits == 1


def test_spike_flagging_over_trailing_week():
    deposits = [rr(i, ts=DAY0 + d * DAY) for d in range(8) for i in range(10)]
    withdrawals = [rr(1000 + d, ts=DAY0 + d * DAY) for d in range(7)]  # ratio 0.1 for a week
    withdrawals += [rr(2000 + i, ts=DAY0 + 7 * DAY) for i in range(9)]  # day 8 ratio 0.9
    series = flow_series(deposits, withdrawals)
    flagged = flag_ratio_spikes(series, multiplier=3.0)
    assert [p.day for p in flagged] == [date(2022, 1, 8)]


def test_spike_needs_prior_context():
    series = flow_series([rr(1, ts=DAY0)], [rr(2, ts=DAY0)])
    assert flag_ratio_spikes(series) == []


# --- composition ------------------------------------------------------------------

def test_composition_shares():
    events = [mk_event(n, symbol="USDC") for n in range(3)] + [mk_event(9, symbol="DAI")]
    rows = token_composition(events)
    assert [(r.symbol, r.count) for r in rows] == [("USDC", 3), ("DAI", 1)]
    assert rows[0].share == 0.75 and rows[1].share == 0.25


def test_composition_empty_and_share_sum():
    assert token_composition([]) == []
    events = [mk_event(n, symbol=s) for n, s in enumerate(["A", "B", "C", "A", "B", "A", "D"])]
    rows = token_composition(events)
    assert abs(sum(r.share for r in rows) - 1.0) <= 1e-9


def test_composition_csv():
    events = [mk_event(1, symbol="USDC")]
    text = composition_to_csv(token_composition(events))
    assert text.splitlines() == ["symbol,count,share", "USDC,1,1.000000"]


# --- match-rate table golden strings --------------------------------------------

def test_rate_cells_render_golden_values():
    assert rate_cell(1_451_413, 1_528_318) == "1,451,413 / 1,528,318 = 94.97%"
    assert rate_cell(519_347, 558_190).endswith("93.04%")
    assert rate_cell(34_194, 34_315).endswith("99.65%")
    assert rate_cell(184_541, 225_762).endswith("81.74%")
    assert rate_cell(178_460, 264_173).endswith("67.55%")
    assert rate_cell(5_242, 5_650).endswith("92.78%")
    assert rate_cell(0, 0) == "n/a"


def test_match_rate_table_layout():
    table = match_rate_table(
        {
            "Ether": ((1_451_413, 1_528_318), (184_541, 225_762)),
            "ERC20": ((519_347, 558_190), (178_460, 264_173)),
            "ERC721": ((34_194, 34_315), (5_242, 5_650)),
        }
    )
    cells = {(row.token_type, row.deposit_cell, row.withdrawal_cell) for row in table}
    assert ("Ether", "1,451,413 / 1,528,318 = 94.97%", "184,541 / 225,762 = 81.74%") in cells
    csv_text = rate_table_to_csv(table)
    assert csv_text.splitlines()[0] == "token_type,deposits,withdrawals"
    assert '"1,451,413 / 1,528,318 = 94.97%"' in csv_text  # commas quoted


# --- collection graph -----------------------------------------------------------------

def test_cross_chain_fraction():
    events = {f"e{n}": mk_event(n, timestamp=DAY0) for n in (1, 2)}
    results = [
        ResultRow("e1", EXACT, DAY0, tx(101), 600),
        ResultRow("e2", EXACT, DAY0, tx(102), 700),
    ]
    transfers = [mk_transfer(100 + n, timestamp=DAY0 + n, chain="polygon") for n in range(1, 13)]
    graphs = collection_graph({"polygon": transfers}, results, events)
    graph = graphs["polygon"]
    assert len(graph.edges) == 12
    assert graph.cross_chain_fraction == Fraction(2, 12)
    kinds = {e.tx_id: e.kind for e in graph.edges}
    assert kinds[tx(101)] == CROSS_CHAIN and kinds[tx(103)] == INTRA_CHAIN


def test_graph_no_matches_all_intra():
    transfers = [mk_transfer(n, timestamp=DAY0) for n in range(1, 5)]
    graphs = collection_graph({"polygon": transfers}, [], {})
    assert all(e.kind == INTRA_CHAIN for e in graphs["polygon"].edges)


def test_graph_destination_only_bridge_arrivals_is_fully_cross():
    # every destination transfer is a matched mint: cross fraction 1
    events = {f"e{n}": mk_event(n, timestamp=DAY0) for n in range(1, 6)}
    results = [ResultRow(f"e{n}", EXACT, DAY0, tx(100 + n), 600) for n in range(1, 6)]
    transfers = [
        mk_transfer(100 + n, symbol="VOXCAT", asset_class=AssetClass.NON_FUNGIBLE,
                    token_id=n, amount=None, timestamp=DAY0 + n, chain="polygon")
        for n in range(1, 6)
    ]
    graphs = collection_graph({"polygon": transfers}, results, events, token_filter="VOXCAT")
    assert graphs["polygon"].cross_chain_fraction == 1


def test_graph_token_filter_and_monthly_growth():
    transfers = [
        mk_transfer(1, symbol="VOXCAT", asset_class=AssetClass.NON_FUNGIBLE, token_id=1, amount=None, timestamp=DAY0),
        mk_transfer(2, symbol="OTHER", timestamp=DAY0),
        mk_transfer(3, symbol="VOXCAT", asset_class=AssetClass.NON_FUNGIBLE, token_id=2, amount=None, timestamp=DAY0 + 31 * DAY),
        mk_transfer(4, symbol="VOXCAT", asset_class=AssetClass.NON_FUNGIBLE, token_id=3, amount=None, timestamp=DAY0 + 32 * DAY),
    ]
    graphs = collection_graph({"polygon": transfers}, [], {}, token_filter="VOXCAT")
    graph = graphs["polygon"]
    assert len(graph.edges) == 3  # OTHER filtered out
    assert graph.monthly_counts == (("2022-01", 1), ("2022-02", 2))
    assert graph.monthly_growth[0][1] is None
    assert graph.monthly_growth[1][1] == 1.0  # 1 -> 2 is +100%


def test_edges_csv_header():
    transfers = [mk_transfer(1, timestamp=DAY0)]
    graphs = collection_graph({"polygon": transfers}, [], {})
    text = edges_to_csv(graphs["polygon"].edges)
    assert text.splitlines()[0] == "from,to,tx,timestamp,kind,chain"


# --- long latency -----------------------------------------------------------------------

SIX_MONTHS = 15_552_000


def test_long_latency_six_month_match_listed_first():
    results = [
        rr(1, elapsed=SIX_MONTHS + 5),
        rr(2, elapsed=40 * DAY),
        rr(3, elapsed=600),
    ]
    entries = long_latency_report(results, 30 * DAY)
    assert [e.elapsed_seconds for e in entries] == [SIX_MONTHS + 5, 40 * DAY]


def test_long_latency_empty_when_fast():
    assert long_latency_report([rr(1, elapsed=100)], 30 * DAY) == []


def test_long_latency_flags_possibly_unclaimed_burns():
    burn = mk_event(7, direction=Direction.WITHDRAWAL, timestamp=DAY0)
    results = [ResultRow(burn.event_id, UNMATCHED, DAY0, None, None)]
    now = DAY0 + 60 * DAY
    entries = long_latency_report(results, 30 * DAY, {burn.event_id: burn}, now)
    assert len(entries) == 1
    assert entries[0].note == "possibly unclaimed"
    assert entries[0].elapsed_seconds is None
    text = long_latency_to_csv(entries)
    assert "possibly unclaimed" in text


def test_long_latency_threshold_validation():
    with pytest.raises(ValueError):
        long_latency_report([], 0)


def test_daily_series_csv():
    text = daily_series_to_csv(time_cost_series([rr(1, elapsed=600)]))
    assert text.splitlines() == ["date,median_elapsed_seconds,samples", "2022-01-01,600,1"]
