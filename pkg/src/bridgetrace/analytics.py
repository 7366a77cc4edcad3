"""Descriptive series and tables over matched cross-chain data.

Everything here is pure aggregation over immutable inputs: daily time-cost
statistics, deposit/withdrawal flow counts and ratios, token composition,
match-rate tables, collection graph edge lists, and long-latency triage.
Charts are out of scope; every output renders to CSV for external tools.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from datetime import date, datetime, timezone
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from bridgetrace.match.engine import Counts, MatchReport, format_percent
from bridgetrace.model import (
    EXACT,
    UNMATCHED,
    BridgeEvent,
    Direction,
    normalize_symbol,
)

MEDIAN = "median"
MEAN = "mean"
P90 = "p90"

INTRA_CHAIN = "intra-chain"
CROSS_CHAIN = "cross-chain"


def _utc_date(ts: int) -> date:
    return datetime.fromtimestamp(ts, tz=timezone.utc).date()


def _month_key(ts: int) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m")


def lower_middle_median(values: Sequence[int]) -> int:
    """Median as the lower-middle order statistic for even-sized input."""
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


def _p90(values: Sequence[int]) -> int:
    ordered = sorted(values)
    return ordered[max(0, math.ceil(0.9 * len(ordered)) - 1)]


_STATISTICS = {
    MEDIAN: lower_middle_median,
    MEAN: lambda vals: round(sum(vals) / len(vals), 3),
    P90: _p90,
}


@dataclass(frozen=True)
class DailyPoint:
    day: date
    value: float
    samples: int


@dataclass(frozen=True)
class DailySeries:
    statistic: str
    points: tuple[DailyPoint, ...]


def time_cost_series(results: Iterable, statistic: str = MEDIAN) -> DailySeries:
    """Per-UTC-day statistic of elapsed seconds over exact matches only.

    Days are assigned by the source-side timestamp; days with no exact
    matches are omitted rather than zero-filled.
    """
    if statistic not in _STATISTICS:
        raise ValueError(f"unknown statistic {statistic!r}")
    buckets: dict[date, list[int]] = {}
    for r in results:
        if r.outcome != EXACT:
            continue
        buckets.setdefault(_utc_date(r.source_timestamp), []).append(r.elapsed_seconds)
    reduce = _STATISTICS[statistic]
    points = tuple(
        DailyPoint(day=d, value=reduce(vals), samples=len(vals)) for d, vals in sorted(buckets.items())
    )
    return DailySeries(statistic=statistic, points=points)


@dataclass(frozen=True)
class FlowPoint:
    day: date
    deposits: int
    withdrawals: int
    ratio: Fraction | None  # None when the day saw no deposits


@dataclass(frozen=True)
class FlowSeries:
    points: tuple[FlowPoint, ...]


def flow_series(deposit_results, withdrawal_results, exact_only: bool = False) -> FlowSeries:
    """Daily initiated-event counts per direction plus withdrawal/deposit ratio.

    Either side may be a MatchReport or a plain result sequence. Counts
    cover every outcome by default (flows predate matching); pass
    exact_only=True to restrict both sides to exact matches.
    """
    deposits: dict[date, int] = {}
    withdrawals: dict[date, int] = {}
    for bucket, results in ((deposits, deposit_results), (withdrawals, withdrawal_results)):
        for r in getattr(results, "results", results):
            if exact_only and r.outcome != EXACT:
                continue
            d = _utc_date(r.source_timestamp)
            bucket[d] = bucket.get(d, 0) + 1
    points = []
    for d in sorted(set(deposits) | set(withdrawals)):
        dep = deposits.get(d, 0)
        wd = withdrawals.get(d, 0)
        points.append(FlowPoint(day=d, deposits=dep, withdrawals=wd, ratio=Fraction(wd, dep) if dep else None))
    return FlowSeries(points=tuple(points))


def flag_ratio_spikes(series: FlowSeries, multiplier: float = 3.0, window_days: int = 7) -> list[FlowPoint]:
    """Days whose ratio exceeds ``multiplier`` times the trailing-window mean.

    The trailing mean covers defined ratios in the preceding ``window_days``
    calendar days; days with no prior context are never flagged.
    """
    flagged = []
    by_day = {p.day: p for p in series.points}
    for p in series.points:
        if p.ratio is None:
            continue
        trailing = [
            float(by_day[d].ratio)
            for d in (date.fromordinal(p.day.toordinal() - k) for k in range(1, window_days + 1))
            if d in by_day and by_day[d].ratio is not None
        ]
        if trailing and float(p.ratio) > multiplier * (sum(trailing) / len(trailing)):
            flagged.append(p)
    return flagged


@dataclass(frozen=True)
class CompositionRow:
    symbol: str
    count: int
    share: float


def token_composition(events: Iterable[BridgeEvent]) -> list[CompositionRow]:
    """Event counts per normalized symbol, with shares summing to one."""
    counts: dict[str, int] = {}
    for e in events:
        sym = normalize_symbol(e.token.symbol)
        counts[sym] = counts.get(sym, 0) + 1
    total = sum(counts.values())
    rows = [
        CompositionRow(symbol=sym, count=n, share=n / total)
        for sym, n in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    ]
    return rows


def rate_cell(exact: int, total: int) -> str:
    """One match-rate table cell, e.g. '1,451,413 / 1,528,318 = 94.97%'."""
    if total == 0:
        return "n/a"
    return f"{exact:,} / {total:,} = {format_percent(exact, total)}"


def _as_tally(side) -> tuple[int, int]:
    if isinstance(side, MatchReport):
        return side.counts.exact, side.counts.total
    if isinstance(side, Counts):
        return side.exact, side.total
    exact, total = side
    return exact, total


@dataclass(frozen=True)
class RateRow:
    token_type: str
    deposit_cell: str
    withdrawal_cell: str


def match_rate_table(reports: Mapping[str, tuple]) -> list[RateRow]:
    """Per-token-type '<exact> / <total> = <pct>' rows for both directions.

    Each value is a (deposit, withdrawal) pair of MatchReports, Counts, or
    raw (exact, total) tallies.
    """
    rows = []
    for token_type, (deposit_side, withdrawal_side) in reports.items():
        d_exact, d_total = _as_tally(deposit_side)
        w_exact, w_total = _as_tally(withdrawal_side)
        rows.append(
            RateRow(
                token_type=token_type,
                deposit_cell=rate_cell(d_exact, d_total),
                withdrawal_cell=rate_cell(w_exact, w_total),
            )
        )
    return rows


@dataclass(frozen=True)
class GraphEdge:
    from_address: str
    to_address: str
    tx_id: str
    timestamp: int
    kind: str  # INTRA_CHAIN | CROSS_CHAIN
    chain: str


@dataclass(frozen=True)
class ChainGraph:
    chain: str
    edges: tuple[GraphEdge, ...]
    active_addresses: int
    cross_chain_fraction: Fraction | None
    monthly_counts: tuple[tuple[str, int], ...]
    monthly_growth: tuple[tuple[str, float | None], ...]


def collection_graph(
    transfers_by_chain: Mapping[str, Sequence],
    results: Iterable,
    events_by_id: Mapping[str, BridgeEvent],
    token_filter: str | None = None,
) -> dict[str, ChainGraph]:
    """Edge lists per chain with matched pairs labelled cross-chain.

    An edge is cross-chain iff its transaction is an endpoint of an exact
    match: the source-side event transaction or the destination-side
    counterpart transfer. Cross-chain share uses the edge-count denominator.
    """
    cross_tx: set[str] = set()
    for r in results:
        if r.outcome != EXACT:
            continue
        counterpart = r.counterpart_tx_id
        if counterpart:
            cross_tx.add(counterpart)
        event = events_by_id.get(r.event_id)
        if event is not None:
            cross_tx.add(event.tx_id)

    wanted = normalize_symbol(token_filter) if token_filter else None
    graphs: dict[str, ChainGraph] = {}
    for chain, transfers in sorted(transfers_by_chain.items()):
        edges = []
        monthly: dict[str, int] = {}
        addresses: set[str] = set()
        cross = 0
        for t in sorted(transfers, key=lambda t: (t.timestamp, t.block_number, t.tx_id)):
            if wanted is not None and normalize_symbol(t.token.symbol) != wanted:
                continue
            kind = CROSS_CHAIN if t.tx_id in cross_tx else INTRA_CHAIN
            cross += kind == CROSS_CHAIN
            edges.append(
                GraphEdge(
                    from_address=t.from_address,
                    to_address=t.to_address,
                    tx_id=t.tx_id,
                    timestamp=t.timestamp,
                    kind=kind,
                    chain=chain,
                )
            )
            addresses.add(t.from_address)
            addresses.add(t.to_address)
            month = _month_key(t.timestamp)
            monthly[month] = monthly.get(month, 0) + 1
        months = sorted(monthly.items())
        growth: list[tuple[str, float | None]] = []
        for i, (month, count) in enumerate(months):
            if i == 0 or months[i - 1][1] == 0:
                growth.append((month, None))
            else:
                growth.append((month, (count - months[i - 1][1]) / months[i - 1][1]))
        graphs[chain] = ChainGraph(
            chain=chain,
            edges=tuple(edges),
            active_addresses=len(addresses),
            cross_chain_fraction=Fraction(cross, len(edges)) if edges else None,
            monthly_counts=tuple(months),
            monthly_growth=tuple(growth),
        )
    return graphs


@dataclass(frozen=True)
class LongLatencyEntry:
    event_id: str
    elapsed_seconds: int | None
    note: str  # "" for slow exact matches, "possibly unclaimed" for aged burns


def long_latency_report(
    results: Iterable,
    threshold_seconds: int,
    events_by_id: Mapping[str, BridgeEvent] | None = None,
    now: int | None = None,
) -> list[LongLatencyEntry]:
    """Exact matches at or over the threshold, slowest first, plus unmatched
    burns older than the threshold flagged as possibly unclaimed."""
    if threshold_seconds <= 0:
        raise ValueError("threshold must be > 0 seconds")
    slow = [
        LongLatencyEntry(event_id=r.event_id, elapsed_seconds=r.elapsed_seconds, note="")
        for r in results
        if r.outcome == EXACT and r.elapsed_seconds >= threshold_seconds
    ]
    slow.sort(key=lambda e: (-e.elapsed_seconds, e.event_id))
    aged: list[tuple[int, LongLatencyEntry]] = []
    if events_by_id is not None and now is not None:
        for r in results:
            if r.outcome != UNMATCHED:
                continue
            event = events_by_id.get(r.event_id)
            if event is None or event.direction is not Direction.WITHDRAWAL:
                continue
            age = now - event.timestamp
            if age >= threshold_seconds:
                aged.append((age, LongLatencyEntry(event_id=r.event_id, elapsed_seconds=None, note="possibly unclaimed")))
        aged.sort(key=lambda pair: (-pair[0], pair[1].event_id))
    return slow + [entry for _, entry in aged]


# --- CSV rendering --------------------------------------------------------

def _csv(headers: list[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(headers)
    writer.writerows(rows)
    return buf.getvalue()


def daily_series_to_csv(series: DailySeries) -> str:
    return _csv(
        ["date", f"{series.statistic}_elapsed_seconds", "samples"],
        ((p.day.isoformat(), p.value, p.samples) for p in series.points),
    )


def flow_series_to_csv(series: FlowSeries) -> str:
    return _csv(
        ["date", "deposits", "withdrawals", "ratio"],
        (
            (p.day.isoformat(), p.deposits, p.withdrawals, "n/a" if p.ratio is None else f"{float(p.ratio):.6f}")
            for p in series.points
        ),
    )


def composition_to_csv(rows: Sequence[CompositionRow]) -> str:
    return _csv(
        ["symbol", "count", "share"],
        ((r.symbol, r.count, f"{r.share:.6f}") for r in rows),
    )


def rate_table_to_csv(rows: Sequence[RateRow]) -> str:
    return _csv(
        ["token_type", "deposits", "withdrawals"],
        ((r.token_type, r.deposit_cell, r.withdrawal_cell) for r in rows),
    )


def edges_to_csv(edges: Sequence[GraphEdge]) -> str:
    return _csv(
        ["from", "to", "tx", "timestamp", "kind", "chain"],
        ((e.from_address, e.to_address, e.tx_id, e.timestamp, e.kind, e.chain) for e in edges),
    )


def long_latency_to_csv(entries: Sequence[LongLatencyEntry]) -> str:
    return _csv(
        ["event_id", "elapsed_seconds", "note"],
        ((e.event_id, "" if e.elapsed_seconds is None else e.elapsed_seconds, e.note) for e in entries),
    )
