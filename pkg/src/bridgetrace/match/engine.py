"""The cross-chain match heuristic: same receiver, bounded time gap, token
identity, exact value or token-ID equality.

An event's candidates come from an index keyed by (receiver address, token
equivalence class, value kind), restricted to the tolerance window by binary
search over the time-sorted group. Exactly one survivor is an exact match,
two or more are ambiguous, zero is unmatched. The hot scan runs through a
compiled kernel when available (see _kernel).
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from bridgetrace.bridgespec import BridgeSpec
from bridgetrace.decode import explode_batch
from bridgetrace.match._kernel import get_kernel
from bridgetrace.model import (
    AMBIGUOUS,
    EXACT,
    UNMATCHED,
    AssetClass,
    BridgeEvent,
    ChainTransfer,
    Direction,
    MatchResult,
    token_equivalent,
)

ZERO_ADDRESS = "0x" + "00" * 20


@dataclass(frozen=True)
class MatchConfig:
    """Tunable knobs of the heuristic.

    Causal mode (default) requires the destination leg at or after the
    source leg: 0 <= dt <= tolerance; a mint cannot precede its lock.
    Symmetric mode (|dt| <= tolerance) is available for replicating
    pipelines that compare absolute gaps. strict_gap excludes candidates
    at exactly dt == tolerance; the boundary is inclusive by default.
    """

    time_tolerance_seconds: int
    causal_only: bool = True
    strict_gap: bool = False
    exclusive_assignment: bool = False
    direction: Direction = Direction.DEPOSIT

    def __post_init__(self) -> None:
        if self.time_tolerance_seconds <= 0:
            raise ValueError("time tolerance must be > 0 seconds")

    def window(self, source_ts: int) -> tuple[int, int]:
        eps = 1 if self.strict_gap else 0
        hi = source_ts + self.time_tolerance_seconds - eps
        if self.causal_only:
            return source_ts, hi
        return source_ts - self.time_tolerance_seconds + eps, hi


@dataclass(frozen=True)
class Counts:
    exact: int = 0
    ambiguous: int = 0
    unmatched: int = 0

    @property
    def total(self) -> int:
        return self.exact + self.ambiguous + self.unmatched


def format_percent(exact: int, total: int) -> str:
    """Exact rational rendered as a percent with 2 decimals, round half up."""
    if total == 0:
        return "n/a"
    q, r = divmod(exact * 10000, total)
    if 2 * r >= total:
        q += 1
    return f"{q // 100}.{q % 100:02d}%"


@dataclass(frozen=True)
class MatchReport:
    results: tuple[MatchResult, ...]
    counts: Counts
    per_token: dict[str, Counts]
    truncation_exposure: int
    config: MatchConfig

    @property
    def match_rate(self) -> Fraction | None:
        if self.counts.total == 0:
            return None
        return Fraction(self.counts.exact, self.counts.total)

    @property
    def match_rate_text(self) -> str:
        return format_percent(self.counts.exact, self.counts.total)

    def summary_dict(self) -> dict:
        return {
            "counts": {
                "exact": self.counts.exact,
                "ambiguous": self.counts.ambiguous,
                "unmatched": self.counts.unmatched,
                "total": self.counts.total,
            },
            "matchRate": self.match_rate_text,
            "perToken": {
                sym: {"exact": c.exact, "ambiguous": c.ambiguous, "unmatched": c.unmatched}
                for sym, c in sorted(self.per_token.items())
            },
            "truncationExposure": self.truncation_exposure,
            "config": {
                "timeToleranceSeconds": self.config.time_tolerance_seconds,
                "causalOnly": self.config.causal_only,
                "strictGap": self.config.strict_gap,
                "exclusiveAssignment": self.config.exclusive_assignment,
                "direction": self.config.direction.value,
            },
        }


def _value_kind(token) -> str:
    return "nft" if token.asset_class is AssetClass.NON_FUNGIBLE else "val"


def index_key(address: str, token, spec: BridgeSpec) -> tuple[str, str, str]:
    return (address, spec.symbol_class(token.symbol), _value_kind(token))


def _transfer_sort_key(t: ChainTransfer):
    return (t.timestamp, t.block_number, t.tx_id)


class CandidateIndex:
    """Transfers partitioned by match key, each group sorted by timestamp."""

    def __init__(self, transfers: Sequence[ChainTransfer], spec: BridgeSpec) -> None:
        groups: dict[tuple, list[ChainTransfer]] = {}
        for t in transfers:
            groups.setdefault(index_key(t.to_address, t.token, spec), []).append(t)
        self._groups: dict[tuple, list[ChainTransfer]] = {}
        self._times: dict[tuple, list[int]] = {}
        for key, items in groups.items():
            items.sort(key=_transfer_sort_key)
            self._groups[key] = items
            self._times[key] = [t.timestamp for t in items]

    def __len__(self) -> int:
        return sum(len(g) for g in self._groups.values())

    @property
    def keys(self):
        return self._groups.keys()

    def group(self, key: tuple) -> list[ChainTransfer]:
        return self._groups.get(key, [])

    def window(self, key: tuple, lo: int, hi: int) -> list[ChainTransfer]:
        """Group members with lo <= timestamp <= hi (binary-searched)."""
        times = self._times.get(key)
        if not times:
            return []
        start = bisect.bisect_left(times, lo)
        stop = bisect.bisect_right(times, hi)
        return self._groups[key][start:stop]


def build_candidate_index(transfers: Sequence[ChainTransfer], spec: BridgeSpec) -> CandidateIndex:
    return CandidateIndex(transfers, spec)


def passes_criteria(e: BridgeEvent, p: ChainTransfer, cfg: MatchConfig, spec: BridgeSpec) -> bool:
    """All four criteria: receiver, time gap, token identity, exact value."""
    if e.receiver != p.to_address:
        return False
    lo, hi = cfg.window(e.timestamp)
    if not lo <= p.timestamp <= hi:
        return False
    e_nft = e.token.asset_class is AssetClass.NON_FUNGIBLE
    p_nft = p.token.asset_class is AssetClass.NON_FUNGIBLE
    if e_nft != p_nft:
        return False
    if not token_equivalent(e.token, p.token, spec):
        return False
    if e_nft:
        return p.token_id in e.token_ids
    return e.amount == p.amount


def _classify(event: BridgeEvent, survivors: Sequence[ChainTransfer]) -> MatchResult:
    if len(survivors) == 1:
        hit = survivors[0]
        return MatchResult(
            event_id=event.event_id,
            outcome=EXACT,
            source_timestamp=event.timestamp,
            transfer=hit,
            candidates=(hit,),
            elapsed_seconds=hit.timestamp - event.timestamp,
        )
    if survivors:
        return MatchResult(
            event_id=event.event_id,
            outcome=AMBIGUOUS,
            source_timestamp=event.timestamp,
            candidates=tuple(survivors),
        )
    return MatchResult(event_id=event.event_id, outcome=UNMATCHED, source_timestamp=event.timestamp)


def match_event(e: BridgeEvent, index: CandidateIndex, cfg: MatchConfig, spec: BridgeSpec) -> MatchResult:
    lo, hi = cfg.window(e.timestamp)
    pool = index.window(index_key(e.receiver, e.token, spec), lo, hi)
    survivors = [p for p in pool if passes_criteria(e, p, cfg, spec)]
    return _classify(e, survivors)


def _event_value(e: BridgeEvent) -> int:
    if e.token.asset_class is AssetClass.NON_FUNGIBLE:
        return e.token_ids[0]
    return e.amount


def _transfer_value(t: ChainTransfer) -> int:
    if t.token.asset_class is AssetClass.NON_FUNGIBLE:
        return t.token_id
    return t.amount


def _match_default(events: list[BridgeEvent], index: CandidateIndex, cfg: MatchConfig, spec: BridgeSpec) -> list[MatchResult]:
    """Independent per-event matching through the scan kernel."""
    flat: list[ChainTransfer] = []
    slices: dict[tuple, tuple[int, int]] = {}
    intern: dict[int, int] = {}
    cand_ts: list[int] = []
    cand_vid: list[int] = []
    for key in index.keys:
        group = index.group(key)
        start = len(flat)
        for t in group:
            flat.append(t)
            cand_ts.append(t.timestamp)
            cand_vid.append(intern.setdefault(_transfer_value(t), len(intern)))
        slices[key] = (start, len(flat))

    n = len(events)
    starts = np.zeros(n, dtype=np.int64)
    stops = np.zeros(n, dtype=np.int64)
    lo = np.zeros(n, dtype=np.int64)
    hi = np.zeros(n, dtype=np.int64)
    want = np.zeros(n, dtype=np.int64)
    for i, e in enumerate(events):
        a, b = slices.get(index_key(e.receiver, e.token, spec), (0, 0))
        starts[i], stops[i] = a, b
        lo[i], hi[i] = cfg.window(e.timestamp)
        want[i] = intern.get(_event_value(e), -1)

    out_n = np.zeros(n, dtype=np.int64)
    out_first = np.zeros(n, dtype=np.int64)
    out_second = np.zeros(n, dtype=np.int64)
    get_kernel()(
        starts, stops, lo, hi, want,
        np.asarray(cand_ts, dtype=np.int64) if cand_ts else np.zeros(0, dtype=np.int64),
        np.asarray(cand_vid, dtype=np.int64) if cand_vid else np.zeros(0, dtype=np.int64),
        out_n, out_first, out_second,
    )

    results = []
    for i, e in enumerate(events):
        count = int(out_n[i])
        if count == 0:
            results.append(_classify(e, []))
        elif count == 1:
            results.append(_classify(e, [flat[int(out_first[i])]]))
        else:
            # rare path: collect the full ambiguous candidate set in Python
            survivors = [
                flat[j]
                for j in range(int(out_first[i]), int(stops[i]))
                if flat[j].timestamp <= hi[i] and passes_criteria(e, flat[j], cfg, spec)
            ]
            results.append(_classify(e, survivors))
    return results


def _match_exclusive(events: list[BridgeEvent], index: CandidateIndex, cfg: MatchConfig, spec: BridgeSpec) -> list[MatchResult]:
    """Sequential matching where each exact match consumes its transfer.

    Events are processed in ascending source-time order; classification is
    unchanged (exact iff exactly one unconsumed survivor), which keeps the
    mapping one-to-one without promoting ambiguous cases.
    """
    order = sorted(
        range(len(events)),
        key=lambda i: (events[i].timestamp, events[i].block_number, events[i].log_index, events[i].event_id),
    )
    consumed: set[int] = set()
    results: list[MatchResult | None] = [None] * len(events)
    for i in order:
        e = events[i]
        lo, hi = cfg.window(e.timestamp)
        pool = index.window(index_key(e.receiver, e.token, spec), lo, hi)
        survivors = [p for p in pool if id(p) not in consumed and passes_criteria(e, p, cfg, spec)]
        result = _classify(e, survivors)
        if result.outcome == EXACT:
            consumed.add(id(result.transfer))
        results[i] = result
    return results  # type: ignore[return-value]


def match_all(
    events: Iterable[BridgeEvent],
    transfers: Sequence[ChainTransfer],
    cfg: MatchConfig,
    spec: BridgeSpec,
) -> MatchReport:
    """Match every event against the transfer pool and aggregate a report."""
    norm_events = [x for e in events for x in explode_batch(e)]
    index = build_candidate_index(transfers, spec)
    if cfg.exclusive_assignment:
        results = _match_exclusive(norm_events, index, cfg, spec)
    else:
        results = _match_default(norm_events, index, cfg, spec)

    tally = {EXACT: 0, AMBIGUOUS: 0, UNMATCHED: 0}
    per_token_tally: dict[str, dict[str, int]] = {}
    truncated_addresses = {t.to_address for t in transfers if t.truncated}
    exposure = 0
    for e, r in zip(norm_events, results):
        tally[r.outcome] += 1
        sym = e.token.symbol.strip().upper()
        per_token_tally.setdefault(sym, {EXACT: 0, AMBIGUOUS: 0, UNMATCHED: 0})[r.outcome] += 1
        if r.outcome == UNMATCHED and e.receiver in truncated_addresses:
            exposure += 1

    return MatchReport(
        results=tuple(results),
        counts=Counts(exact=tally[EXACT], ambiguous=tally[AMBIGUOUS], unmatched=tally[UNMATCHED]),
        per_token={
            sym: Counts(exact=t[EXACT], ambiguous=t[AMBIGUOUS], unmatched=t[UNMATCHED])
            for sym, t in sorted(per_token_tally.items())
        },
        truncation_exposure=exposure,
        config=cfg,
    )


def match_withdrawals(
    burn_events: Iterable[BridgeEvent],
    exit_records: Sequence[ChainTransfer],
    cfg: MatchConfig,
    spec: BridgeSpec,
    claims: set[str] | None = None,
) -> MatchReport:
    """Mirror matching: destination-chain burns against source-chain exits.

    ERC-20 exits ride plain Transfer() events, so they enter the pool only
    when their enclosing transaction carries the withdrawal claim selector
    (pass the tx-id set from withdrawal_claim_tx_ids). Native and
    non-fungible exits have dedicated events and need no corroboration.
    """
    pool = [
        t
        for t in exit_records
        if t.token.asset_class is not AssetClass.FUNGIBLE or (claims is not None and t.tx_id in claims)
    ]
    return match_all(burn_events, pool, replace(cfg, direction=Direction.WITHDRAWAL), spec)


def extract_burn_events(transfers: Iterable[ChainTransfer], spec: BridgeSpec) -> list[BridgeEvent]:
    """Destination-chain transfers into the null contract, as burn events."""
    null_address = spec.contracts.get("null-contract", ZERO_ADDRESS)
    out = []
    for i, t in enumerate(transfers):
        if t.to_address != null_address:
            continue
        nft = t.token.asset_class is AssetClass.NON_FUNGIBLE
        out.append(
            BridgeEvent(
                event_id=f"{t.tx_id}:burn{i}",
                tx_id=t.tx_id,
                log_index=i,
                receiver=t.from_address,
                token=t.token,
                amount=None if nft else t.amount,
                token_ids=(t.token_id,) if nft else (),
                timestamp=t.timestamp,
                block_number=t.block_number,
                direction=Direction.WITHDRAWAL,
                chain=t.chain,
            )
        )
    return out


def exit_events_to_transfers(events: Iterable[BridgeEvent], spec: BridgeSpec) -> list[ChainTransfer]:
    """Adapt decoded exit events (ExitedEther/ExitedERC721) into pool records."""
    out = []
    for e in events:
        for single in explode_batch(e):
            nft = single.token.asset_class is AssetClass.NON_FUNGIBLE
            if single.token.asset_class is AssetClass.NATIVE:
                source = spec.contracts.get("ether-bridge", ZERO_ADDRESS)
            elif nft:
                source = spec.contracts.get("erc721-predicate", ZERO_ADDRESS)
            else:
                source = single.token.contract_address or ZERO_ADDRESS
            out.append(
                ChainTransfer(
                    tx_id=single.tx_id,
                    to_address=single.receiver,
                    from_address=source,
                    token=single.token,
                    amount=None if nft else single.amount,
                    token_id=single.token_ids[0] if nft else None,
                    timestamp=single.timestamp,
                    block_number=single.block_number,
                    chain=single.chain,
                )
            )
    return out
