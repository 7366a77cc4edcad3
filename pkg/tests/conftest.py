"""Shared fixtures and record factories for the test suite."""

from __future__ import annotations

import pytest

from bridgetrace.bridgespec import default_polygon_pos_spec
from bridgetrace.decode import explode_batch
from bridgetrace.match.engine import MatchConfig, passes_criteria
from bridgetrace.model import (
    AMBIGUOUS,
    EXACT,
    UNMATCHED,
    AssetClass,
    BridgeEvent,
    ChainTransfer,
    Direction,
    MatchResult,
    TokenKey,
)


def addr(n: int) -> str:
    return "0x" + format(n, "040x")


def tx(n: int) -> str:
    return "0x" + format(n, "064x")


def mk_token(symbol: str = "USDC", asset_class: AssetClass = AssetClass.FUNGIBLE,
             contract: str | None = None) -> TokenKey:
    return TokenKey(symbol=symbol, asset_class=asset_class, contract_address=contract)


def mk_event(
    n: int = 1,
    *,
    receiver: str | None = None,
    symbol: str = "USDC",
    asset_class: AssetClass = AssetClass.FUNGIBLE,
    amount: int | None = 1_000_000,
    token_ids: tuple[int, ...] = (),
    timestamp: int = 1_000,
    block_number: int = 100,
    direction: Direction = Direction.DEPOSIT,
    chain: str = "ethereum",
) -> BridgeEvent:
    nft = asset_class is AssetClass.NON_FUNGIBLE
    return BridgeEvent(
        event_id=f"{tx(n)}:0",
        tx_id=tx(n),
        log_index=0,
        receiver=receiver or addr(1),
        token=mk_token(symbol, asset_class),
        amount=None if nft else amount,
        token_ids=token_ids if nft else (),
        timestamp=timestamp,
        block_number=block_number,
        direction=direction,
        chain=chain,
    )


def mk_transfer(
    n: int = 1000,
    *,
    to_address: str | None = None,
    from_address: str | None = None,
    symbol: str = "USDC",
    asset_class: AssetClass = AssetClass.FUNGIBLE,
    amount: int | None = 1_000_000,
    token_id: int | None = None,
    timestamp: int = 1_300,
    block_number: int = 5_000,
    chain: str = "polygon",
    truncated: bool = False,
) -> ChainTransfer:
    nft = asset_class is AssetClass.NON_FUNGIBLE
    return ChainTransfer(
        tx_id=tx(n),
        to_address=to_address or addr(1),
        from_address=from_address or addr(99),
        token=mk_token(symbol, asset_class),
        amount=None if nft else amount,
        token_id=token_id if nft else None,
        timestamp=timestamp,
        block_number=block_number,
        chain=chain,
        truncated=truncated,
    )


def naive_match_all(events, transfers, cfg: MatchConfig, spec) -> list[MatchResult]:
    """Brute-force oracle: all-pairs criteria filter, no index."""
    results = []
    for event in (x for e in events for x in explode_batch(e)):
        survivors = sorted(
            (p for p in transfers if passes_criteria(event, p, cfg, spec)),
            key=lambda t: (t.timestamp, t.block_number, t.tx_id),
        )
        if len(survivors) == 1:
            hit = survivors[0]
            results.append(
                MatchResult(
                    event_id=event.event_id,
                    outcome=EXACT,
                    source_timestamp=event.timestamp,
                    transfer=hit,
                    candidates=(hit,),
                    elapsed_seconds=hit.timestamp - event.timestamp,
                )
            )
        elif survivors:
            results.append(
                MatchResult(
                    event_id=event.event_id,
                    outcome=AMBIGUOUS,
                    source_timestamp=event.timestamp,
                    candidates=tuple(survivors),
                )
            )
        else:
            results.append(
                MatchResult(event_id=event.event_id, outcome=UNMATCHED, source_timestamp=event.timestamp)
            )
    return results


@pytest.fixture(scope="session")
def spec():
    return default_polygon_pos_spec()
