"""Canonical domain types shared by every stage of the pipeline.

All values are immutable after construction and safe to share across
threads. Addresses and transaction hashes are carried as canonical
lowercase 0x-hex strings; token amounts and token IDs are exact Python
ints (EVM base units routinely exceed 64 bits, so no floats anywhere).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

UINT256_MAX = (1 << 256) - 1

_ADDRESS_RE = re.compile(r"0x[0-9a-fA-F]{40}\Z")
_TX_ID_RE = re.compile(r"0x[0-9a-fA-F]{64}\Z")

EXACT = "exact"
AMBIGUOUS = "ambiguous"
UNMATCHED = "unmatched"


class BridgeTraceError(Exception):
    """Base class for all toolkit errors."""


class AddressError(BridgeTraceError, ValueError):
    """Malformed address or transaction-hash text."""


class AssetClass(Enum):
    NATIVE = "native"
    FUNGIBLE = "fungible"
    NON_FUNGIBLE = "nft"


class Direction(Enum):
    DEPOSIT = "deposit"
    WITHDRAWAL = "withdrawal"


def canonicalize_address(text: str) -> str:
    """Lowercase a 0x-prefixed 40-hex-digit address; idempotent.

    Explorer APIs and nodes disagree on checksum casing, so comparison is
    case-insensitive throughout the toolkit.
    """
    if not isinstance(text, str) or not _ADDRESS_RE.match(text):
        raise AddressError(f"not a 0x-prefixed 40-hex-digit address: {text!r}")
    return text.lower()


def canonicalize_tx_id(text: str) -> str:
    """Lowercase a 0x-prefixed 64-hex-digit transaction hash."""
    if not isinstance(text, str) or not _TX_ID_RE.match(text):
        raise AddressError(f"not a 0x-prefixed 64-hex-digit tx hash: {text!r}")
    return text.lower()


def normalize_symbol(symbol: str) -> str:
    return symbol.strip().upper()


def token_equivalent(a: TokenKey, b: TokenKey, spec) -> bool:
    """True iff the two tokens denote the same bridged asset.

    Symbols are compared case-insensitively after mapping each through the
    bridge spec's equivalence classes (e.g. native ETH locked on the source
    chain arrives as WETH on the destination chain). Total and symmetric.
    """
    return spec.symbol_class(a.symbol) == spec.symbol_class(b.symbol)


def _check_uint256(value: int, what: str) -> None:
    if not 0 <= value <= UINT256_MAX:
        raise ValueError(f"{what} out of uint256 range: {value}")


@dataclass(frozen=True)
class TokenKey:
    """Token identity: symbol plus asset class, optionally the contract."""

    symbol: str
    asset_class: AssetClass
    contract_address: str | None = None


@dataclass(frozen=True)
class BridgeEvent:
    """One decoded bridge action (lock or exit or burn) on one chain."""

    event_id: str
    tx_id: str
    log_index: int
    receiver: str
    token: TokenKey
    amount: int | None
    token_ids: tuple[int, ...]
    timestamp: int
    block_number: int
    direction: Direction
    chain: str

    def __post_init__(self) -> None:
        if self.token.asset_class is AssetClass.NON_FUNGIBLE:
            if not self.token_ids or self.amount is not None:
                raise ValueError(
                    f"{self.event_id}: non-fungible event needs token IDs and no amount"
                )
            for tid in self.token_ids:
                _check_uint256(tid, "token ID")
        else:
            if self.amount is None or self.token_ids:
                raise ValueError(
                    f"{self.event_id}: fungible/native event needs an amount and no token IDs"
                )
            _check_uint256(self.amount, "amount")


@dataclass(frozen=True)
class ChainTransfer:
    """A destination-side transfer record for one address.

    ``truncated`` is inherited from ingestion: the provider's page limit was
    hit for this address, so its history may be incomplete.
    """

    tx_id: str
    to_address: str
    from_address: str
    token: TokenKey
    amount: int | None
    token_id: int | None
    timestamp: int
    block_number: int
    chain: str
    truncated: bool = False

    def __post_init__(self) -> None:
        if self.token.asset_class is AssetClass.NON_FUNGIBLE:
            if self.token_id is None or self.amount is not None:
                raise ValueError(f"{self.tx_id}: non-fungible transfer needs a token ID and no amount")
            _check_uint256(self.token_id, "token ID")
        else:
            if self.amount is None or self.token_id is not None:
                raise ValueError(f"{self.tx_id}: fungible/native transfer needs an amount and no token ID")
            _check_uint256(self.amount, "amount")


@dataclass(frozen=True)
class MatchResult:
    """Per-event matching outcome.

    Exact iff exactly one candidate survived all criteria; the candidate
    tuple holds every survivor (length >= 2 only when ambiguous).
    elapsed_seconds is destination minus source timestamp, present iff exact.
    """

    event_id: str
    outcome: str
    source_timestamp: int
    transfer: ChainTransfer | None = None
    candidates: tuple[ChainTransfer, ...] = ()
    elapsed_seconds: int | None = None

    def __post_init__(self) -> None:
        if self.outcome not in (EXACT, AMBIGUOUS, UNMATCHED):
            raise ValueError(f"unknown outcome {self.outcome!r}")
        if self.outcome == EXACT and (self.transfer is None or self.elapsed_seconds is None):
            raise ValueError(f"{self.event_id}: exact result needs a transfer and elapsed time")
        if self.outcome == AMBIGUOUS and len(self.candidates) < 2:
            raise ValueError(f"{self.event_id}: ambiguous result needs >= 2 candidates")

    @property
    def counterpart_tx_id(self) -> str | None:
        return self.transfer.tx_id if self.transfer is not None else None


@dataclass(frozen=True)
class ResultRow:
    """A match.v1 record read back from disk (candidates reduced to tx ids)."""

    event_id: str
    outcome: str
    source_timestamp: int
    counterpart_tx_id: str | None
    elapsed_seconds: int | None
    candidates: tuple[str, ...] = ()


# --- row (de)serialization for the .ndj schemas -------------------------
#
# Amounts and token IDs travel as decimal strings so files stay readable
# by tools that cannot parse 256-bit JSON numbers.

def token_to_row(token: TokenKey) -> dict:
    return {
        "symbol": token.symbol,
        "class": token.asset_class.value,
        "contractAddress": token.contract_address,
    }


def token_from_row(row: dict) -> TokenKey:
    contract = row.get("contractAddress")
    return TokenKey(
        symbol=row["symbol"],
        asset_class=AssetClass(row["class"]),
        contract_address=canonicalize_address(contract) if contract else None,
    )


def event_to_row(event: BridgeEvent) -> dict:
    return {
        "eventId": event.event_id,
        "txId": event.tx_id,
        "logIndex": event.log_index,
        "receiver": event.receiver,
        "token": token_to_row(event.token),
        "amount": None if event.amount is None else str(event.amount),
        "tokenIds": [str(t) for t in event.token_ids],
        "timestamp": event.timestamp,
        "blockNumber": event.block_number,
        "direction": event.direction.value,
        "chain": event.chain,
    }


def event_from_row(row: dict) -> BridgeEvent:
    return BridgeEvent(
        event_id=row["eventId"],
        tx_id=canonicalize_tx_id(row["txId"]),
        log_index=row["logIndex"],
        receiver=canonicalize_address(row["receiver"]),
        token=token_from_row(row["token"]),
        amount=None if row.get("amount") is None else int(row["amount"]),
        token_ids=tuple(int(t) for t in row.get("tokenIds", [])),
        timestamp=row["timestamp"],
        block_number=row["blockNumber"],
        direction=Direction(row["direction"]),
        chain=row["chain"],
    )


def transfer_to_row(transfer: ChainTransfer) -> dict:
    return {
        "txId": transfer.tx_id,
        "toAddress": transfer.to_address,
        "fromAddress": transfer.from_address,
        "token": token_to_row(transfer.token),
        "amount": None if transfer.amount is None else str(transfer.amount),
        "tokenId": None if transfer.token_id is None else str(transfer.token_id),
        "timestamp": transfer.timestamp,
        "blockNumber": transfer.block_number,
        "chain": transfer.chain,
        "truncated": transfer.truncated,
    }


def transfer_from_row(row: dict) -> ChainTransfer:
    return ChainTransfer(
        tx_id=canonicalize_tx_id(row["txId"]),
        to_address=canonicalize_address(row["toAddress"]),
        from_address=canonicalize_address(row["fromAddress"]),
        token=token_from_row(row["token"]),
        amount=None if row.get("amount") is None else int(row["amount"]),
        token_id=None if row.get("tokenId") is None else int(row["tokenId"]),
        timestamp=row["timestamp"],
        block_number=row["blockNumber"],
        chain=row["chain"],
        truncated=bool(row.get("truncated", False)),
    )


def result_to_row(result: MatchResult) -> dict:
    return {
        "eventId": result.event_id,
        "outcome": result.outcome,
        "counterpartTxId": result.transfer.tx_id if result.transfer else None,
        "elapsedSeconds": result.elapsed_seconds,
        "sourceTimestamp": result.source_timestamp,
        "candidates": [c.tx_id for c in result.candidates] if result.outcome == AMBIGUOUS else [],
    }


def result_from_row(row: dict) -> ResultRow:
    counterpart = row.get("counterpartTxId")
    return ResultRow(
        event_id=row["eventId"],
        outcome=row["outcome"],
        source_timestamp=row["sourceTimestamp"],
        counterpart_tx_id=canonicalize_tx_id(counterpart) if counterpart else None,
        elapsed_seconds=row.get("elapsedSeconds"),
        candidates=tuple(row.get("candidates", [])),
    )
