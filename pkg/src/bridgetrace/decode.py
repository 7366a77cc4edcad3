"""Turn raw EVM logs and transactions into bridge events per a BridgeSpec.

Only the slot layouts expressible in EventDescriptor are supported: indexed
topics, static 32-byte data words, and one level of dynamic uint256[] for
batch token IDs. This is deliberately not a full ABI system.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from bridgetrace.bridgespec import (
    ROLE_AMOUNT,
    ROLE_RECEIVER,
    ROLE_TOKEN_CONTRACT,
    ROLE_TOKEN_ID,
    ROLE_TOKEN_ID_LIST,
    BridgeSpec,
    EventDescriptor,
)
from bridgetrace.model import (
    AssetClass,
    BridgeEvent,
    BridgeTraceError,
    TokenKey,
    canonicalize_address,
)

_WORD = 32


class DecodeError(BridgeTraceError):
    """Log matched a descriptor but its payload does not fit the layout."""

    def __init__(self, message: str, tx_id: str, log_index: int) -> None:
        super().__init__(f"{tx_id}[{log_index}]: {message}")
        self.tx_id = tx_id
        self.log_index = log_index


@dataclass(frozen=True)
class RawLog:
    address: str
    topics: tuple[str, ...]  # 0x-prefixed 32-byte hex, topic0 first
    data: bytes
    tx_id: str
    log_index: int
    block_number: int
    block_timestamp: int


@dataclass(frozen=True)
class RawTransaction:
    tx_id: str
    from_address: str
    to_address: str | None
    input: bytes
    value: int
    block_number: int
    block_timestamp: int


def _word_to_address(word: bytes) -> str:
    return canonicalize_address("0x" + word[-20:].hex())


def _topic_word(log: RawLog, index: int) -> bytes:
    if index >= len(log.topics):
        raise DecodeError(f"topic {index} missing ({len(log.topics)} topics)", log.tx_id, log.log_index)
    return bytes.fromhex(log.topics[index][2:])


def _data_word(log: RawLog, index: int) -> bytes:
    start = index * _WORD
    if len(log.data) < start + _WORD:
        raise DecodeError(f"data too short for word {index}", log.tx_id, log.log_index)
    return log.data[start : start + _WORD]


def _data_uint_list(log: RawLog, offset_word: int) -> tuple[int, ...]:
    offset = int.from_bytes(_data_word(log, offset_word), "big")
    if offset % _WORD or len(log.data) < offset + _WORD:
        raise DecodeError(f"bad dynamic offset {offset}", log.tx_id, log.log_index)
    count = int.from_bytes(log.data[offset : offset + _WORD], "big")
    end = offset + _WORD + count * _WORD
    if count > 2**20 or len(log.data) < end:
        raise DecodeError(f"dynamic array of {count} items overruns data", log.tx_id, log.log_index)
    return tuple(
        int.from_bytes(log.data[p : p + _WORD], "big")
        for p in range(offset + _WORD, end, _WORD)
    )


def decode_log(log: RawLog, spec: BridgeSpec, chain: str | None = None) -> BridgeEvent | None:
    """Decode one raw log, or return None when it is not a bridge event.

    Non-matching logs are not errors (bridge contracts emit plenty of
    unrelated events); only a layout violation on a matched topic0 raises.
    """
    if not log.topics:
        return None
    descriptor = spec.descriptor_for_topic(log.topics[0])
    if descriptor is None:
        return None
    address = log.address.lower()
    if not descriptor.any_contract and address not in spec.contract_addresses:
        return None

    receiver = None
    amount = None
    token_ids: tuple[int, ...] = ()
    token_contract = address if descriptor.any_contract else None

    for slot in descriptor.fields:
        if slot.kind == "topic":
            word = _topic_word(log, slot.index)
        elif slot.role == ROLE_TOKEN_ID_LIST:
            token_ids = _data_uint_list(log, slot.index)
            continue
        else:
            word = _data_word(log, slot.index)
        if slot.role == ROLE_RECEIVER:
            receiver = _word_to_address(word)
        elif slot.role == ROLE_AMOUNT:
            amount = int.from_bytes(word, "big")
        elif slot.role == ROLE_TOKEN_ID:
            token_ids = (int.from_bytes(word, "big"),)
        elif slot.role == ROLE_TOKEN_CONTRACT:
            token_contract = _word_to_address(word)

    if descriptor.asset_class is AssetClass.NATIVE:
        symbol = spec.native_symbol
    elif token_contract is not None:
        symbol = spec.token_symbol_for_contract(token_contract) or token_contract
    else:
        symbol = "?"

    token = TokenKey(symbol=symbol, asset_class=descriptor.asset_class, contract_address=token_contract)
    non_fungible = descriptor.asset_class is AssetClass.NON_FUNGIBLE
    return BridgeEvent(
        event_id=f"{log.tx_id}:{log.log_index}",
        tx_id=log.tx_id,
        log_index=log.log_index,
        receiver=receiver,
        token=token,
        amount=None if non_fungible else amount,
        token_ids=token_ids if non_fungible else (),
        timestamp=log.block_timestamp,
        block_number=log.block_number,
        direction=descriptor.direction,
        chain=chain or spec.source_chain,
    )


def explode_batch(event: BridgeEvent) -> list[BridgeEvent]:
    """Split a multi-ID batch event into one event per token ID.

    Everything else passes through unchanged as a singleton, so the matcher
    can assume exactly one token ID per non-fungible event.
    """
    if event.token.asset_class is not AssetClass.NON_FUNGIBLE or len(event.token_ids) == 1:
        return [event]
    return [
        replace(event, event_id=f"{event.event_id}#{i}", token_ids=(token_id,))
        for i, token_id in enumerate(event.token_ids)
    ]


def is_withdrawal_claim(tx: RawTransaction, spec: BridgeSpec) -> bool:
    """True iff the transaction calls the bridge's withdrawal claim method."""
    return len(tx.input) >= 4 and tx.input[:4] == spec.withdrawal_method_id


def withdrawal_claim_tx_ids(txs, spec: BridgeSpec) -> set[str]:
    """Tx ids carrying the claim selector; corroborates ERC-20 exit transfers."""
    return {tx.tx_id for tx in txs if is_withdrawal_claim(tx, spec)}


# --- forward encoder (fixtures and round-trip tests) ---------------------

def encode_log(
    descriptor: EventDescriptor,
    *,
    address: str,
    receiver: str,
    amount: int | None = None,
    token_ids: tuple[int, ...] = (),
    token_contract: str | None = None,
    tx_id: str,
    log_index: int,
    block_number: int,
    block_timestamp: int,
) -> RawLog:
    """Encode field values into a RawLog per the descriptor layout."""
    max_topic = max((s.index for s in descriptor.fields if s.kind == "topic"), default=0)
    topics = [descriptor.topic0] + ["0x" + "00" * 32] * max_topic

    static_indices = [s.index for s in descriptor.fields if s.kind == "data"]
    n_static = max(static_indices) + 1 if static_indices else 0
    words = [b"\x00" * _WORD] * n_static
    tail = b""

    def put(slot, word: bytes) -> None:
        nonlocal topics, words
        if slot.kind == "topic":
            topics[slot.index] = "0x" + word.hex()
        else:
            words[slot.index] = word

    for slot in descriptor.fields:
        if slot.role == ROLE_RECEIVER:
            put(slot, b"\x00" * 12 + bytes.fromhex(receiver[2:]))
        elif slot.role == ROLE_AMOUNT:
            put(slot, int(amount).to_bytes(_WORD, "big"))
        elif slot.role == ROLE_TOKEN_ID:
            put(slot, int(token_ids[0]).to_bytes(_WORD, "big"))
        elif slot.role == ROLE_TOKEN_CONTRACT:
            put(slot, b"\x00" * 12 + bytes.fromhex((token_contract or address)[2:]))
        elif slot.role == ROLE_TOKEN_ID_LIST:
            offset = n_static * _WORD + len(tail)
            put(slot, offset.to_bytes(_WORD, "big"))
            tail += len(token_ids).to_bytes(_WORD, "big")
            tail += b"".join(int(t).to_bytes(_WORD, "big") for t in token_ids)

    return RawLog(
        address=canonicalize_address(address),
        topics=tuple(topics),
        data=b"".join(words) + tail,
        tx_id=tx_id,
        log_index=log_index,
        block_number=block_number,
        block_timestamp=block_timestamp,
    )


# --- .ndj row forms -------------------------------------------------------

def raw_log_to_row(log: RawLog) -> dict:
    return {
        "address": log.address,
        "topics": list(log.topics),
        "data": "0x" + log.data.hex(),
        "txId": log.tx_id,
        "logIndex": log.log_index,
        "blockNumber": log.block_number,
        "blockTimestamp": log.block_timestamp,
    }


def raw_log_from_row(row: dict) -> RawLog:
    return RawLog(
        address=canonicalize_address(row["address"]),
        topics=tuple(t.lower() for t in row["topics"]),
        data=bytes.fromhex(row["data"][2:]),
        tx_id=row["txId"].lower(),
        log_index=row["logIndex"],
        block_number=row["blockNumber"],
        block_timestamp=row["blockTimestamp"],
    )


def raw_tx_to_row(tx: RawTransaction) -> dict:
    return {
        "txId": tx.tx_id,
        "from": tx.from_address,
        "to": tx.to_address,
        "input": "0x" + tx.input.hex(),
        "value": str(tx.value),
        "blockNumber": tx.block_number,
        "blockTimestamp": tx.block_timestamp,
    }


def raw_tx_from_row(row: dict) -> RawTransaction:
    to = row.get("to")
    return RawTransaction(
        tx_id=row["txId"].lower(),
        from_address=canonicalize_address(row["from"]),
        to_address=canonicalize_address(to) if to else None,
        input=bytes.fromhex(row["input"][2:]),
        value=int(row["value"]),
        block_number=row["blockNumber"],
        block_timestamp=row["blockTimestamp"],
    )
