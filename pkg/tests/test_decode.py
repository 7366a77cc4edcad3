import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bridgetrace.bridgespec import default_polygon_pos_spec
from bridgetrace.decode import (
    DecodeError,
    RawLog,
    RawTransaction,
    decode_log,
    encode_log,
    explode_batch,
    is_withdrawal_claim,
    raw_log_from_row,
    raw_log_to_row,
    raw_tx_from_row,
    raw_tx_to_row,
)
from bridgetrace.keccak import function_selector
from bridgetrace.model import AssetClass, Direction
from tests.conftest import addr, mk_event, tx

SPEC = default_polygon_pos_spec()
ERC20_BRIDGE = SPEC.contracts["erc20-bridge"]
USDC = "0xa0b86991c6218b36c1d19d4a2e9eb0ce3606eb48"


def _encode(name, **kwargs):
    descriptor = SPEC.descriptor_named(name)
    defaults = dict(
        address=ERC20_BRIDGE,
        receiver=addr(0xABC),
        tx_id=tx(1),
        log_index=3,
        block_number=17_000_000,
        block_timestamp=1_690_000_000,
    )
    defaults.update(kwargs)
    return encode_log(descriptor, **defaults)


def test_decode_locked_erc20_fixture():
    log = _encode("LockedERC20", amount=1_000_000, token_contract=USDC)
    event = decode_log(log, SPEC)
    assert event is not None
    assert event.token.asset_class is AssetClass.FUNGIBLE
    assert event.amount == 1_000_000
    assert event.receiver == addr(0xABC)
    assert event.token.symbol == "USDC"  # registry lookup by contract
    assert event.direction is Direction.DEPOSIT
    assert event.event_id == f"{tx(1)}:3"


def test_decode_ignores_non_bridge_address():
    log = _encode("LockedERC20", amount=5, token_contract=USDC, address=addr(0xDEAD))
    assert decode_log(log, SPEC) is None


def test_decode_ignores_unknown_topic():
    log = _encode("LockedERC20", amount=5, token_contract=USDC)
    log = RawLog(
        address=log.address,
        topics=("0x" + "77" * 32,) + log.topics[1:],
        data=log.data,
        tx_id=log.tx_id,
        log_index=log.log_index,
        block_number=log.block_number,
        block_timestamp=log.block_timestamp,
    )
    assert decode_log(log, SPEC) is None


def test_decode_truncated_data_raises():
    log = _encode("LockedERC20", amount=1_000_000, token_contract=USDC)
    bad = RawLog(
        address=log.address,
        topics=log.topics,
        data=log.data[:10],
        tx_id=log.tx_id,
        log_index=log.log_index,
        block_number=log.block_number,
        block_timestamp=log.block_timestamp,
    )
    with pytest.raises(DecodeError) as err:
        decode_log(bad, SPEC)
    assert err.value.tx_id == log.tx_id
    assert err.value.log_index == log.log_index


def test_decode_native_uses_native_symbol():
    log = _encode("LockedEther", address=SPEC.contracts["ether-bridge"], amount=10**18)
    event = decode_log(log, SPEC)
    assert event.token.symbol == "ETH"
    assert event.token.asset_class is AssetClass.NATIVE


def test_decode_batch_token_ids():
    log = _encode(
        "LockedERC721Batch",
        address=SPEC.contracts["erc721-predicate"],
        token_ids=(7, 9, 12),
        token_contract=addr(0xF00),
    )
    event = decode_log(log, SPEC)
    assert event.token_ids == (7, 9, 12)
    assert event.amount is None


def test_decode_unknown_token_contract_falls_back_to_address():
    unknown = addr(0xBEEF)
    log = _encode("LockedERC20", amount=5, token_contract=unknown)
    event = decode_log(log, SPEC)
    assert event.token.symbol == unknown
    assert event.token.contract_address == unknown


def test_explode_batch_three_ids():
    event = mk_event(asset_class=AssetClass.NON_FUNGIBLE, token_ids=(7, 9, 12), amount=None)
    parts = explode_batch(event)
    assert [p.token_ids for p in parts] == [(7,), (9,), (12,)]
    assert [p.event_id for p in parts] == [f"{event.event_id}#{i}" for i in range(3)]
    # multiset of (receiver, symbol, id) preserved
    assert {(p.receiver, p.token.symbol, p.token_ids[0]) for p in parts} == {
        (event.receiver, event.token.symbol, t) for t in event.token_ids
    }


def test_explode_passthrough():
    fungible = mk_event()
    assert explode_batch(fungible) == [fungible]
    single = mk_event(asset_class=AssetClass.NON_FUNGIBLE, token_ids=(5,), amount=None)
    assert explode_batch(single) == [single]


def _tx_with_input(data: bytes) -> RawTransaction:
    return RawTransaction(
        tx_id=tx(9),
        from_address=addr(1),
        to_address=addr(2),
        input=data,
        value=0,
        block_number=1,
        block_timestamp=1,
    )


def test_withdrawal_claim_selector_match():
    assert is_withdrawal_claim(_tx_with_input(bytes.fromhex("3805550f") + b"proofbytes"), SPEC)


def test_withdrawal_claim_empty_input():
    assert not is_withdrawal_claim(_tx_with_input(b""), SPEC)
    assert not is_withdrawal_claim(_tx_with_input(b"\x38\x05"), SPEC)


def test_withdrawal_claim_rejects_plain_transfer_selector():
    transfer_selector = function_selector("transfer(address,uint256)")
    assert transfer_selector.hex() == "a9059cbb"
    assert not is_withdrawal_claim(_tx_with_input(transfer_selector + b"\x00" * 64), SPEC)


@settings(max_examples=60, deadline=None)
@given(
    receiver=st.binary(min_size=20, max_size=20),
    amount=st.integers(min_value=0, max_value=(1 << 256) - 1),
    contract=st.binary(min_size=20, max_size=20),
)
def test_fungible_round_trip_property(receiver, amount, contract):
    log = _encode(
        "LockedERC20",
        receiver="0x" + receiver.hex(),
        amount=amount,
        token_contract="0x" + contract.hex(),
    )
    event = decode_log(log, SPEC)
    assert event.receiver == "0x" + receiver.hex()
    assert event.amount == amount
    assert event.token.contract_address == "0x" + contract.hex()


@settings(max_examples=60, deadline=None)
@given(token_ids=st.lists(st.integers(min_value=0, max_value=(1 << 256) - 1), min_size=1, max_size=20))
def test_batch_round_trip_property(token_ids):
    log = _encode(
        "LockedERC721Batch",
        address=SPEC.contracts["erc721-predicate"],
        token_ids=tuple(token_ids),
        token_contract=addr(0xF00),
    )
    event = decode_log(log, SPEC)
    assert event.token_ids == tuple(token_ids)


def test_decode_total_over_arbitrary_bytes():
    # never aborts: outcome is an event, None, or DecodeError
    import random

    rng = random.Random(0)
    spec_topics = [d.topic0 for d in SPEC.events]
    outcomes = {"event": 0, "none": 0, "error": 0}
    for i in range(300):
        topics = tuple(
            t if rng.random() < 0.5 else "0x" + rng.randbytes(32).hex()
            for t in [rng.choice(spec_topics)] + ["0x" + rng.randbytes(32).hex()] * rng.randrange(0, 4)
        )
        log = RawLog(
            address=rng.choice(list(SPEC.contracts.values()) + [addr(i)]),
            topics=topics if rng.random() < 0.9 else (),
            data=rng.randbytes(rng.randrange(0, 200)),
            tx_id=tx(i),
            log_index=i,
            block_number=i,
            block_timestamp=i,
        )
        try:
            event = decode_log(log, SPEC)
            outcomes["event" if event else "none"] += 1
        except DecodeError:
            outcomes["error"] += 1
    assert sum(outcomes.values()) == 300


def test_raw_row_round_trips():
    log = _encode("LockedERC20", amount=5, token_contract=USDC)
    assert raw_log_from_row(raw_log_to_row(log)) == log
    claim = _tx_with_input(bytes.fromhex("3805550f") + b"\x01\x02")
    assert raw_tx_from_row(raw_tx_to_row(claim)) == claim
