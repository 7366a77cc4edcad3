"""Synthetic two-chain bridge traffic with known ground truth.

The generator emits the same event/transfer records the ingest pipeline
produces, plus a truth map from event id to the counterpart transfer (or
"withheld" when the scenario simulates explorer truncation), so matcher
precision and recall are checkable exactly at desk scale. Generation is
fully determined by (scenario, direction).
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Mapping, Sequence

from bridgetrace.model import (
    AMBIGUOUS,
    EXACT,
    AssetClass,
    BridgeEvent,
    ChainTransfer,
    Direction,
    TokenKey,
)

SOURCE_CHAIN = "ethereum"
DESTINATION_CHAIN = "polygon"

FUNGIBLE_SYMBOLS = ("USDC", "USDT", "DAI", "WBTC", "LINK")
NFT_SYMBOLS = ("VOXCAT", "ROBOPET", "PIXOWL")

_BLOCK_BASE = {SOURCE_CHAIN: 15_000_000, DESTINATION_CHAIN: 33_000_000}
_BLOCK_SECONDS = {SOURCE_CHAIN: 12, DESTINATION_CHAIN: 2}


def _symbol_contract(symbol: str) -> str:
    digest = hashlib.sha256(f"bridgetrace-token:{symbol}".encode()).hexdigest()
    return "0x" + digest[:40]


@dataclass(frozen=True)
class Latency:
    """Per-pair settlement delay model, in whole seconds."""

    kind: str  # "uniform" | "lognormal" | "point"
    params: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.kind == "uniform":
            lo, hi = self.params
            if not (0 < lo <= hi):
                raise ValueError(f"uniform latency needs 0 < lo <= hi, got {self.params}")
        elif self.kind == "lognormal":
            mu, sigma = self.params
            if sigma <= 0:
                raise ValueError("lognormal latency needs sigma > 0")
        elif self.kind == "point":
            (v,) = self.params
            if v <= 0:
                raise ValueError("point latency needs a positive value")
        else:
            raise ValueError(f"unknown latency kind {self.kind!r}")

    @property
    def min_seconds(self) -> int:
        if self.kind == "uniform":
            return int(self.params[0])
        if self.kind == "point":
            return int(self.params[0])
        return 1

    @property
    def max_seconds(self) -> int:
        if self.kind == "uniform":
            return int(self.params[1])
        if self.kind == "point":
            return int(self.params[0])
        mu, sigma = self.params
        return max(1, round(math.exp(mu + 4 * sigma)))

    def draw(self, rng: random.Random) -> int:
        if self.kind == "uniform":
            return rng.randint(int(self.params[0]), int(self.params[1]))
        if self.kind == "point":
            return int(self.params[0])
        # capped so every generated pair stays matchable at max_seconds
        raw = round(rng.lognormvariate(self.params[0], self.params[1]))
        return min(self.max_seconds, max(1, raw))

    def render(self) -> str:
        return f"{self.kind}:" + ",".join(format(p, "g") for p in self.params)

    @staticmethod
    def parse(text: str) -> "Latency":
        kind, _, rest = text.partition(":")
        try:
            params = tuple(float(p) for p in rest.split(",") if p != "")
        except ValueError as exc:
            raise ValueError(f"bad latency spec {text!r}") from exc
        return Latency(kind=kind, params=params)


@dataclass(frozen=True)
class TrafficScenario:
    n_pairs: int
    latency: Latency
    asset_mix: tuple[tuple[str, float], ...] = (("native", 0.5), ("fungible", 0.3), ("nft", 0.2))
    noise_transfer_rate: float = 0.0
    value_collision_rate: float = 0.0
    missing_counterpart_rate: float = 0.0
    address_pool_size: int = 250
    seed: int = 0
    span_days: int = 3
    start_timestamp: int = 1_640_995_200  # 2022-01-01T00:00:00Z

    def __post_init__(self) -> None:
        # canonical mix order: the draw sequence must not depend on how the
        # mix was written down
        object.__setattr__(self, "asset_mix", tuple(sorted(self.asset_mix)))
        if self.n_pairs < 0:
            raise ValueError("n_pairs must be >= 0")
        if self.address_pool_size < 1:
            raise ValueError("address_pool_size must be >= 1")
        if self.span_days < 1:
            raise ValueError("span_days must be >= 1")
        for name, rate in (
            ("noise_transfer_rate", self.noise_transfer_rate),
            ("value_collision_rate", self.value_collision_rate),
            ("missing_counterpart_rate", self.missing_counterpart_rate),
        ):
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"{name} must be within [0, 1], got {rate}")
        weights = dict(self.asset_mix)
        if set(weights) - {"native", "fungible", "nft"} or sum(weights.values()) <= 0:
            raise ValueError(f"bad asset mix {self.asset_mix}")
        if any(w < 0 for w in weights.values()):
            raise ValueError("asset mix weights must be >= 0")

    def to_dict(self) -> dict:
        return {
            "n_pairs": self.n_pairs,
            "latency": self.latency.render(),
            "asset_mix": {k: v for k, v in self.asset_mix},
            "noise_transfer_rate": self.noise_transfer_rate,
            "value_collision_rate": self.value_collision_rate,
            "missing_counterpart_rate": self.missing_counterpart_rate,
            "address_pool_size": self.address_pool_size,
            "seed": self.seed,
            "span_days": self.span_days,
            "start_timestamp": self.start_timestamp,
        }

    @staticmethod
    def from_dict(doc: Mapping) -> "TrafficScenario":
        mix = doc.get("asset_mix")
        kwargs = {}
        if mix is not None:
            kwargs["asset_mix"] = tuple(sorted(mix.items()))
        for key in (
            "noise_transfer_rate",
            "value_collision_rate",
            "missing_counterpart_rate",
            "address_pool_size",
            "seed",
            "span_days",
            "start_timestamp",
        ):
            if key in doc:
                kwargs[key] = doc[key]
        return TrafficScenario(
            n_pairs=doc["n_pairs"],
            latency=Latency.parse(doc["latency"]) if isinstance(doc["latency"], str) else doc["latency"],
            **kwargs,
        )


def _rand_address(rng: random.Random) -> str:
    return "0x" + rng.randbytes(20).hex()


def _rand_tx(rng: random.Random) -> str:
    return "0x" + rng.randbytes(32).hex()


def _block_at(chain: str, ts: int, start: int) -> int:
    return _BLOCK_BASE[chain] + (ts - start) // _BLOCK_SECONDS[chain]


class _TokenTable:
    """Draws per-class tokens and guarantees value uniqueness for true pairs."""

    def __init__(self, rng: random.Random, direction: Direction) -> None:
        self._rng = rng
        self._direction = direction
        self._used_amounts: set[int] = set()
        self._used_nft_ids: dict[str, set[int]] = {}

    def pick_class(self, mix: tuple[tuple[str, float], ...]) -> str:
        total = sum(w for _, w in mix)
        roll = self._rng.random() * total
        acc = 0.0
        for name, weight in mix:
            acc += weight
            if roll < acc:
                return name
        return mix[-1][0]

    def unique_amount(self) -> int:
        while True:
            value = self._rng.randrange(10**15, 10**24)
            if value not in self._used_amounts:
                self._used_amounts.add(value)
                return value

    def unique_nft_id(self, symbol: str) -> int:
        used = self._used_nft_ids.setdefault(symbol, set())
        while True:
            value = self._rng.randrange(1, 10**9)
            if value not in used:
                used.add(value)
                return value

    def pair_tokens(self, cls: str) -> tuple[TokenKey, TokenKey]:
        """(event token, transfer token) for one true pair."""
        if cls == "native":
            native = TokenKey("ETH", AssetClass.NATIVE)
            wrapped = TokenKey("WETH", AssetClass.FUNGIBLE, _symbol_contract("WETH"))
            if self._direction is Direction.DEPOSIT:
                return native, wrapped  # lock ETH, receive WETH
            return wrapped, native  # burn WETH, exit ETH
        if cls == "fungible":
            symbol = self._rng.choice(FUNGIBLE_SYMBOLS)
            key = TokenKey(symbol, AssetClass.FUNGIBLE, _symbol_contract(symbol))
            return key, key
        symbol = self._rng.choice(NFT_SYMBOLS)
        key = TokenKey(symbol, AssetClass.NON_FUNGIBLE, _symbol_contract(symbol))
        return key, key


def generate(
    scenario: TrafficScenario, direction: Direction = Direction.DEPOSIT
) -> tuple[list[BridgeEvent], list[ChainTransfer], dict[str, str]]:
    """Build (events, transfers, truth) for one scenario and direction."""
    rng = random.Random(f"{scenario.seed}:{direction.value}")
    event_chain = SOURCE_CHAIN if direction is Direction.DEPOSIT else DESTINATION_CHAIN
    transfer_chain = DESTINATION_CHAIN if direction is Direction.DEPOSIT else SOURCE_CHAIN
    pool = [_rand_address(rng) for _ in range(scenario.address_pool_size)]
    table = _TokenTable(rng, direction)
    span_seconds = scenario.span_days * 86_400
    start = scenario.start_timestamp

    events: list[BridgeEvent] = []
    pair_transfers: list[ChainTransfer] = []
    truth: dict[str, str] = {}
    pairs: list[tuple[BridgeEvent, ChainTransfer]] = []

    for _ in range(scenario.n_pairs):
        receiver = pool[rng.randrange(len(pool))]
        cls = table.pick_class(scenario.asset_mix)
        event_token, transfer_token = table.pair_tokens(cls)
        amount = None
        token_id = None
        if cls == "nft":
            token_id = table.unique_nft_id(event_token.symbol)
        else:
            amount = table.unique_amount()
        event_ts = start + rng.randrange(span_seconds)
        transfer_ts = event_ts + scenario.latency.draw(rng)
        event_tx = _rand_tx(rng)
        transfer_tx = _rand_tx(rng)
        log_index = rng.randrange(200)
        nft = cls == "nft"
        event = BridgeEvent(
            event_id=f"{event_tx}:{log_index}",
            tx_id=event_tx,
            log_index=log_index,
            receiver=receiver,
            token=event_token,
            amount=None if nft else amount,
            token_ids=(token_id,) if nft else (),
            timestamp=event_ts,
            block_number=_block_at(event_chain, event_ts, start),
            direction=direction,
            chain=event_chain,
        )
        transfer = ChainTransfer(
            tx_id=transfer_tx,
            to_address=receiver,
            from_address=pool[rng.randrange(len(pool))],
            token=transfer_token,
            amount=None if nft else amount,
            token_id=token_id if nft else None,
            timestamp=transfer_ts,
            block_number=_block_at(transfer_chain, transfer_ts, start),
            chain=transfer_chain,
        )
        pairs.append((event, transfer))

    # exact-count withholding so recall bounds hold by construction
    withheld_count = round(scenario.n_pairs * scenario.missing_counterpart_rate)
    withheld_indices = set(rng.sample(range(scenario.n_pairs), withheld_count)) if withheld_count else set()
    withheld_receivers = {pairs[i][0].receiver for i in withheld_indices}

    for i, (event, transfer) in enumerate(pairs):
        events.append(event)
        if i in withheld_indices:
            truth[event.event_id] = "withheld"
        else:
            truth[event.event_id] = transfer.tx_id
            pair_transfers.append(transfer)

    noise_transfers: list[ChainTransfer] = []
    noise_count = round(scenario.n_pairs * scenario.noise_transfer_rate)
    for _ in range(noise_count):
        receiver = pool[rng.randrange(len(pool))]
        cls = table.pick_class(scenario.asset_mix)
        _, transfer_token = table.pair_tokens(cls)
        nft = cls == "nft"
        # globally unique values keep plain noise failing the value criterion
        amount = None if nft else table.unique_amount()
        token_id = table.unique_nft_id(transfer_token.symbol) if nft else None
        ts = start + rng.randrange(span_seconds + scenario.latency.max_seconds)
        noise_transfers.append(
            ChainTransfer(
                tx_id=_rand_tx(rng),
                to_address=receiver,
                from_address=pool[rng.randrange(len(pool))],
                token=transfer_token,
                amount=amount,
                token_id=token_id,
                timestamp=ts,
                block_number=_block_at(transfer_chain, ts, start),
                chain=transfer_chain,
            )
        )

    collision_count = round(scenario.n_pairs * scenario.value_collision_rate) if pairs else 0
    for k in range(collision_count):
        event, transfer = pairs[rng.randrange(len(pairs))]
        if k == 0:
            # guarantee one duplicate inside the widest plausible window
            offset = scenario.latency.max_seconds
        else:
            offset = rng.randint(scenario.latency.min_seconds, 4 * scenario.latency.max_seconds)
        ts = event.timestamp + offset
        noise_transfers.append(
            ChainTransfer(
                tx_id=_rand_tx(rng),
                to_address=transfer.to_address,
                from_address=pool[rng.randrange(len(pool))],
                token=transfer.token,
                amount=transfer.amount,
                token_id=transfer.token_id,
                timestamp=ts,
                block_number=_block_at(transfer_chain, ts, start),
                chain=transfer_chain,
            )
        )

    transfers = pair_transfers + noise_transfers
    if withheld_receivers:
        # surviving records for a truncated address carry the page-limit flag
        transfers = [
            replace(t, truncated=True) if t.to_address in withheld_receivers else t
            for t in transfers
        ]

    events.sort(key=lambda e: (e.timestamp, e.tx_id))
    transfers.sort(key=lambda t: (t.timestamp, t.block_number, t.tx_id))
    return events, transfers, truth


@dataclass(frozen=True)
class Score:
    """Matcher quality against ground truth.

    recall counts every generated event in its denominator, withheld ones
    included: a withheld counterpart is a real cross-chain action the
    matcher had no chance to recover, which is exactly the data-gap effect
    the scenario simulates.
    """

    precision: Fraction | None
    recall: Fraction | None
    ambiguous_rate: Fraction | None
    correct_exact: int
    total_exact: int
    total_events: int
    withheld: int


def score(report, truth: Mapping[str, str]) -> Score:
    """Compare match results (a MatchReport or a result sequence) against
    the generator's ground truth."""
    results = list(getattr(report, "results", report))
    result_ids = {r.event_id for r in results}
    if result_ids != set(truth):
        missing = len(set(truth) - result_ids)
        extra = len(result_ids - set(truth))
        raise ValueError(f"report/truth event sets differ ({missing} missing, {extra} extra)")
    correct = 0
    total_exact = 0
    ambiguous = 0
    for r in results:
        if r.outcome == EXACT:
            total_exact += 1
            if truth[r.event_id] != "withheld" and r.counterpart_tx_id == truth[r.event_id]:
                correct += 1
        elif r.outcome == AMBIGUOUS:
            ambiguous += 1
    total = len(results)
    withheld = sum(1 for v in truth.values() if v == "withheld")
    return Score(
        precision=Fraction(correct, total_exact) if total_exact else None,
        recall=Fraction(correct, total) if total else None,
        ambiguous_rate=Fraction(ambiguous, total) if total else None,
        correct_exact=correct,
        total_exact=total_exact,
        total_events=total,
        withheld=withheld,
    )


def truth_to_rows(truth: Mapping[str, str], events: Sequence[BridgeEvent]) -> list[dict]:
    return [{"eventId": e.event_id, "txId": truth[e.event_id]} for e in events]


def truth_from_rows(rows: Sequence[Mapping]) -> dict[str, str]:
    return {row["eventId"]: row["txId"] for row in rows}
