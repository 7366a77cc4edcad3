"""Acquire the two datasets the matcher joins: source-chain bridge logs over
a block range and per-address transfer histories from an explorer API.

Range scans chunk adaptively under provider response limits, retry
transient failures with backoff, and checkpoint after every chunk so a
killed scan resumes without loss. Per-address fetches respect a shared
rate limit and record truncation (page limit hit) per address, because an
incomplete history is a known mismatch cause that downstream reports must
be able to separate from algorithmic misses.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence

import requests

from bridgetrace.bridgespec import BridgeSpec
from bridgetrace.decode import RawLog, raw_log_from_row
from bridgetrace.model import (
    AssetClass,
    BridgeEvent,
    BridgeTraceError,
    ChainTransfer,
    Direction,
    TokenKey,
    canonicalize_address,
    transfer_from_row,
)
from bridgetrace.store import read_validated, write_text_atomic

logger = logging.getLogger(__name__)

API_KEY_ENV_PREFIX = "BRIDGETRACE_API_KEY_"


class IngestError(BridgeTraceError):
    """Acquisition failed; carries enough context to resume."""

    def __init__(self, message: str, *, from_block: int | None = None,
                 to_block: int | None = None, address: str | None = None) -> None:
        super().__init__(message)
        self.from_block = from_block
        self.to_block = to_block
        self.address = address


class ProviderError(IngestError):
    def __init__(self, message: str, transient: bool = False) -> None:
        super().__init__(message)
        self.transient = transient


class ChunkTooLarge(ProviderError):
    """Provider refused the range size; the scanner shrinks and retries."""


@dataclass(frozen=True)
class IngestSource:
    """Where records come from and how hard we may hit it."""

    kind: str  # "rpc" | "explorer" | "fixture"
    location: str
    api_key_env: str | None = None
    rate_limit: float = 5.0
    page_limit: int = 10_000
    max_retries: int = 3
    backoff_base_millis: int = 200

    def __post_init__(self) -> None:
        if self.rate_limit <= 0:
            raise ValueError("rate_limit must be > 0 requests/second")
        if self.page_limit <= 0:
            raise ValueError("page_limit must be > 0")


class RateLimiter:
    """Shared token budget: at most ``rate`` requests in any trailing second.

    Clock and sleep are injectable so the invariant is testable without
    real waiting. Thread-safe.
    """

    def __init__(self, rate: float, clock=time.monotonic, sleep=time.sleep) -> None:
        if rate <= 0:
            raise ValueError("rate must be > 0")
        self._window = 1.0 if rate >= 1 else 1.0 / rate
        self._capacity = int(rate) if rate >= 1 else 1
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()
        self._issued: deque[float] = deque()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self._clock()
                while self._issued and self._issued[0] <= now - self._window:
                    self._issued.popleft()
                if len(self._issued) < self._capacity:
                    self._issued.append(now)
                    return
                wait = self._issued[0] + self._window - now
            self._sleep(max(wait, 1e-4))


@dataclass
class IngestCheckpoint:
    last_block_scanned: int = -1
    addresses_completed: set[str] = field(default_factory=set)
    truncated_addresses: set[str] = field(default_factory=set)

    def advance_block(self, block: int) -> None:
        if block < self.last_block_scanned:
            raise ValueError(
                f"checkpoint would move backwards: {block} < {self.last_block_scanned}"
            )
        self.last_block_scanned = block


def save_checkpoint(path: str | Path, checkpoint: IngestCheckpoint) -> None:
    """Atomic save; refuses to move last_block_scanned backwards."""
    path = Path(path)
    if path.exists():
        previous = load_checkpoint(path)
        if checkpoint.last_block_scanned < previous.last_block_scanned:
            raise ValueError("refusing to overwrite checkpoint with an older scan position")
    doc = {
        "lastBlockScanned": checkpoint.last_block_scanned,
        "addressesCompleted": sorted(checkpoint.addresses_completed),
        "truncatedAddresses": sorted(checkpoint.truncated_addresses),
    }
    write_text_atomic(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_checkpoint(path: str | Path) -> IngestCheckpoint:
    doc = json.loads(Path(path).read_text())
    return IngestCheckpoint(
        last_block_scanned=doc["lastBlockScanned"],
        addresses_completed=set(doc["addressesCompleted"]),
        truncated_addresses=set(doc["truncatedAddresses"]),
    )


@dataclass
class ScanStats:
    requests: int = 0
    retries: int = 0
    chunks: int = 0
    shrinks: int = 0


def _with_retries(call, what: str, *, max_retries: int, backoff_base_millis: int,
                  sleep, stats: ScanStats | None = None) -> object:
    attempt = 0
    while True:
        try:
            if stats is not None:
                stats.requests += 1
            return call()
        except ChunkTooLarge:
            raise
        except ProviderError as exc:
            attempt += 1
            if not exc.transient or attempt > max_retries:
                raise
            if stats is not None:
                stats.retries += 1
            delay = backoff_base_millis * (2 ** (attempt - 1)) / 1000.0
            logger.warning("%s failed (%s), retry %d/%d in %.2fs", what, exc, attempt, max_retries, delay)
            sleep(delay)


def scan_bridge_logs(
    provider,
    spec: BridgeSpec,
    from_block: int,
    to_block: int,
    *,
    chunk_size: int = 2_048,
    max_chunk: int | None = None,
    checkpoint: IngestCheckpoint | None = None,
    on_checkpoint: Callable[[IngestCheckpoint], None] | None = None,
    rate_limiter: RateLimiter | None = None,
    max_retries: int = 3,
    backoff_base_millis: int = 200,
    sleep=time.sleep,
    stats: ScanStats | None = None,
) -> Iterator[RawLog]:
    """Stream every spec-contract log in [from_block, to_block], in
    (blockNumber, logIndex) order, chunking adaptively.

    With a checkpoint, scanning starts after checkpoint.last_block_scanned
    and the checkpoint advances (and on_checkpoint fires) after each chunk,
    so a resumed scan replays no completed chunk and skips none.
    """
    if from_block > to_block:
        raise ValueError(f"inverted block range ({from_block}, {to_block})")
    addresses = sorted(spec.contract_addresses)
    max_chunk = max_chunk or chunk_size
    size = min(chunk_size, max_chunk)
    current = from_block
    if checkpoint is not None and checkpoint.last_block_scanned >= from_block:
        current = checkpoint.last_block_scanned + 1

    while current <= to_block:
        end = min(current + size - 1, to_block)
        if rate_limiter is not None:
            rate_limiter.acquire()
        try:
            batch = _with_retries(
                lambda: provider.get_logs(current, end, addresses),
                f"get_logs({current}, {end})",
                max_retries=max_retries,
                backoff_base_millis=backoff_base_millis,
                sleep=sleep,
                stats=stats,
            )
        except ChunkTooLarge:
            if size <= 1:
                raise IngestError(
                    f"provider rejects single-block range at {current}",
                    from_block=current, to_block=to_block,
                )
            size = max(1, size // 2)
            if stats is not None:
                stats.shrinks += 1
            continue
        except ProviderError as exc:
            raise IngestError(
                f"range ({current}, {end}) failed after {max_retries} retries: {exc}",
                from_block=current, to_block=to_block,
            ) from exc

        if stats is not None:
            stats.chunks += 1
        for log in sorted(batch, key=lambda l: (l.block_number, l.log_index)):
            yield log
        if checkpoint is not None:
            checkpoint.advance_block(end)
            if on_checkpoint is not None:
                on_checkpoint(checkpoint)
        current = end + 1
        size = min(size * 2, max_chunk)


def extract_depositor_set(events: Iterable[BridgeEvent]) -> set[str]:
    """Distinct receiver addresses over deposit-direction events."""
    return {e.receiver for e in events if e.direction is Direction.DEPOSIT}


def filter_withdrawals_by_depositors(
    withdrawals: Sequence[BridgeEvent], depositors: set[str]
) -> list[BridgeEvent]:
    """Keep withdrawal events whose receiver previously deposited, in order."""
    return [e for e in withdrawals if e.receiver in depositors]


def _dedup_sorted(transfers: list[ChainTransfer]) -> list[ChainTransfer]:
    transfers.sort(key=lambda t: (t.timestamp, t.block_number, t.tx_id))
    seen: set = set()
    out = []
    for t in transfers:
        if t in seen:
            continue
        seen.add(t)
        out.append(t)
    return out


def fetch_address_transfers(
    provider,
    address: str,
    asset_class: AssetClass | None,
    window: tuple[int | None, int | None] = (None, None),
    *,
    page_limit: int = 10_000,
    page_size: int = 1_000,
    rate_limiter: RateLimiter | None = None,
    max_retries: int = 3,
    backoff_base_millis: int = 200,
    sleep=time.sleep,
    stats: ScanStats | None = None,
) -> tuple[list[ChainTransfer], bool]:
    """One address's transfer history, ascending by timestamp.

    Returns (transfers, truncated). truncated is True iff the provider
    still had records past page_limit; the flag is also stamped on every
    returned transfer so it survives serialization.
    """
    address = canonicalize_address(address)
    collected: list[ChainTransfer] = []
    page = 1
    while True:
        # constant page size: providers compute offsets as (page-1)*page_size
        if rate_limiter is not None:
            rate_limiter.acquire()
        try:
            batch = _with_retries(
                lambda: provider.get_transfers(address, asset_class, window, page, page_size),
                f"get_transfers({address}, page {page})",
                max_retries=max_retries,
                backoff_base_millis=backoff_base_millis,
                sleep=sleep,
                stats=stats,
            )
        except ProviderError as exc:
            raise IngestError(f"address {address} failed after retries: {exc}", address=address) from exc
        collected.extend(batch)
        if len(batch) < page_size or len(collected) > page_limit:
            break
        page += 1
    truncated = len(collected) > page_limit
    collected = _dedup_sorted(collected)[:page_limit]
    if truncated:
        collected = [replace(t, truncated=True) for t in collected]
    return collected, truncated


def fetch_transfers_for_addresses(
    provider,
    addresses: Sequence[str],
    asset_class: AssetClass | None,
    window: tuple[int | None, int | None] = (None, None),
    *,
    page_limit: int = 10_000,
    page_size: int = 1_000,
    workers: int = 1,
    rate_limiter: RateLimiter | None = None,
    max_retries: int = 3,
    backoff_base_millis: int = 200,
    sleep=time.sleep,
    checkpoint: IngestCheckpoint | None = None,
    on_checkpoint: Callable[[IngestCheckpoint], None] | None = None,
) -> tuple[list[ChainTransfer], list[str], set[str]]:
    """Fetch many addresses, optionally in parallel under one rate limit.

    One address failing does not abort the others; failures come back in
    the second element. Output order follows the input address order.
    """
    lock = threading.Lock()
    results: dict[str, list[ChainTransfer]] = {}
    truncated_addresses: set[str] = set()
    failed: list[str] = []

    def fetch_one(addr: str) -> None:
        try:
            transfers, truncated = fetch_address_transfers(
                provider, addr, asset_class, window,
                page_limit=page_limit, page_size=page_size,
                rate_limiter=rate_limiter, max_retries=max_retries,
                backoff_base_millis=backoff_base_millis, sleep=sleep,
            )
        except IngestError:
            with lock:
                failed.append(addr)
            return
        with lock:
            results[addr] = transfers
            if truncated:
                truncated_addresses.add(addr)
            if checkpoint is not None:
                checkpoint.addresses_completed.add(addr)
                if truncated:
                    checkpoint.truncated_addresses.add(addr)
                if on_checkpoint is not None:
                    on_checkpoint(checkpoint)

    addresses = [canonicalize_address(a) for a in addresses]
    if workers <= 1:
        for addr in addresses:
            fetch_one(addr)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fetch_one, addresses))

    combined = [t for addr in addresses for t in results.get(addr, [])]
    return combined, failed, truncated_addresses


# --- providers ------------------------------------------------------------

class FixtureLogProvider:
    """Serves a raw_log.v1 file as if it were a node; used for tests and
    deterministic replays."""

    def __init__(self, path: str | Path) -> None:
        _, rows = read_validated(path, expect="raw_log.v1")
        self._logs = sorted(
            (raw_log_from_row(row) for row in rows),
            key=lambda l: (l.block_number, l.log_index),
        )

    def get_logs(self, from_block: int, to_block: int, addresses: Sequence[str] | None = None) -> list[RawLog]:
        wanted = set(addresses) if addresses is not None else None
        return [
            log
            for log in self._logs
            if from_block <= log.block_number <= to_block
            and (wanted is None or log.address in wanted)
        ]


class FixtureTransferProvider:
    """Serves a transfer.v1 file as a paged per-address explorer API."""

    def __init__(self, path: str | Path) -> None:
        _, rows = read_validated(path, expect="transfer.v1")
        self._transfers = sorted(
            (transfer_from_row(row) for row in rows),
            key=lambda t: (t.timestamp, t.block_number, t.tx_id),
        )

    def get_transfers(
        self,
        address: str,
        asset_class: AssetClass | None,
        window: tuple[int | None, int | None],
        page: int,
        page_size: int,
    ) -> list[ChainTransfer]:
        lo, hi = window
        rows = [
            t
            for t in self._transfers
            if t.to_address == address
            and (asset_class is None or t.token.asset_class is asset_class)
            and (lo is None or t.timestamp >= lo)
            and (hi is None or t.timestamp <= hi)
        ]
        start = (page - 1) * page_size
        return rows[start : start + page_size]


class FlakyProvider:
    """Wraps a provider to fail the first N calls transiently (test harness
    for retry and resume behaviour)."""

    def __init__(self, inner, failures: int) -> None:
        self._inner = inner
        self._remaining = failures
        self.calls = 0

    def _maybe_fail(self) -> None:
        self.calls += 1
        if self._remaining > 0:
            self._remaining -= 1
            raise ProviderError("scripted transient failure", transient=True)

    def get_logs(self, *args, **kwargs):
        self._maybe_fail()
        return self._inner.get_logs(*args, **kwargs)

    def get_transfers(self, *args, **kwargs):
        self._maybe_fail()
        return self._inner.get_transfers(*args, **kwargs)


def _quantity(value: str) -> int:
    return int(value, 16)


class RpcLogProvider:
    """eth_getLogs over JSON-RPC, with block-timestamp resolution cached."""

    def __init__(self, url: str, session: requests.Session | None = None, timeout: float = 30.0) -> None:
        self._url = url
        self._session = session or requests.Session()
        self._timeout = timeout
        self._id = 0
        self._block_timestamps: dict[int, int] = {}

    def _call(self, method: str, params: list) -> object:
        self._id += 1
        try:
            response = self._session.post(
                self._url,
                json={"jsonrpc": "2.0", "id": self._id, "method": method, "params": params},
                timeout=self._timeout,
            )
            response.raise_for_status()
            payload = response.json()
        except requests.RequestException as exc:
            raise ProviderError(f"rpc transport error: {exc}", transient=True) from exc
        if "error" in payload:
            error = payload["error"]
            message = str(error.get("message", error))
            if error.get("code") == -32005 or "more than" in message or "response size" in message:
                raise ChunkTooLarge(message)
            raise ProviderError(f"rpc error: {message}", transient=True)
        return payload["result"]

    def _block_timestamp(self, block_number: int) -> int:
        if block_number not in self._block_timestamps:
            header = self._call("eth_getBlockByNumber", [hex(block_number), False])
            self._block_timestamps[block_number] = _quantity(header["timestamp"])
        return self._block_timestamps[block_number]

    def get_logs(self, from_block: int, to_block: int, addresses: Sequence[str] | None = None) -> list[RawLog]:
        params = {"fromBlock": hex(from_block), "toBlock": hex(to_block)}
        if addresses:
            params["address"] = list(addresses)
        raw = self._call("eth_getLogs", [params])
        logs = []
        for entry in raw:
            block_number = _quantity(entry["blockNumber"])
            logs.append(
                RawLog(
                    address=canonicalize_address(entry["address"]),
                    topics=tuple(t.lower() for t in entry["topics"]),
                    data=bytes.fromhex(entry.get("data", "0x")[2:]),
                    tx_id=entry["transactionHash"].lower(),
                    log_index=_quantity(entry["logIndex"]),
                    block_number=block_number,
                    block_timestamp=self._block_timestamp(block_number),
                )
            )
        return logs


class ExplorerTransferProvider:
    """Etherscan-family account API (txlist/tokentx/tokennfttx) normalized
    to ChainTransfer records at ingest time."""

    _ACTIONS = {
        AssetClass.NATIVE: "txlist",
        AssetClass.FUNGIBLE: "tokentx",
        AssetClass.NON_FUNGIBLE: "tokennfttx",
    }

    def __init__(
        self,
        base_url: str,
        chain: str,
        api_key_env: str | None = None,
        native_symbol: str = "ETH",
        session: requests.Session | None = None,
        timeout: float = 30.0,
        archive: Callable[[dict], None] | None = None,
    ) -> None:
        self._base_url = base_url
        self._chain = chain
        self._api_key_env = api_key_env
        self._native_symbol = native_symbol
        self._session = session or requests.Session()
        self._timeout = timeout
        self._archive = archive

    def _api_key(self) -> str | None:
        if not self._api_key_env:
            return None
        return os.environ.get(API_KEY_ENV_PREFIX + self._api_key_env)

    def get_transfers(
        self,
        address: str,
        asset_class: AssetClass | None,
        window: tuple[int | None, int | None],
        page: int,
        page_size: int,
    ) -> list[ChainTransfer]:
        action = self._ACTIONS[asset_class or AssetClass.FUNGIBLE]
        params = {
            "module": "account",
            "action": action,
            "address": address,
            "page": page,
            "offset": page_size,
            "sort": "asc",
        }
        key = self._api_key()
        if key:
            params["apikey"] = key
        try:
            response = self._session.get(self._base_url, params=params, timeout=self._timeout)
            response.raise_for_status()
            payload = response.json()
        except requests.RequestException as exc:
            raise ProviderError(f"explorer transport error: {exc}", transient=True) from exc
        if self._archive is not None:
            self._archive(payload)
        if payload.get("status") == "0" and payload.get("message") == "No transactions found":
            return []
        if payload.get("status") != "1":
            raise ProviderError(f"explorer error: {payload.get('result') or payload.get('message')}", transient=True)
        lo, hi = window
        out = []
        for row in payload["result"]:
            ts = int(row["timeStamp"])
            if (lo is not None and ts < lo) or (hi is not None and ts > hi):
                continue
            out.append(self._normalize(row, asset_class, ts))
        return out

    def _normalize(self, row: dict, asset_class: AssetClass | None, ts: int) -> ChainTransfer:
        cls = asset_class or AssetClass.FUNGIBLE
        if cls is AssetClass.NATIVE:
            token = TokenKey(self._native_symbol, AssetClass.NATIVE)
            amount, token_id = int(row["value"]), None
        elif cls is AssetClass.NON_FUNGIBLE:
            token = TokenKey(
                row.get("tokenSymbol") or row["contractAddress"],
                AssetClass.NON_FUNGIBLE,
                canonicalize_address(row["contractAddress"]),
            )
            amount, token_id = None, int(row["tokenID"])
        else:
            token = TokenKey(
                row.get("tokenSymbol") or row["contractAddress"],
                AssetClass.FUNGIBLE,
                canonicalize_address(row["contractAddress"]),
            )
            amount, token_id = int(row["value"]), None
        return ChainTransfer(
            tx_id=row["hash"].lower(),
            to_address=canonicalize_address(row["to"]),
            from_address=canonicalize_address(row["from"]),
            token=token,
            amount=amount,
            token_id=token_id,
            timestamp=ts,
            block_number=int(row["blockNumber"]),
            chain=self._chain,
        )
