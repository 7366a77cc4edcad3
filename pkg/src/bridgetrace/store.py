"""On-disk dataset discipline: schema-validated newline-delimited files.

Every data file starts with a "#schema: <name>.v1" header line followed by
one JSON object per line. Writes validate first, then go through a temp
file and an atomic rename, so a file visible at its final path is complete
and schema-valid. Newline-delimited text was chosen over a binary store
because these datasets are append-scan shaped, need to interoperate with
external analysis tools, and diff cleanly.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from bridgetrace.model import BridgeTraceError

HEADER_PREFIX = "#schema: "

_ADDR = re.compile(r"0x[0-9a-f]{40}\Z")
_TX = re.compile(r"0x[0-9a-f]{64}\Z")
_HEX = re.compile(r"0x(?:[0-9a-f]{2})*\Z")
_TOPIC = re.compile(r"0x[0-9a-f]{64}\Z")
_DECIMAL = re.compile(r"[0-9]+\Z")


class SchemaError(BridgeTraceError):
    """Record or file violates its declared schema."""


class SchemaVersionError(SchemaError):
    """File header declares a schema the caller did not expect."""


def _fail(schema: str, message: str) -> None:
    raise SchemaError(f"{schema}: {message}")


def _need(row: dict, schema: str, key: str):
    if key not in row:
        _fail(schema, f"missing field {key!r}")
    return row[key]


def _check_int(value, schema: str, key: str, minimum: int = 0) -> None:
    if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
        _fail(schema, f"{key} must be an int >= {minimum}, got {value!r}")


def _check_addr(value, schema: str, key: str) -> None:
    if not isinstance(value, str) or not _ADDR.match(value):
        _fail(schema, f"{key} must be a canonical address, got {value!r}")


def _check_tx(value, schema: str, key: str) -> None:
    if not isinstance(value, str) or not _TX.match(value):
        _fail(schema, f"{key} must be a canonical tx hash, got {value!r}")


def _check_decimal(value, schema: str, key: str) -> None:
    if not isinstance(value, str) or not _DECIMAL.match(value):
        _fail(schema, f"{key} must be a decimal string, got {value!r}")


def _check_token(value, schema: str) -> str:
    if not isinstance(value, dict):
        _fail(schema, f"token must be an object, got {value!r}")
    if not isinstance(value.get("symbol"), str) or not value["symbol"]:
        _fail(schema, "token.symbol must be a non-empty string")
    cls = value.get("class")
    if cls not in ("native", "fungible", "nft"):
        _fail(schema, f"token.class must be native|fungible|nft, got {cls!r}")
    contract = value.get("contractAddress")
    if contract is not None:
        _check_addr(contract, schema, "token.contractAddress")
    return cls


def _validate_event(row: dict, schema: str = "event.v1") -> None:
    if not isinstance(_need(row, schema, "eventId"), str) or not row["eventId"]:
        _fail(schema, "eventId must be a non-empty string")
    _check_tx(_need(row, schema, "txId"), schema, "txId")
    _check_int(_need(row, schema, "logIndex"), schema, "logIndex")
    _check_addr(_need(row, schema, "receiver"), schema, "receiver")
    cls = _check_token(_need(row, schema, "token"), schema)
    amount = _need(row, schema, "amount")
    token_ids = _need(row, schema, "tokenIds")
    if not isinstance(token_ids, list):
        _fail(schema, "tokenIds must be a list")
    if cls == "nft":
        if amount is not None or not token_ids:
            _fail(schema, "nft event needs tokenIds and no amount")
        for t in token_ids:
            _check_decimal(t, schema, "tokenIds[]")
    else:
        if token_ids or amount is None:
            _fail(schema, "fungible/native event needs amount and no tokenIds")
        _check_decimal(amount, schema, "amount")
    _check_int(_need(row, schema, "timestamp"), schema, "timestamp")
    _check_int(_need(row, schema, "blockNumber"), schema, "blockNumber")
    if _need(row, schema, "direction") not in ("deposit", "withdrawal"):
        _fail(schema, f"direction must be deposit|withdrawal, got {row['direction']!r}")
    if not isinstance(_need(row, schema, "chain"), str) or not row["chain"]:
        _fail(schema, "chain must be a non-empty string")


def _validate_transfer(row: dict, schema: str = "transfer.v1") -> None:
    _check_tx(_need(row, schema, "txId"), schema, "txId")
    _check_addr(_need(row, schema, "toAddress"), schema, "toAddress")
    _check_addr(_need(row, schema, "fromAddress"), schema, "fromAddress")
    cls = _check_token(_need(row, schema, "token"), schema)
    amount = _need(row, schema, "amount")
    token_id = _need(row, schema, "tokenId")
    if cls == "nft":
        if amount is not None or token_id is None:
            _fail(schema, "nft transfer needs tokenId and no amount")
        _check_decimal(token_id, schema, "tokenId")
    else:
        if token_id is not None or amount is None:
            _fail(schema, "fungible/native transfer needs amount and no tokenId")
        _check_decimal(amount, schema, "amount")
    _check_int(_need(row, schema, "timestamp"), schema, "timestamp")
    _check_int(_need(row, schema, "blockNumber"), schema, "blockNumber")
    if not isinstance(_need(row, schema, "chain"), str) or not row["chain"]:
        _fail(schema, "chain must be a non-empty string")
    if not isinstance(_need(row, schema, "truncated"), bool):
        _fail(schema, "truncated must be a boolean")


def _validate_match(row: dict, schema: str = "match.v1") -> None:
    if not isinstance(_need(row, schema, "eventId"), str) or not row["eventId"]:
        _fail(schema, "eventId must be a non-empty string")
    outcome = _need(row, schema, "outcome")
    if outcome not in ("exact", "ambiguous", "unmatched"):
        _fail(schema, f"outcome must be exact|ambiguous|unmatched, got {outcome!r}")
    counterpart = _need(row, schema, "counterpartTxId")
    elapsed = _need(row, schema, "elapsedSeconds")
    if outcome == "exact":
        _check_tx(counterpart, schema, "counterpartTxId")
        if not isinstance(elapsed, int) or isinstance(elapsed, bool):
            _fail(schema, "exact result needs integer elapsedSeconds")
    else:
        if counterpart is not None or elapsed is not None:
            _fail(schema, f"{outcome} result must not carry counterpart/elapsed fields")
    _check_int(_need(row, schema, "sourceTimestamp"), schema, "sourceTimestamp")
    candidates = _need(row, schema, "candidates")
    if not isinstance(candidates, list):
        _fail(schema, "candidates must be a list")
    for c in candidates:
        _check_tx(c, schema, "candidates[]")
    if outcome == "ambiguous" and len(candidates) < 2:
        _fail(schema, "ambiguous result needs >= 2 candidates")


def _validate_truth(row: dict, schema: str = "truth.v1") -> None:
    if not isinstance(_need(row, schema, "eventId"), str) or not row["eventId"]:
        _fail(schema, "eventId must be a non-empty string")
    tx = _need(row, schema, "txId")
    if tx != "withheld":
        _check_tx(tx, schema, "txId")


def _validate_raw_log(row: dict, schema: str = "raw_log.v1") -> None:
    _check_addr(_need(row, schema, "address"), schema, "address")
    topics = _need(row, schema, "topics")
    if not isinstance(topics, list):
        _fail(schema, "topics must be a list")
    for t in topics:
        if not isinstance(t, str) or not _TOPIC.match(t):
            _fail(schema, f"topics[] must be 32-byte hex, got {t!r}")
    data = _need(row, schema, "data")
    if not isinstance(data, str) or not _HEX.match(data):
        _fail(schema, f"data must be 0x-prefixed hex, got {data!r}")
    _check_tx(_need(row, schema, "txId"), schema, "txId")
    _check_int(_need(row, schema, "logIndex"), schema, "logIndex")
    _check_int(_need(row, schema, "blockNumber"), schema, "blockNumber")
    _check_int(_need(row, schema, "blockTimestamp"), schema, "blockTimestamp")


def _validate_raw_tx(row: dict, schema: str = "raw_tx.v1") -> None:
    _check_tx(_need(row, schema, "txId"), schema, "txId")
    _check_addr(_need(row, schema, "from"), schema, "from")
    to = _need(row, schema, "to")
    if to is not None:
        _check_addr(to, schema, "to")
    data = _need(row, schema, "input")
    if not isinstance(data, str) or not _HEX.match(data):
        _fail(schema, f"input must be 0x-prefixed hex, got {data!r}")
    _check_decimal(_need(row, schema, "value"), schema, "value")
    _check_int(_need(row, schema, "blockNumber"), schema, "blockNumber")
    _check_int(_need(row, schema, "blockTimestamp"), schema, "blockTimestamp")


SCHEMAS = {
    "event.v1": _validate_event,
    "transfer.v1": _validate_transfer,
    "match.v1": _validate_match,
    "truth.v1": _validate_truth,
    "raw_log.v1": _validate_raw_log,
    "raw_tx.v1": _validate_raw_tx,
}


def _atomic_write_bytes(path: Path, payload: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as tmp:
            tmp.write(payload)
            tmp.flush()
            os.fsync(tmp.fileno())
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def write_atomic(path: str | Path, records: Iterable[dict], schema: str) -> str:
    """Validate and write a dataset file; returns its sha256 content digest.

    Validation failures leave no file behind; the target path only ever
    holds a complete, schema-valid file.
    """
    if schema not in SCHEMAS:
        raise SchemaError(f"unknown schema {schema!r}")
    validate = SCHEMAS[schema]
    lines = [HEADER_PREFIX + schema]
    for i, row in enumerate(records, start=2):
        validate(row)
        lines.append(json.dumps(row, sort_keys=True, separators=(",", ":")))
    payload = ("\n".join(lines) + "\n").encode("utf-8")
    _atomic_write_bytes(Path(path), payload)
    return hashlib.sha256(payload).hexdigest()


def write_text_atomic(path: str | Path, text: str) -> str:
    """Atomic write for derived outputs (CSV, JSON); returns sha256 digest."""
    payload = text.encode("utf-8")
    _atomic_write_bytes(Path(path), payload)
    return hashlib.sha256(payload).hexdigest()


def read_validated(path: str | Path, expect: str | None = None) -> tuple[str, list[dict]]:
    """Read a dataset file, enforcing its header schema line by line.

    The first violating line is reported by number. Pass ``expect`` to
    reject files whose schema does not fit the input slot.
    """
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or not lines[0].startswith(HEADER_PREFIX):
        raise SchemaError(f"{path}: missing '#schema:' header line")
    schema = lines[0][len(HEADER_PREFIX):].strip()
    if schema not in SCHEMAS:
        raise SchemaVersionError(f"{path}: unknown schema {schema!r}")
    if expect is not None and schema != expect:
        raise SchemaVersionError(f"{path}: expected {expect}, file declares {schema}")
    validate = SCHEMAS[schema]
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
            validate(row)
        except (json.JSONDecodeError, SchemaError) as exc:
            raise SchemaError(f"{path}: line {lineno}: {exc}") from exc
        records.append(row)
    return schema, records


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass(frozen=True)
class DatasetLayout:
    """Directory layout shared by all commands under one dataset root."""

    root: Path

    @property
    def raw(self) -> Path:
        return self.root / "raw"

    @property
    def events(self) -> Path:
        return self.root / "events"

    @property
    def transfers(self) -> Path:
        return self.root / "transfers"

    @property
    def matches(self) -> Path:
        return self.root / "matches"

    @property
    def reports(self) -> Path:
        return self.root / "reports"

    @property
    def manifests(self) -> Path:
        return self.root / "manifests"

    def ensure(self) -> "DatasetLayout":
        for d in (self.raw, self.events, self.transfers, self.matches, self.reports, self.manifests):
            d.mkdir(parents=True, exist_ok=True)
        return self

    @staticmethod
    def data_filename(chain: str, direction: str, token_class: str, block_range: str, schema: str) -> str:
        return f"{chain}-{direction}-{token_class}-{block_range}.{schema}.ndj"
