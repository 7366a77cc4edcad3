"""Declarative bridge deployment description loaded from a config file.

A spec names the two chains, the bridge contracts, the event layouts with
their canonical signatures (topic0 is computed from the signature at load
time, so fixing a wrong signature is a config edit), the token equivalence
classes and the withdrawal claim selector. One default ships for the
Polygon PoS bridge.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from importlib.resources import files
from pathlib import Path

from bridgetrace.keccak import event_topic
from bridgetrace.model import (
    AssetClass,
    BridgeTraceError,
    Direction,
    canonicalize_address,
    normalize_symbol,
)

ROLE_RECEIVER = "receiver"
ROLE_AMOUNT = "amount"
ROLE_TOKEN_ID = "tokenId"
ROLE_TOKEN_ID_LIST = "tokenIdList"
ROLE_TOKEN_CONTRACT = "tokenContract"

_KNOWN_ROLES = {ROLE_RECEIVER, ROLE_AMOUNT, ROLE_TOKEN_ID, ROLE_TOKEN_ID_LIST, ROLE_TOKEN_CONTRACT}


class ConfigError(BridgeTraceError):
    """Invalid or inconsistent bridge spec."""


@dataclass(frozen=True)
class FieldSlot:
    """Where one semantic field lives in a log: an indexed topic or a data word."""

    name: str
    kind: str  # "topic" | "data"
    index: int
    role: str


@dataclass(frozen=True)
class EventDescriptor:
    name: str
    signature: str
    topic0: str
    fields: tuple[FieldSlot, ...]
    asset_class: AssetClass
    direction: Direction
    # Transfer() fires from arbitrary token contracts, not a bridge contract,
    # and on its own cannot be told apart from a regular token transfer.
    any_contract: bool = False
    requires_claim: bool = False

    def field_by_role(self, role: str) -> FieldSlot | None:
        for slot in self.fields:
            if slot.role == role:
                return slot
        return None


@dataclass(frozen=True)
class BridgeSpec:
    source_chain: str
    destination_chain: str
    contracts: dict[str, str]
    events: tuple[EventDescriptor, ...]
    token_equivalences: tuple[tuple[str, str], ...]
    withdrawal_method_id: bytes
    version: str
    native_symbol: str = "ETH"
    tokens: dict[str, str] = field(default_factory=dict)
    notes: str = ""

    def __post_init__(self) -> None:
        topic_map: dict[str, EventDescriptor] = {}
        for desc in self.events:
            if desc.topic0 in topic_map:
                raise ConfigError(f"duplicate topic0 {desc.topic0} ({desc.name})")
            topic_map[desc.topic0] = desc
        addresses = list(self.contracts.values())
        if len(set(addresses)) != len(addresses):
            raise ConfigError("contract addresses must be pairwise distinct")
        if len(self.withdrawal_method_id) != 4:
            raise ConfigError("withdrawal method ID must be exactly 4 bytes")
        if not self.source_chain or not self.destination_chain:
            raise ConfigError("both chain labels are required")
        object.__setattr__(self, "_topic_map", topic_map)
        object.__setattr__(self, "_symbol_class", _build_symbol_classes(self.token_equivalences))
        object.__setattr__(self, "_contract_set", frozenset(addresses))

    # --- lookups -------------------------------------------------------

    def descriptor_for_topic(self, topic0: str) -> EventDescriptor | None:
        return self._topic_map.get(topic0.lower())

    def descriptor_named(self, name: str) -> EventDescriptor:
        for desc in self.events:
            if desc.name == name:
                return desc
        raise KeyError(name)

    @property
    def contract_addresses(self) -> frozenset[str]:
        return self._contract_set

    def symbol_class(self, symbol: str) -> str:
        """Representative of the token equivalence class for a symbol."""
        normalized = normalize_symbol(symbol)
        return self._symbol_class.get(normalized, normalized)

    def token_symbol_for_contract(self, address: str) -> str | None:
        return self.tokens.get(address.lower())


def _build_symbol_classes(pairs: tuple[tuple[str, str], ...]) -> dict[str, str]:
    # tiny union-find over the equivalence pairs
    parent: dict[str, str] = {}

    def find(s: str) -> str:
        while parent.get(s, s) != s:
            parent[s] = parent.get(parent[s], parent[s])
            s = parent[s]
        return s

    for a, b in pairs:
        ra, rb = find(normalize_symbol(a)), find(normalize_symbol(b))
        if ra != rb:
            parent[ra] = rb
    members: dict[str, list[str]] = {}
    for sym in set(parent) | {normalize_symbol(s) for pair in pairs for s in pair}:
        members.setdefault(find(sym), []).append(sym)
    out: dict[str, str] = {}
    for root, syms in members.items():
        rep = min(syms + [root])
        for sym in syms + [root]:
            out[sym] = rep
    return out


# --- config file parsing -------------------------------------------------

def _parse_slot(text: str) -> tuple[str, int]:
    try:
        kind, _, idx = text.partition(":")
        index = int(idx)
    except ValueError as exc:
        raise ConfigError(f"bad slot {text!r}") from exc
    if kind not in ("topic", "data") or index < 0 or (kind == "topic" and index < 1):
        raise ConfigError(f"bad slot {text!r}")
    return kind, index


def _parse_event(entry: dict) -> EventDescriptor:
    try:
        name = entry["name"]
        signature = entry["signature"]
        asset_class = AssetClass(entry["asset_class"])
        direction = Direction(entry["direction"])
        raw_fields = entry["fields"]
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad event entry {entry.get('name', '?')}: {exc}") from exc

    slots = []
    for f in raw_fields:
        kind, index = _parse_slot(f["slot"])
        role = f["role"]
        if role not in _KNOWN_ROLES:
            raise ConfigError(f"{name}: unknown field role {role!r}")
        slots.append(FieldSlot(name=f["name"], kind=kind, index=index, role=role))

    roles = [s.role for s in slots]
    if roles.count(ROLE_RECEIVER) != 1:
        raise ConfigError(f"{name}: exactly one receiver field is required")
    if asset_class is AssetClass.NON_FUNGIBLE:
        if ROLE_TOKEN_ID not in roles and ROLE_TOKEN_ID_LIST not in roles:
            raise ConfigError(f"{name}: non-fungible event needs tokenId or tokenIdList")
    else:
        if ROLE_AMOUNT not in roles:
            raise ConfigError(f"{name}: fungible/native event needs an amount field")

    return EventDescriptor(
        name=name,
        signature=signature,
        topic0=event_topic(signature),
        fields=tuple(slots),
        asset_class=asset_class,
        direction=direction,
        any_contract=bool(entry.get("any_contract", False)),
        requires_claim=bool(entry.get("requires_claim", False)),
    )


def parse_spec(text: str) -> BridgeSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"spec is not valid JSON: {exc}") from exc

    try:
        chains = doc["chains"]
        contracts = {role: canonicalize_address(addr) for role, addr in doc["contracts"].items()}
        events = tuple(_parse_event(e) for e in doc["events"])
        equivalences = tuple(
            tuple(sorted(normalize_symbol(s) for s in pair)) for pair in doc["token_equivalences"]
        )
        method_id_text = doc["withdrawal_method_id"]
        version = doc["version"]
    except KeyError as exc:
        raise ConfigError(f"spec missing top-level key {exc}") from exc

    for pair in equivalences:
        if len(pair) != 2:
            raise ConfigError(f"token equivalence entries must be pairs, got {pair}")
    if not (isinstance(method_id_text, str) and method_id_text.startswith("0x") and len(method_id_text) == 10):
        raise ConfigError(f"withdrawal_method_id must be a 0x-prefixed 4-byte selector, got {method_id_text!r}")
    try:
        method_id = bytes.fromhex(method_id_text[2:])
    except ValueError as exc:
        raise ConfigError(f"malformed selector {method_id_text!r}") from exc

    return BridgeSpec(
        source_chain=chains["source"],
        destination_chain=chains["destination"],
        contracts=contracts,
        events=events,
        token_equivalences=tuple(sorted(equivalences)),
        withdrawal_method_id=method_id,
        version=version,
        native_symbol=normalize_symbol(doc.get("native_symbol", "ETH")),
        tokens={canonicalize_address(a): s for a, s in doc.get("tokens", {}).items()},
        notes=doc.get("notes", ""),
    )


def load_spec(source: str | Path) -> BridgeSpec:
    """Load and validate a bridge spec from a file path or raw config text."""
    if isinstance(source, Path):
        return parse_spec(source.read_text())
    if "\n" not in source and not source.lstrip().startswith("{") and os.path.exists(source):
        return parse_spec(Path(source).read_text())
    return parse_spec(source)


def render_spec(spec: BridgeSpec) -> str:
    """Serialize a spec back to config text; load_spec(render_spec(s)) == s."""
    doc = {
        "version": spec.version,
        "chains": {"source": spec.source_chain, "destination": spec.destination_chain},
        "native_symbol": spec.native_symbol,
        "contracts": dict(sorted(spec.contracts.items())),
        "tokens": dict(sorted(spec.tokens.items())),
        "token_equivalences": [list(pair) for pair in spec.token_equivalences],
        "withdrawal_method_id": "0x" + spec.withdrawal_method_id.hex(),
        "events": [
            {
                "name": d.name,
                "signature": d.signature,
                "asset_class": d.asset_class.value,
                "direction": d.direction.value,
                "any_contract": d.any_contract,
                "requires_claim": d.requires_claim,
                "fields": [
                    {"name": s.name, "slot": f"{s.kind}:{s.index}", "role": s.role} for s in d.fields
                ],
            }
            for d in spec.events
        ],
        "notes": spec.notes,
    }
    return json.dumps(doc, indent=2) + "\n"


def default_polygon_pos_spec() -> BridgeSpec:
    """The shipped Polygon PoS bridge spec (specs/polygon-pos.conf)."""
    text = files("bridgetrace").joinpath("specs/polygon-pos.conf").read_text()
    return parse_spec(text)
