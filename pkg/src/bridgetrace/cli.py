"""bridgetrace command surface: ingest | match | tune | report | simulate | eval.

Every command writes a manifest with content digests of everything it read
and wrote, so any output file can be reproduced bit-for-bit from its
inputs. Exit codes: 0 success, 1 usage/validation, 2 external source
failure, 3 partial ingestion, 4 evaluation gate failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path

from bridgetrace import __version__
from bridgetrace import analytics
from bridgetrace.bridgespec import BridgeSpec, ConfigError, default_polygon_pos_spec, load_spec
from bridgetrace.decode import DecodeError, decode_log, explode_batch
from bridgetrace.ingest import (
    FixtureLogProvider,
    IngestSource,
    FixtureTransferProvider,
    FlakyProvider,
    ExplorerTransferProvider,
    IngestCheckpoint,
    IngestError,
    RateLimiter,
    RpcLogProvider,
    ScanStats,
    extract_depositor_set,
    fetch_transfers_for_addresses,
    load_checkpoint,
    save_checkpoint,
    scan_bridge_logs,
)
from bridgetrace.match import MatchConfig, kernel_name, match_all
from bridgetrace.model import (
    AddressError,
    AssetClass,
    Direction,
    event_from_row,
    event_to_row,
    result_from_row,
    result_to_row,
    transfer_from_row,
    transfer_to_row,
)
from bridgetrace.simulate import Latency, TrafficScenario, generate, score, truth_to_rows
from bridgetrace.store import SchemaError, file_digest, read_validated, write_atomic, write_text_atomic
from bridgetrace.tuner import (
    DEFAULT_SAMPLE_SIZE,
    curve_to_csv,
    default_grid,
    find_peak,
    sample_events,
    sweep,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SOURCE = 2
EXIT_PARTIAL = 3
EXIT_GATE = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # keep argparse from sys.exit(2)
        raise UsageError(message)


_DURATION_RE = re.compile(r"([0-9]+(?:\.[0-9]+)?)\s*([smhd]?)\Z")
_DURATION_UNITS = {"": 1, "s": 1, "m": 60, "h": 3600, "d": 86400}


def parse_duration(text: str) -> int:
    """Seconds from '900', '900s', '24.2m', '2h', '14d'."""
    m = _DURATION_RE.match(text.strip())
    if not m:
        raise UsageError(f"bad duration {text!r} (use N[s|m|h|d])")
    seconds = round(float(m.group(1)) * _DURATION_UNITS[m.group(2)])
    if seconds <= 0:
        raise UsageError("duration must be > 0 seconds")
    return seconds


def _parse_asset_mix(text: str) -> tuple[tuple[str, float], ...]:
    try:
        parts = [item.split("=") for item in text.split(",")]
        return tuple(sorted((name.strip(), float(weight)) for name, weight in parts))
    except ValueError as exc:
        raise UsageError(f"bad asset mix {text!r} (use native=0.5,fungible=0.3,nft=0.2)") from exc


def _parse_window(text: str | None) -> tuple[int | None, int | None]:
    if not text:
        return (None, None)
    lo, _, hi = text.partition(":")
    return (int(lo) if lo else None, int(hi) if hi else None)


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _load_spec_arg(path: str | None) -> BridgeSpec:
    if path is None:
        return default_polygon_pos_spec()
    return load_spec(Path(path))


def _load_events(path: str):
    _, rows = read_validated(path, expect="event.v1")
    return [event_from_row(row) for row in rows]


def _load_transfers(path: str):
    _, rows = read_validated(path, expect="transfer.v1")
    return [transfer_from_row(row) for row in rows]


def _load_results(path: str):
    _, rows = read_validated(path, expect="match.v1")
    return [result_from_row(row) for row in rows]


def _load_truth(path: str) -> dict[str, str]:
    _, rows = read_validated(path, expect="truth.v1")
    return {row["eventId"]: row["txId"] for row in rows}


def _write_manifest(
    out_dir: Path,
    command: str,
    *,
    started: str,
    flags: dict,
    inputs: dict[str, str] | None = None,
    outputs: dict[str, str] | None = None,
    seeds: dict | None = None,
    spec: BridgeSpec | None = None,
    config_path: str | None = None,
    extra: dict | None = None,
) -> Path:
    doc = {
        "command": command,
        "toolVersion": __version__,
        "configPath": config_path,
        "specVersion": spec.version if spec else None,
        "inputDigests": dict(sorted((inputs or {}).items())),
        "outputDigests": dict(sorted((outputs or {}).items())),
        "seeds": seeds or {},
        "flags": flags,
        "startedAt": started,
        "finishedAt": _utc_now(),
    }
    if extra:
        doc["extra"] = extra
    path = out_dir / "manifests" / f"{command}.manifest.json"
    write_text_atomic(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def _digest_inputs(paths: list[str | None]) -> dict[str, str]:
    return {str(p): file_digest(p) for p in paths if p}


# --- simulate -------------------------------------------------------------

def _scenario_from_args(args) -> TrafficScenario:
    if args.scenario:
        doc = json.loads(Path(args.scenario).read_text())
        return TrafficScenario.from_dict(doc)
    return TrafficScenario(
        n_pairs=args.pairs,
        latency=Latency.parse(args.latency),
        asset_mix=_parse_asset_mix(args.asset_mix),
        noise_transfer_rate=args.noise_rate,
        value_collision_rate=args.collision_rate,
        missing_counterpart_rate=args.missing_rate,
        address_pool_size=args.pool,
        seed=args.seed,
        span_days=args.span_days,
    )


def cmd_simulate(args) -> int:
    started = _utc_now()
    scenario = _scenario_from_args(args)
    direction = Direction(args.direction)
    events, transfers, truth = generate(scenario, direction)
    out = Path(args.out)
    outputs = {}
    outputs["events.ndj"] = write_atomic(out / "events.ndj", (event_to_row(e) for e in events), "event.v1")
    outputs["transfers.ndj"] = write_atomic(
        out / "transfers.ndj", (transfer_to_row(t) for t in transfers), "transfer.v1"
    )
    outputs["truth.ndj"] = write_atomic(out / "truth.ndj", truth_to_rows(truth, events), "truth.v1")
    _write_manifest(
        out,
        "simulate",
        started=started,
        flags={"direction": direction.value, "scenario": scenario.to_dict()},
        inputs=_digest_inputs([args.scenario]),
        outputs=outputs,
        seeds={"scenario": scenario.seed},
    )
    print(f"simulate: {len(events)} events, {len(transfers)} transfers, {len(truth)} truth entries -> {out}")
    return EXIT_OK


# --- match ----------------------------------------------------------------

def cmd_match(args) -> int:
    started = _utc_now()
    spec = _load_spec_arg(args.spec)
    tolerance = parse_duration(args.tolerance)
    cfg = MatchConfig(
        time_tolerance_seconds=tolerance,
        causal_only=not args.symmetric_window,
        strict_gap=args.strict_gap,
        exclusive_assignment=args.exclusive,
        direction=Direction(args.direction),
    )
    events = _load_events(args.events)
    transfers = _load_transfers(args.transfers)
    report = match_all(events, transfers, cfg, spec)

    out = Path(args.out)
    outputs = {}
    outputs["matches.ndj"] = write_atomic(
        out / "matches.ndj", (result_to_row(r) for r in report.results), "match.v1"
    )
    summary = report.summary_dict()
    outputs["summary.json"] = write_text_atomic(
        out / "summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n"
    )
    _write_manifest(
        out,
        "match",
        started=started,
        flags={
            "toleranceSeconds": tolerance,
            "direction": args.direction,
            "exclusive": args.exclusive,
            "symmetricWindow": args.symmetric_window,
            "strictGap": args.strict_gap,
        },
        inputs=_digest_inputs([args.events, args.transfers]),
        outputs=outputs,
        spec=spec,
        config_path=args.spec,
        extra={"kernel": kernel_name(), "matchRate": report.match_rate_text},
    )
    print(f"match: {report.counts.total} events -> rate {report.match_rate_text}")
    return EXIT_OK


# --- tune -----------------------------------------------------------------

def cmd_tune(args) -> int:
    started = _utc_now()
    spec = _load_spec_arg(args.spec)
    events = _load_events(args.events)
    transfers = _load_transfers(args.transfers)
    direction = Direction(args.direction)
    sample = sample_events(events, args.sample_size, args.seed)
    if args.grid:
        grid = [parse_duration(g) for g in args.grid.split(",")]
    else:
        grid = default_grid(direction)
    cfg = MatchConfig(
        time_tolerance_seconds=grid[0],
        causal_only=not args.symmetric_window,
        direction=direction,
    )

    pools = {"all": sample}
    if args.per_token:
        pools = {}
        for event in sample:
            pools.setdefault(event.token.symbol.strip().upper(), []).append(event)

    out = Path(args.out)
    outputs = {}
    for label in sorted(pools):
        curve = sweep(pools[label], transfers, grid, cfg, spec, seed=args.seed)
        peak = find_peak(curve)
        name = "curve.csv" if label == "all" else f"curve-{label}.csv"
        outputs[name] = write_text_atomic(out / name, curve_to_csv(curve))
        rate = "n/a" if peak.exact_rate is None else f"{float(peak.exact_rate):.6f}"
        prefix = "peak" if label == "all" else f"peak[{label}]"
        print(f"{prefix} tolerance_seconds={peak.tolerance_seconds} exact_rate={rate}")

    _write_manifest(
        out,
        "tune",
        started=started,
        flags={
            "sampleSize": args.sample_size,
            "grid": grid,
            "direction": direction.value,
            "perToken": args.per_token,
        },
        inputs=_digest_inputs([args.events, args.transfers]),
        outputs=outputs,
        seeds={"sample": args.seed},
        spec=spec,
        config_path=args.spec,
    )
    return EXIT_OK


# --- report ---------------------------------------------------------------

def cmd_report(args) -> int:
    started = _utc_now()
    out = Path(args.out)
    results = _load_results(args.results)
    events = _load_events(args.events)
    events_by_id = {e.event_id: e for e in events}
    withdrawal_results = _load_results(args.withdrawal_results) if args.withdrawal_results else []
    outputs: dict[str, str] = {}
    selected = False

    if args.time_cost:
        selected = True
        series = analytics.time_cost_series(results, args.time_cost)
        outputs["time_cost.csv"] = write_text_atomic(
            out / "time_cost.csv", analytics.daily_series_to_csv(series)
        )
    if args.flows:
        selected = True
        series = analytics.flow_series(results, withdrawal_results)
        outputs["flows.csv"] = write_text_atomic(out / "flows.csv", analytics.flow_series_to_csv(series))
        spikes = analytics.flag_ratio_spikes(series, multiplier=args.spike_multiplier)
        outputs["flow_spikes.csv"] = write_text_atomic(
            out / "flow_spikes.csv",
            analytics.flow_series_to_csv(analytics.FlowSeries(points=tuple(spikes))),
        )
    if args.composition:
        selected = True
        rows = analytics.token_composition(events)
        outputs["composition.csv"] = write_text_atomic(out / "composition.csv", analytics.composition_to_csv(rows))
    if args.match_table:
        selected = True
        table = _per_token_rate_table(results, withdrawal_results, events_by_id, args.withdrawal_events)
        outputs["match_table.csv"] = write_text_atomic(out / "match_table.csv", analytics.rate_table_to_csv(table))
    if args.graph:
        selected = True
        transfers = [t for path in args.transfers for t in _load_transfers(path)]
        by_chain: dict[str, list] = {}
        for t in transfers:
            by_chain.setdefault(t.chain, []).append(t)
        graphs = analytics.collection_graph(by_chain, results, events_by_id, token_filter=args.graph)
        summary = {}
        for chain, graph in graphs.items():
            outputs[f"graph-{chain}.csv"] = write_text_atomic(
                out / f"graph-{chain}.csv", analytics.edges_to_csv(graph.edges)
            )
            summary[chain] = {
                "activeAddresses": graph.active_addresses,
                "transactions": len(graph.edges),
                "crossChainPercent": (
                    "n/a"
                    if graph.cross_chain_fraction is None
                    else f"{float(graph.cross_chain_fraction) * 100:.2f}%"
                ),
                "monthlyCounts": dict(graph.monthly_counts),
                "monthlyGrowth": {m: g for m, g in graph.monthly_growth},
            }
        outputs["graph_summary.json"] = write_text_atomic(
            out / "graph_summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n"
        )
    if args.long_latency:
        selected = True
        threshold = parse_duration(args.long_latency)
        now = args.now if args.now is not None else max((e.timestamp for e in events), default=0) + 1
        entries = analytics.long_latency_report(results, threshold, events_by_id, now)
        outputs["long_latency.csv"] = write_text_atomic(
            out / "long_latency.csv", analytics.long_latency_to_csv(entries)
        )
    if not selected:
        raise UsageError("select at least one report: --time-cost/--flows/--composition/--match-table/--graph/--long-latency")

    _write_manifest(
        out,
        "report",
        started=started,
        flags={
            "timeCost": args.time_cost,
            "flows": args.flows,
            "composition": args.composition,
            "matchTable": args.match_table,
            "graph": args.graph,
            "longLatency": args.long_latency,
        },
        inputs=_digest_inputs(
            [args.results, args.events, args.withdrawal_results, args.withdrawal_events] + list(args.transfers)
        ),
        outputs=outputs,
    )
    print(f"report: wrote {', '.join(sorted(outputs))} -> {out}")
    return EXIT_OK


def _per_token_rate_table(results, withdrawal_results, events_by_id, withdrawal_events_path):
    withdrawal_events_by_id = {}
    if withdrawal_events_path:
        withdrawal_events_by_id = {e.event_id: e for e in _load_events(withdrawal_events_path)}

    def tally(result_rows, lookup):
        per: dict[str, list[int]] = {}
        for r in result_rows:
            event = lookup.get(r.event_id)
            if event is None:
                continue
            sym = event.token.symbol.strip().upper()
            bucket = per.setdefault(sym, [0, 0])
            bucket[1] += 1
            if r.outcome == "exact":
                bucket[0] += 1
        return per

    deposits = tally(results, events_by_id)
    withdrawals = tally(withdrawal_results, withdrawal_events_by_id)
    table_input = {
        sym: (
            tuple(deposits.get(sym, (0, 0))),
            tuple(withdrawals.get(sym, (0, 0))),
        )
        for sym in sorted(set(deposits) | set(withdrawals))
    }
    return analytics.match_rate_table(table_input)


# --- eval -----------------------------------------------------------------

def _fmt_metric(value: Fraction | None) -> str:
    return "n/a" if value is None else f"{float(value):.6f}"


def cmd_eval(args) -> int:
    results = _load_results(args.results)
    truth = _load_truth(args.truth)
    outcome = score(results, truth)
    print(
        f"precision={_fmt_metric(outcome.precision)} "
        f"recall={_fmt_metric(outcome.recall)} "
        f"ambiguous_rate={_fmt_metric(outcome.ambiguous_rate)} "
        f"correct_exact={outcome.correct_exact} total_exact={outcome.total_exact} "
        f"events={outcome.total_events} withheld={outcome.withheld}"
    )
    gate_failed = False
    if args.min_precision is not None:
        if outcome.precision is None or outcome.precision < Fraction(args.min_precision).limit_denominator(10**9):
            gate_failed = True
    if args.min_recall is not None:
        if outcome.recall is None or outcome.recall < Fraction(args.min_recall).limit_denominator(10**9):
            gate_failed = True
    return EXIT_GATE if gate_failed else EXIT_OK


# --- ingest ---------------------------------------------------------------

def _parse_source(args) -> IngestSource:
    kind, _, location = args.source.partition(":")
    if not location:
        raise UsageError(f"bad source {args.source!r} (use kind:location)")
    key_env = None
    if kind == "explorer":
        location, _, key = location.partition(",key=")
        key_env = key or None
    return IngestSource(
        kind=kind,
        location=location,
        api_key_env=key_env,
        rate_limit=args.rate_limit,
        page_limit=args.page_limit,
        max_retries=args.max_retries,
        backoff_base_millis=args.backoff_ms,
    )


def _log_provider(source: IngestSource):
    if source.kind == "fixture":
        return FixtureLogProvider(source.location)
    if source.kind == "fixture+flaky":
        path, _, knob = source.location.partition("?")
        failures = int(knob.partition("=")[2] or 2)
        return FlakyProvider(FixtureLogProvider(path), failures)
    if source.kind == "rpc":
        return RpcLogProvider(source.location)
    raise UsageError(f"source kind {source.kind!r} cannot serve logs (use fixture:, fixture+flaky: or rpc:)")


def _transfer_provider(source: IngestSource, chain: str, native_symbol: str):
    if source.kind == "fixture":
        return FixtureTransferProvider(source.location)
    if source.kind == "fixture+flaky":
        path, _, knob = source.location.partition("?")
        failures = int(knob.partition("=")[2] or 2)
        return FlakyProvider(FixtureTransferProvider(path), failures)
    if source.kind == "explorer":
        return ExplorerTransferProvider(
            source.location, chain, api_key_env=source.api_key_env, native_symbol=native_symbol
        )
    raise UsageError(f"source kind {source.kind!r} cannot serve transfers (use fixture:, fixture+flaky: or explorer:)")


def cmd_ingest(args) -> int:
    started = _utc_now()
    spec = _load_spec_arg(args.spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    source = _parse_source(args)
    rate_limiter = RateLimiter(source.rate_limit)
    checkpoint_path = out / "checkpoint.json"
    checkpoint = load_checkpoint(checkpoint_path) if (args.resume and checkpoint_path.exists()) else IngestCheckpoint()
    stats = ScanStats()
    outputs: dict[str, str] = {}
    extra: dict = {}

    scan_mode = args.from_block is not None or args.to_block is not None
    if scan_mode == bool(args.addresses_file):
        raise UsageError("pass either --from-block/--to-block or --addresses-file")

    if scan_mode:
        if args.from_block is None or args.to_block is None:
            raise UsageError("both --from-block and --to-block are required")
        provider = _log_provider(source)
        logs = list(
            scan_bridge_logs(
                provider,
                spec,
                args.from_block,
                args.to_block,
                chunk_size=args.chunk_size,
                checkpoint=checkpoint,
                on_checkpoint=lambda cp: save_checkpoint(checkpoint_path, cp),
                rate_limiter=rate_limiter,
                max_retries=source.max_retries,
                backoff_base_millis=source.backoff_base_millis,
                stats=stats,
            )
        )
        if args.archive_raw:
            from bridgetrace.decode import raw_log_to_row

            outputs["raw/logs.ndj"] = write_atomic(out / "raw" / "logs.ndj", (raw_log_to_row(l) for l in logs), "raw_log.v1")
        events = []
        decode_errors = 0
        for log in logs:
            try:
                event = decode_log(log, spec)
            except DecodeError as exc:
                decode_errors += 1
                logger.warning("decode failed: %s", exc)
                continue
            if event is not None:
                events.extend(explode_batch(event))
        outputs["events.ndj"] = write_atomic(out / "events.ndj", (event_to_row(e) for e in events), "event.v1")
        depositors = sorted(extract_depositor_set(events))
        outputs["depositors.txt"] = write_text_atomic(out / "depositors.txt", "".join(a + "\n" for a in depositors))
        extra.update(
            {
                "logs": len(logs),
                "events": len(events),
                "decodeErrors": decode_errors,
                "scan": {"requests": stats.requests, "retries": stats.retries, "chunks": stats.chunks, "shrinks": stats.shrinks},
            }
        )
        exit_code = EXIT_OK
        failed: list[str] = []
    else:
        provider = _transfer_provider(source, spec.destination_chain, spec.native_symbol)
        addresses = [line.strip() for line in Path(args.addresses_file).read_text().splitlines() if line.strip()]
        asset_class = AssetClass(args.asset_class) if args.asset_class else None
        transfers, failed, truncated = fetch_transfers_for_addresses(
            provider,
            addresses,
            asset_class,
            _parse_window(args.window),
            page_limit=source.page_limit,
            workers=args.jobs,
            rate_limiter=rate_limiter,
            max_retries=source.max_retries,
            backoff_base_millis=source.backoff_base_millis,
            checkpoint=checkpoint,
            on_checkpoint=lambda cp: save_checkpoint(checkpoint_path, cp),
        )
        outputs["transfers.ndj"] = write_atomic(
            out / "transfers.ndj", (transfer_to_row(t) for t in transfers), "transfer.v1"
        )
        extra.update(
            {
                "addresses": len(addresses),
                "failedAddresses": sorted(failed),
                "truncatedAddresses": sorted(truncated),
                "transfers": len(transfers),
                "fetch": {"requests": stats.requests, "retries": stats.retries},
            }
        )
        exit_code = EXIT_PARTIAL if failed else EXIT_OK

    save_checkpoint(checkpoint_path, checkpoint)
    _write_manifest(
        out,
        "ingest",
        started=started,
        flags={
            "source": args.source,
            "fromBlock": args.from_block,
            "toBlock": args.to_block,
            "addressesFile": args.addresses_file,
            "assetClass": args.asset_class,
            "pageLimit": args.page_limit,
            "rateLimit": args.rate_limit,
            "jobs": args.jobs,
        },
        inputs=_digest_inputs([args.addresses_file]),
        outputs=outputs,
        spec=spec,
        config_path=args.spec,
        extra=extra,
    )
    if failed:
        print(f"ingest: partial, {len(failed)} addresses failed (see manifest)", file=sys.stderr)
    else:
        print(f"ingest: wrote {', '.join(sorted(outputs))} -> {out}")
    return exit_code


# --- parser ---------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="bridgetrace", description="Cross-chain bridge transaction tracing toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="scan bridge logs or fetch per-address transfers")
    p.add_argument("--spec", help="bridge spec config (default: shipped polygon-pos)")
    p.add_argument("--source", required=True, help="fixture:PATH | fixture+flaky:PATH?failures=N | rpc:URL | explorer:URL[,key=NAME]")
    p.add_argument("--from-block", type=int)
    p.add_argument("--to-block", type=int)
    p.add_argument("--addresses-file")
    p.add_argument("--asset-class", choices=[c.value for c in AssetClass])
    p.add_argument("--window", help="timestamp window LO:HI for transfer fetches")
    p.add_argument("--out", required=True)
    p.add_argument("--chunk-size", type=int, default=2048)
    p.add_argument("--page-limit", type=int, default=10_000)
    p.add_argument("--rate-limit", type=float, default=5.0)
    p.add_argument("--max-retries", type=int, default=3)
    p.add_argument("--backoff-ms", type=int, default=200)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--resume", action="store_true", help="continue from the checkpoint in --out")
    p.add_argument("--archive-raw", action="store_true", help="archive raw provider payloads under raw/")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("match", help="run the match heuristic over event/transfer files")
    p.add_argument("--events", required=True)
    p.add_argument("--transfers", required=True)
    p.add_argument("--tolerance", required=True, help="time tolerance, e.g. 900, 24.2m, 2h")
    p.add_argument("--direction", choices=["deposit", "withdrawal"], default="deposit")
    p.add_argument("--exclusive", action="store_true", help="each exact match consumes its transfer")
    p.add_argument("--symmetric-window", action="store_true", help="|dt| <= tolerance instead of causal 0 <= dt <= tolerance")
    p.add_argument("--strict-gap", action="store_true", help="drop candidates at exactly dt == tolerance")
    p.add_argument("--spec")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("tune", help="sweep time_tolerance over a grid and report the peak")
    p.add_argument("--events", required=True)
    p.add_argument("--transfers", required=True)
    p.add_argument("--sample-size", type=int, default=DEFAULT_SAMPLE_SIZE)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--grid", help="comma-separated tolerances (default: geometric grid per direction)")
    p.add_argument("--direction", choices=["deposit", "withdrawal"], default="deposit")
    p.add_argument("--symmetric-window", action="store_true")
    p.add_argument("--per-token", action="store_true", help="sweep each token symbol separately")
    p.add_argument("--spec")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("report", help="derive series, tables and graphs from match results")
    p.add_argument("--results", required=True)
    p.add_argument("--events", required=True)
    p.add_argument("--withdrawal-results")
    p.add_argument("--withdrawal-events")
    p.add_argument("--transfers", action="append", default=[], help="transfer files (repeatable; graphs)")
    p.add_argument("--time-cost", nargs="?", const=analytics.MEDIAN, choices=[analytics.MEDIAN, analytics.MEAN, analytics.P90])
    p.add_argument("--flows", action="store_true")
    p.add_argument("--spike-multiplier", type=float, default=3.0)
    p.add_argument("--composition", action="store_true")
    p.add_argument("--match-table", action="store_true")
    p.add_argument("--graph", help="token symbol filter for graph export")
    p.add_argument("--long-latency", help="threshold duration for the long-latency report")
    p.add_argument("--now", type=int, help="reference timestamp for unclaimed-burn aging")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("simulate", help="generate synthetic traffic with ground truth")
    p.add_argument("--scenario", help="scenario JSON file (overrides inline knobs)")
    p.add_argument("--pairs", type=int, default=1000)
    p.add_argument("--latency", default="uniform:300,900")
    p.add_argument("--asset-mix", default="native=0.5,fungible=0.3,nft=0.2")
    p.add_argument("--noise-rate", type=float, default=0.0)
    p.add_argument("--collision-rate", type=float, default=0.0)
    p.add_argument("--missing-rate", type=float, default=0.0)
    p.add_argument("--pool", type=int, default=250)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--span-days", type=int, default=3)
    p.add_argument("--direction", choices=["deposit", "withdrawal"], default="deposit")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("eval", help="score match results against ground truth")
    p.add_argument("--results", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--min-precision", type=float)
    p.add_argument("--min-recall", type=float)
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, ConfigError, SchemaError, AddressError, DecodeError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IngestError as exc:
        print(f"source error: {exc}", file=sys.stderr)
        return EXIT_SOURCE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
