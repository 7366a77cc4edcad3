#!/usr/bin/env python3
"""Benchmark the compiled match-scan kernel against the pure-Python fallback.

Two measurements:
  - end-to-end match_all on synthetic traffic (index build + scan + report)
  - the raw window-scan kernel on pre-encoded arrays (the hot loop alone)

Usage: python benchmarks/bench_match.py [--pairs 100000] [--repeats 3]
"""

from __future__ import annotations

import argparse
import os
import time

import numpy as np

from bridgetrace.bridgespec import default_polygon_pos_spec
from bridgetrace.match import _scan_py, compiled_available
from bridgetrace.match.engine import MatchConfig, match_all
from bridgetrace.model import Direction
from bridgetrace.simulate import Latency, TrafficScenario, generate


def _best_of(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_end_to_end(pairs: int, repeats: int) -> None:
    spec = default_polygon_pos_spec()
    scenario = TrafficScenario(
        n_pairs=pairs,
        latency=Latency("uniform", (300, 900)),
        noise_transfer_rate=0.5,
        value_collision_rate=0.1,
        address_pool_size=max(100, pairs // 20),
        seed=1,
        span_days=30,
    )
    print(f"generating {pairs} pairs (+60% noise/collisions)...")
    events, transfers, _ = generate(scenario, Direction.DEPOSIT)
    cfg = MatchConfig(time_tolerance_seconds=900)

    timings = {}
    for label, env in (("compiled", None), ("python", "1")):
        if label == "compiled" and not compiled_available():
            print("compiled kernel not built; skipping")
            continue
        if env is None:
            os.environ.pop("BRIDGETRACE_PURE_PYTHON", None)
        else:
            os.environ["BRIDGETRACE_PURE_PYTHON"] = env
        timings[label] = _best_of(lambda: match_all(events, transfers, cfg, spec), repeats)
        print(f"match_all [{label:8s}] {timings[label]:8.3f} s "
              f"({len(events) / timings[label]:,.0f} events/s)")
    if len(timings) == 2:
        print(f"end-to-end speedup: {timings['python'] / timings['compiled']:.1f}x")
    os.environ.pop("BRIDGETRACE_PURE_PYTHON", None)


def bench_raw_kernel(n_events: int, repeats: int) -> None:
    rng = np.random.default_rng(7)
    group_size = 200
    n_groups = max(1, n_events // 50)
    cand = n_groups * group_size
    cand_ts = np.sort(rng.integers(0, 10**7, size=cand)).astype(np.int64)
    cand_vid = rng.integers(0, 5_000, size=cand).astype(np.int64)
    group_of_event = rng.integers(0, n_groups, size=n_events)
    starts = (group_of_event * group_size).astype(np.int64)
    stops = starts + group_size
    centers = rng.integers(0, 10**7, size=n_events).astype(np.int64)
    lo = centers
    hi = centers + 900
    want = rng.integers(0, 5_000, size=n_events).astype(np.int64)
    out_n = np.zeros(n_events, dtype=np.int64)
    out_first = np.zeros(n_events, dtype=np.int64)
    out_second = np.zeros(n_events, dtype=np.int64)

    def run(kernel):
        kernel(starts, stops, lo, hi, want, cand_ts, cand_vid, out_n, out_first, out_second)

    print(f"\nraw kernel: {n_events} events over {n_groups} groups of {group_size}")
    python_time = _best_of(lambda: run(_scan_py.scan_window), repeats)
    print(f"scan_window [python  ] {python_time:8.3f} s")
    if compiled_available():
        from bridgetrace.match import _scan

        compiled_time = _best_of(lambda: run(_scan.scan_window), repeats)
        print(f"scan_window [compiled] {compiled_time:8.3f} s")
        print(f"raw kernel speedup: {python_time / compiled_time:.0f}x")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--pairs", type=int, default=100_000)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()
    print(f"compiled kernel available: {compiled_available()}")
    bench_end_to_end(args.pairs, args.repeats)
    bench_raw_kernel(args.pairs, args.repeats)


if __name__ == "__main__":
    main()
