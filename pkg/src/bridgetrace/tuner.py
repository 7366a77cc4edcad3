"""Time-tolerance sweep: sample events, try a tolerance grid, find the peak.

Small windows miss slow settlements, large windows admit duplicated values
that turn exact matches ambiguous, so the exact-match rate typically rises
and then falls across the grid.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Sequence

from bridgetrace.bridgespec import BridgeSpec
from bridgetrace.match.engine import MatchConfig, match_all
from bridgetrace.model import BridgeEvent, ChainTransfer, Direction

DEFAULT_GRID_POINTS = 25
DEFAULT_SAMPLE_SIZE = 10_000


@dataclass(frozen=True)
class SweepPoint:
    tolerance_seconds: int
    exact_rate: Fraction | None
    exact: int
    ambiguous: int
    unmatched: int


@dataclass(frozen=True)
class SweepCurve:
    points: tuple[SweepPoint, ...]
    sample_size: int
    seed: int | None


def sample_events(events: Sequence[BridgeEvent], n: int, seed: int) -> list[BridgeEvent]:
    """Uniform sample without replacement, fixed by (inputs, n, seed)."""
    if n > len(events):
        raise ValueError(f"sample size {n} exceeds dataset size {len(events)}")
    return random.Random(seed).sample(list(events), n)


def sweep(
    sample: Sequence[BridgeEvent],
    transfers: Sequence[ChainTransfer],
    tolerances: Sequence[int],
    cfg: MatchConfig,
    spec: BridgeSpec,
    seed: int | None = None,
) -> SweepCurve:
    """One match run per grid tolerance, everything else held fixed."""
    if not tolerances:
        raise ValueError("tolerance grid must not be empty")
    if any(b <= a for a, b in zip(tolerances, tolerances[1:])):
        raise ValueError("tolerance grid must be strictly increasing")
    points = []
    for tolerance in tolerances:
        report = match_all(sample, transfers, replace(cfg, time_tolerance_seconds=tolerance), spec)
        counts = report.counts
        points.append(
            SweepPoint(
                tolerance_seconds=tolerance,
                exact_rate=report.match_rate,
                exact=counts.exact,
                ambiguous=counts.ambiguous,
                unmatched=counts.unmatched,
            )
        )
    return SweepCurve(points=tuple(points), sample_size=len(sample), seed=seed)


def find_peak(curve: SweepCurve) -> SweepPoint:
    """Point with the highest exact rate; ties break toward the smallest
    tolerance, since smaller windows admit fewer false pairs."""
    if not curve.points:
        raise ValueError("cannot find the peak of an empty curve")
    best = curve.points[0]
    for point in curve.points[1:]:
        if (point.exact_rate or Fraction(0)) > (best.exact_rate or Fraction(0)):
            best = point
    return best


def default_grid(direction: Direction) -> list[int]:
    """Geometric 25-point grid: 1 min-2 h for deposits, 10 min-14 d for
    withdrawals (burn-and-prove settles far slower than lock-and-mint)."""
    if direction is Direction.DEPOSIT:
        low, high = 60, 7_200
    else:
        low, high = 600, 1_209_600
    ratio = (high / low) ** (1 / (DEFAULT_GRID_POINTS - 1))
    grid: list[int] = []
    for i in range(DEFAULT_GRID_POINTS):
        value = round(low * ratio**i)
        if grid and value <= grid[-1]:
            value = grid[-1] + 1
        grid.append(value)
    return grid


def curve_to_csv(curve: SweepCurve) -> str:
    lines = ["tolerance_seconds,exact_rate,exact,ambiguous,unmatched"]
    for p in curve.points:
        rate = "n/a" if p.exact_rate is None else f"{float(p.exact_rate):.6f}"
        lines.append(f"{p.tolerance_seconds},{rate},{p.exact},{p.ambiguous},{p.unmatched}")
    return "\n".join(lines) + "\n"
