from bridgetrace.match._kernel import compiled_available, kernel_name
from bridgetrace.match.engine import (
    CandidateIndex,
    Counts,
    MatchConfig,
    MatchReport,
    build_candidate_index,
    extract_burn_events,
    exit_events_to_transfers,
    format_percent,
    index_key,
    match_all,
    match_event,
    match_withdrawals,
    passes_criteria,
)

__all__ = [
    "CandidateIndex",
    "Counts",
    "MatchConfig",
    "MatchReport",
    "build_candidate_index",
    "compiled_available",
    "extract_burn_events",
    "exit_events_to_transfers",
    "format_percent",
    "index_key",
    "kernel_name",
    "match_all",
    "match_event",
    "match_withdrawals",
    "passes_criteria",
]
