"""bridgetrace: cross-chain bridge transaction tracing toolkit.

Decodes bridge events on a source chain, ingests per-address transfers on
the destination chain, matches the two sides with an exact-value
time-window heuristic, and derives matching-rate, flow, and latency
analytics. A synthetic-traffic generator with ground truth makes the
matcher verifiable end to end.
"""

__version__ = "0.1.0"
