"""Transactional-partitioning OLTP simulator."""

import json as _json

from ._tpart import (
    Deployment,
    EngineError,
    advise_mapping,
    estimate_cost,
    gen_workload,
)
from ._tpart import run_benchmark as _run_benchmark

__all__ = [
    "Deployment",
    "EngineError",
    "advise_mapping",
    "estimate_cost",
    "gen_workload",
    "run_benchmark",
]


def run_benchmark(**kwargs):
    """Run the new_order benchmark; returns the report as a dict."""
    kwargs["format"] = "json"
    return _json.loads(_run_benchmark(**kwargs))
