"""Python front end to the hop-on slicing simulator."""

import json

from ._core import (
    CompositionError,
    EngineError,
    HopOnError,
    ParseError,
    Scenario,
    allocate_latency_budget,
    export_dot,
)
from . import _core

__all__ = [
    "CompositionError",
    "EngineError",
    "HopOnError",
    "ParseError",
    "Scenario",
    "allocate_latency_budget",
    "compare",
    "compose",
    "export_dot",
    "load",
    "run",
    "validate",
]


def load(path):
    return Scenario.load(str(path))


def validate(scenario):
    return [
        {"severity": s, "location": loc, "message": msg}
        for s, loc, msg in _core.validate(scenario)
    ]


def compose(scenario, as_text=False):
    docs = _core.compose(scenario)
    if as_text:
        return docs
    return {path: json.loads(text) for path, text in docs.items()}


def run(scenario, trace=False):
    """Metrics as a dict; with trace=True, a (metrics, csv_text) pair."""
    metrics, csv = _core.run(scenario, trace)
    metrics = json.loads(metrics)
    return (metrics, csv) if trace else metrics


def compare(scenario):
    return json.loads(_core.compare(scenario))
