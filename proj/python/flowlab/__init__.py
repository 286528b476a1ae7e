"""Python bindings for the flowlab stochastic-flow toolkit."""

import json as _json

from ._flowlab import (
    audit,
    drift,
    girsanov_hitting,
    hitting_probability,
    maximal_function,
    philox4x32,
    preset_ids,
    preset_table,
    set_threads,
    simulate,
    threads,
)
from ._flowlab import run_experiment as _run_experiment


def run_experiment(config, seed=None, dt=None, paths=None):
    """Run an experiment config given as a dict or JSON text.

    The returned dict carries the parsed report under "report"."""
    text = config if isinstance(config, str) else _json.dumps(config)
    out = _run_experiment(text, seed, dt, paths)
    out["report"] = _json.loads(out["report_json"])
    return out


__all__ = [
    "audit",
    "drift",
    "girsanov_hitting",
    "hitting_probability",
    "maximal_function",
    "philox4x32",
    "preset_ids",
    "preset_table",
    "run_experiment",
    "set_threads",
    "simulate",
    "threads",
]
