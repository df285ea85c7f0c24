"""Seeded random streams.

A single 64-bit seed is expanded with :class:`numpy.random.SeedSequence` into
independent Philox (counter-based) generators, one per named purpose, so that
e.g. changing the evaluation budget never perturbs training noise.
"""

from __future__ import annotations

import numpy as np

STREAMS = ("init", "bits", "noise", "eval")


def make_streams(seed: int) -> dict[str, np.random.Generator]:
    children = np.random.SeedSequence(int(seed)).spawn(len(STREAMS))
    return {name: np.random.Generator(np.random.Philox(ss)) for name, ss in zip(STREAMS, children)}


def generator_states(streams: dict[str, np.random.Generator]) -> dict:
    """JSON-serializable snapshot of every stream's bit-generator state."""
    return {name: _jsonable(g.bit_generator.state) for name, g in streams.items()}


def restore_states(streams: dict[str, np.random.Generator], states: dict) -> None:
    for name, st in states.items():
        streams[name].bit_generator.state = _from_jsonable(st)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        return {"__array__": obj.tolist(), "dtype": str(obj.dtype)}
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _from_jsonable(obj):
    if isinstance(obj, dict):
        if "__array__" in obj:
            return np.asarray(obj["__array__"], dtype=obj["dtype"])
        return {k: _from_jsonable(v) for k, v in obj.items()}
    return obj
