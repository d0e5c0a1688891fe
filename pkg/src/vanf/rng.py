"""Deterministic random streams.

Two kinds are used across the package:

* stateful ``numpy.random.Generator`` objects derived from integer seed
  tuples, for one-shot procedural generation (meshes, poses, parameter init);
* stateless counter-based hashing (splitmix64 rounds), for anything that must
  be reproducible per pixel / per step regardless of batching, e.g. ray
  jitter. A patch render and a full-image render draw identical numbers for
  the same pixel because the stream is keyed on (seed, v, u, stream, index).
"""

from __future__ import annotations

import numpy as np

# stream tags keep independent uses of the same (seed, step) keys decorrelated
STREAM_COARSE = 0x11
STREAM_FINE = 0x22
STREAM_SCENE = 0x33
STREAM_CAMS = 0x44
STREAM_PATCH = 0x55

_MIX1 = np.uint64(0x9E3779B97F4A7C15)
_MIX2 = np.uint64(0xBF58476D1CE4E5B9)
_MIX3 = np.uint64(0x94D049BB133111EB)


def _splitmix(x: np.ndarray) -> np.ndarray:
    # wrapping multiplies are the whole point; keep numpy quiet about them
    with np.errstate(over="ignore"):
        x = (x + _MIX1).astype(np.uint64)
        x = ((x ^ (x >> np.uint64(30))) * _MIX2).astype(np.uint64)
        x = ((x ^ (x >> np.uint64(27))) * _MIX3).astype(np.uint64)
        return x ^ (x >> np.uint64(31))


def hash_u64(*keys) -> np.ndarray:
    """Mix integer keys (scalars or broadcastable arrays) into uint64 hashes."""
    h = np.uint64(0x243F6A8885A308D3)  # pi fraction, arbitrary fixed basis
    for k in keys:
        k64 = np.asarray(k).astype(np.uint64)
        h = _splitmix(np.bitwise_xor(h, k64))
    return h


def hash_u01(*keys) -> np.ndarray:
    """Uniform [0, 1) float64 from integer keys; shape follows broadcasting."""
    return (hash_u64(*keys) >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)


def make_rng(*keys: int) -> np.random.Generator:
    """Stateful generator for one-shot procedural work, keyed on integers."""
    return np.random.default_rng(np.random.SeedSequence([int(k) & 0xFFFFFFFF for k in keys]))
