"""Deterministic counter-based random number streams.

Every draw is a pure function of (master_seed, env_id, purpose tag, frame,
draw index). There is no hidden state: asking for the same draw twice returns
the same value, distinct purpose tags never share draws, and results are
independent of how work is scheduled across workers or processes.

The core is a splitmix64-style integer hash evaluated lazily per draw index,
so streams cost nothing to "create" and can be consumed out of order. Stream
identities are mixed with exact Python integer arithmetic; the per-index
hashing runs on uint64 arrays, whose wraparound is silent and intended.
"""

from __future__ import annotations

import zlib

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_INV_2_53 = float(2.0**-53)

_GOLDEN_U = np.uint64(_GOLDEN)
_MIX1_U = np.uint64(_MIX1)
_MIX2_U = np.uint64(_MIX2)


def _mix_int(x: int) -> int:
    """splitmix64 finalizer over exact Python integers."""
    x &= _MASK64
    x = ((x ^ (x >> 30)) * _MIX1) & _MASK64
    x = ((x ^ (x >> 27)) * _MIX2) & _MASK64
    return x ^ (x >> 31)


def tag_id(tag: str) -> int:
    """Stable 32-bit identifier for a purpose tag (crc32 of the UTF-8 bytes)."""
    return zlib.crc32(tag.encode("utf-8"))


def _stream_state(master_seed: int, env_id: int, tag: str, frame: int) -> int:
    h = master_seed & _MASK64
    for word in (env_id, tag_id(tag), frame):
        h = _mix_int(((h + _GOLDEN) & _MASK64) ^ (word & _MASK64))
    return h


def _raw(state: int, index: np.ndarray) -> np.ndarray:
    """Hash uint64 draw indices into uint64 values (wraparound intended)."""
    x = np.uint64(state) + (index + np.uint64(1)) * _GOLDEN_U
    x = (x ^ (x >> np.uint64(30))) * _MIX1_U
    x = (x ^ (x >> np.uint64(27))) * _MIX2_U
    return x ^ (x >> np.uint64(31))


def _unit_open(raw: np.ndarray) -> np.ndarray:
    # top 53 bits -> float64 in [0, 1)
    return (raw >> np.uint64(11)).astype(np.float64) * _INV_2_53


def _unit_closed(raw: np.ndarray) -> np.ndarray:
    # (0, 1], safe as a log() argument
    return ((raw >> np.uint64(11)).astype(np.float64) + 1.0) * _INV_2_53


class RngStream:
    """Counter-based stream of draws for one (master_seed, env_id) pair.

    Methods take the purpose `tag` and `frame` explicitly; repeated calls with
    identical arguments reproduce identical values. `start` selects the first
    draw index, letting callers split one logical stream into segments.
    """

    __slots__ = ("master_seed", "env_id")

    def __init__(self, master_seed: int, env_id: int = 0):
        self.master_seed = int(master_seed) & _MASK64
        self.env_id = int(env_id)

    def _indices(self, size: int | None, start: int) -> np.ndarray:
        n = 1 if size is None else int(size)
        return np.arange(start, start + n, dtype=np.uint64)

    def uniform(self, tag: str, frame: int, low: float = 0.0, high: float = 1.0,
                size: int | None = None, start: int = 0):
        state = _stream_state(self.master_seed, self.env_id, tag, frame)
        u = _unit_open(_raw(state, self._indices(size, start)))
        out = low + (high - low) * u
        return float(out[0]) if size is None else out

    def normal(self, tag: str, frame: int, size: int | None = None, start: int = 0):
        """Standard normals via Box-Muller; draw i consumes raw indices 2i, 2i+1."""
        state = _stream_state(self.master_seed, self.env_id, tag, frame)
        idx = self._indices(size, start)
        u1 = _unit_closed(_raw(state, idx * np.uint64(2)))
        u2 = _unit_open(_raw(state, idx * np.uint64(2) + np.uint64(1)))
        z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
        return float(z[0]) if size is None else z

    def integers(self, tag: str, frame: int, low: int, high: int,
                 size: int | None = None, start: int = 0):
        """Uniform integers on the closed range [low, high]."""
        if high < low:
            raise ValueError("integers() needs low <= high")
        u = self.uniform(tag, frame, size=size if size is not None else 1, start=start)
        u = np.atleast_1d(u)
        vals = low + np.minimum((u * (high - low + 1)).astype(np.int64), high - low)
        return int(vals[0]) if size is None else vals

    def permutation(self, tag: str, frame: int, n: int) -> np.ndarray:
        """Deterministic permutation of range(n): argsort of n hashed keys."""
        state = _stream_state(self.master_seed, self.env_id, tag, frame)
        keys = _raw(state, np.arange(n, dtype=np.uint64))
        return np.argsort(keys, kind="stable")
