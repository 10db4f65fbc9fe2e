"""Deterministic random streams.

Every random draw in this package comes from an explicitly injected
:class:`RngStream`; there is no ambient/global randomness anywhere. A stream
is keyed by a ``(seed, stream_id)`` pair and replays bit-identically across
runs and platforms: the raw 64-bit blocks come from the Philox-4x64-10
counter generator (fixed, documented constants; numpy freezes the
BitGenerator stream), and all variates are fixed deterministic transforms of
those blocks with data-independent draw counts:

* uniform: ``(block >> 11) * 2**-53``, in ``[0, 1)``
* normal:  Box-Muller cosine branch, exactly two uniforms per variate

numpy's ``Generator`` distribution methods are deliberately not used; only
the raw block stream is.
"""

from __future__ import annotations

import numpy as np

_U64_MAX = 2**64 - 1
_SHIFT = np.uint64(11)
_INV53 = 2.0**-53


class RngStream:
    """A seeded, replayable stream of uniform and normal variates.

    Streams with the same ``(seed, stream_id)`` produce identical sequences;
    streams with different ids never share state. Instances are stateful and
    not safe for concurrent mutation -- use one stream per thread of work.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        for name, v in (("seed", seed), ("stream_id", stream_id)):
            if not isinstance(v, (int, np.integer)) or not 0 <= v <= _U64_MAX:
                raise ValueError(f"{name} must be a 64-bit unsigned integer, got {v!r}")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        self._bits = np.random.Philox(key=key)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

    def _raw(self, n: int) -> np.ndarray:
        return np.atleast_1d(self._bits.random_raw(n))

    def uniform(self, size: int | tuple[int, ...] | None = None) -> float | np.ndarray:
        """Uniform float64 draws in [0, 1); scalar when ``size`` is None."""
        if size is None:
            return float(self._raw(1)[0] >> _SHIFT) * _INV53
        shape = (size,) if isinstance(size, (int, np.integer)) else tuple(size)
        n = int(np.prod(shape)) if shape else 1
        u = (self._raw(n) >> _SHIFT).astype(np.float64) * _INV53
        return u.reshape(shape)

    def normal(self, size: int | tuple[int, ...] | None = None) -> float | np.ndarray:
        """Standard-normal draws; two uniforms consumed per variate."""
        if size is None:
            return float(self.normal(1)[0])
        shape = (size,) if isinstance(size, (int, np.integer)) else tuple(size)
        n = int(np.prod(shape)) if shape else 1
        u = self.uniform(2 * n)
        u1, u2 = u[:n], u[n:]
        # log(1 - u1) with u1 in [0,1) keeps the argument in (0,1]: no infinities
        z = np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)
        return z.reshape(shape)

    def integers(self, low: int, high: int, size: int | None = None) -> int | np.ndarray:
        """Integers uniform on [low, high). Bias is O((high-low)/2^53): negligible."""
        if high <= low:
            raise ValueError(f"empty integer range [{low}, {high})")
        if size is None:
            return low + int(self.uniform() * (high - low))
        u = self.uniform(size)
        return low + (u * (high - low)).astype(np.int64)

    def permutation(self, n: int) -> np.ndarray:
        """A uniform random permutation of range(n).

        Stable argsort over raw 64-bit keys; a key collision (probability
        ~n^2/2^65) only falls back to index order, still deterministic.
        """
        if n < 0:
            raise ValueError("n must be nonnegative")
        if n == 0:
            return np.empty(0, dtype=np.int64)
        return np.argsort(self._raw(n), kind="stable").astype(np.int64)

    def choice_without_replacement(self, n: int, k: int) -> np.ndarray:
        """k distinct indices from range(n), uniformly."""
        if k > n:
            raise ValueError(f"cannot draw {k} distinct items from {n}")
        return self.permutation(n)[:k]


def make_rng(seed: int, stream_id: int = 0) -> RngStream:
    """Create the stream for a (seed, stream_id) pair."""
    return RngStream(seed, stream_id)
