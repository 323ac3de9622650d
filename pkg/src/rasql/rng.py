"""Seeded, counter-based random streams.

Every stream is a Philox4x64-10 generator keyed by a 64-bit seed with its
counter starting at zero. Uniforms are produced from the raw 64-bit outputs
as ``(bits >> 11) * 2**-53``, so a stream depends only on the Philox
algorithm and never on higher-level numpy sampling routines.
"""

from __future__ import annotations

from bisect import bisect_right
from typing import Sequence

import numpy as np

_BLOCK = 4096
_SCALE = 2.0 ** -53


class RngStream:
    """Deterministic stream of uniforms in [0, 1).

    Draws are buffered in blocks; ``count`` is the number of uniforms consumed
    so far, which makes replay bookkeeping cheap.
    """

    def __init__(self, seed: int):
        seed = int(seed)
        if not 0 <= seed < 2 ** 64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self._bitgen = np.random.Philox(key=seed)
        self._buf: list[float] = []
        self._pos = 0
        self.count = 0

    def _refill(self) -> None:
        raw = self._bitgen.random_raw(_BLOCK)
        self._buf = ((raw >> np.uint64(11)).astype(np.float64) * _SCALE).tolist()
        self._pos = 0

    def uniform(self) -> float:
        if self._pos == len(self._buf):
            self._refill()
        u = self._buf[self._pos]
        self._pos += 1
        self.count += 1
        return u

    def categorical(self, cdf: Sequence[float]) -> int:
        """Draw an index from a cumulative distribution (see :func:`make_cdf`)."""
        return pick(cdf, self.uniform())


def make_cdf(probs) -> list[float]:
    """Cumulative sums of ``probs`` as a list, with the tail pinned to 1.

    Zero-mass entries at the end are excluded from the pinned tail so that
    :func:`pick` never returns them.
    """
    p = np.asarray(probs, dtype=float)
    cdf = np.cumsum(p)
    last = int(np.flatnonzero(p > 0)[-1])
    cdf[last:] = 1.0
    return cdf.tolist()


def pick(cdf: Sequence[float], u: float) -> int:
    """Index ``k`` with ``cdf[k-1] <= u < cdf[k]``; zero-mass entries are skipped."""
    return bisect_right(cdf, u)
