"""Portable seeded random streams.

Bits come from NumPy's PCG64 bit generator, whose raw output stream is
stable across platforms and releases. The float and Gaussian transforms are
done here rather than through ``numpy.random.Generator`` so that the
distribution code is pinned in this repository as well.
"""

import numpy as np

_TWO_PI = 2.0 * np.pi
_INV_2_53 = 1.0 / 9007199254740992.0


class Stream:
    """Deterministic source of uniform and normal variates."""

    def __init__(self, seed: int):
        if seed < 0:
            raise ValueError("seed must be an unsigned integer")
        self.seed = int(seed)
        self._bits = np.random.PCG64(self.seed)

    def _unit(self, n: int) -> np.ndarray:
        # top 53 bits of each word -> [0, 1)
        raw = np.asarray(self._bits.random_raw(n), dtype=np.uint64)
        return (raw >> np.uint64(11)).astype(np.float64) * _INV_2_53

    def uniform(self, low=0.0, high=1.0, size=1) -> np.ndarray:
        shape = (size,) if np.isscalar(size) else tuple(size)
        n = int(np.prod(shape))
        u = self._unit(n).reshape(shape)
        low = np.asarray(low, dtype=np.float64)
        high = np.asarray(high, dtype=np.float64)
        return low + (high - low) * u

    def normal(self, loc=0.0, scale=1.0, size=1) -> np.ndarray:
        """Box-Muller normals; consumes two words per pair of outputs."""
        shape = (size,) if np.isscalar(size) else tuple(size)
        n = int(np.prod(shape))
        pairs = (n + 1) // 2
        u = self._unit(2 * pairs).reshape(pairs, 2)
        radius = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        angle = _TWO_PI * u[:, 1]
        z = np.empty(2 * pairs)
        z[0::2] = radius * np.cos(angle)
        z[1::2] = radius * np.sin(angle)
        return np.asarray(loc) + np.asarray(scale) * z[:n].reshape(shape)

    def exponential(self, size=1) -> np.ndarray:
        shape = (size,) if np.isscalar(size) else tuple(size)
        n = int(np.prod(shape))
        return -np.log1p(-self._unit(n)).reshape(shape)
