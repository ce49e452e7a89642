"""Deterministic counter-based random numbers.

Platform default generators differ between languages and library versions,
but golden feature files must be byte-identical everywhere.  This is the
splitmix64 finalizer applied to a 64-bit counter stream: output i of stream
`seed` is mix(seed_mix + (i+1) * GOLDEN).  Gaussians come from Box-Muller on
consecutive counter pairs, so every draw is a pure function of (seed, counter).
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1E3595B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U53_INV = float(2.0 ** -53)


def _mix64(x: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer, elementwise on uint64."""
    x = x.astype(np.uint64, copy=True)
    x ^= x >> np.uint64(30)
    x *= _MIX1
    x ^= x >> np.uint64(27)
    x *= _MIX2
    x ^= x >> np.uint64(31)
    return x


class CounterRng:
    """Stateful view over the counter stream for one 64-bit seed."""

    def __init__(self, seed: int):
        self._seed = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
        # decorrelates nearby seeds before the counter stream starts
        self._base = _mix64(np.array([self._seed], dtype=np.uint64))[0]
        self._counter = 0

    def _raw(self, n: int) -> np.ndarray:
        counters = np.arange(self._counter + 1, self._counter + n + 1, dtype=np.uint64)
        self._counter += n
        return _mix64(self._base + counters * _GOLDEN)

    def uniform(self, n: int) -> np.ndarray:
        """n doubles in [0, 1), 53-bit resolution."""
        return (self._raw(n) >> np.uint64(11)).astype(np.float64) * _U53_INV

    def _uniform_open(self, n: int) -> np.ndarray:
        """n doubles in (0, 1]; safe as a log argument."""
        return ((self._raw(n) >> np.uint64(11)) + np.uint64(1)).astype(np.float64) * _U53_INV

    def normal(self, n: int) -> np.ndarray:
        """n standard normals via Box-Muller on counter pairs."""
        m = (n + 1) // 2
        u1 = self._uniform_open(m)
        u2 = self.uniform(m)
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        out = np.empty(2 * m, dtype=np.float64)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:n]

    def permutation(self, n: int) -> np.ndarray:
        """Deterministic permutation of range(n) (stable argsort of uniforms)."""
        return np.argsort(self.uniform(n), kind="stable")
