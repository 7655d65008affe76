"""Portable 64-bit random streams.

All randomness in the package comes from SplitMix64 run in counter mode:
the i-th output (i = 0, 1, ...) of the stream seeded with ``s`` is::

    z = (s + (i + 1) * 0x9E3779B97F4A7C15) mod 2**64
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 mod 2**64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB mod 2**64
    out = z ^ (z >> 31)

which is exactly the sequential SplitMix64 generator, but every draw can be
computed independently, so numpy can produce whole images of noise at once.
Derived quantities are defined on top of the raw words:

* uniform double in [0, 1): ``(out >> 11) * 2**-53``
* standard normals: Box-Muller on consecutive uniform pairs ``(u1, u2)``
  giving ``r*cos(2*pi*u2), r*sin(2*pi*u2)`` with ``r = sqrt(-2*log(1 - u1))``
* permutation of ``n``: stable argsort of ``n`` raw words
* child seeds: ``derive(s, k1, k2, ...)`` folds each key as
  ``s <- mix64(s + (k + 1) * GAMMA)``.
"""

import numpy as np

GAMMA = 0x9E3779B97F4A7C15
MASK64 = (1 << 64) - 1

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GAMMA = np.uint64(GAMMA)


def mix64(z):
    """SplitMix64 finalizer on a uint64 array (wrapping arithmetic)."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _mix64_int(z):
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive(seed, *keys):
    """Child seed for the key path ``keys`` under ``seed``."""
    z = int(seed) & MASK64
    for k in keys:
        z = _mix64_int(z + (int(k) + 1) * GAMMA)
    return z


class Stream:
    """Counter-mode SplitMix64 stream. Draws advance an internal counter."""

    def __init__(self, seed):
        self.seed = int(seed) & MASK64
        self.counter = 0

    def uint64(self, n):
        idx = np.arange(self.counter + 1, self.counter + 1 + n, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            z = np.uint64(self.seed) + idx * _GAMMA
        return mix64(z)

    def uniform(self, n):
        return (self.uint64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normal(self, n):
        m = (n + 1) // 2
        u = self.uniform(2 * m).reshape(m, 2)
        r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        theta = 2.0 * np.pi * u[:, 1]
        z = np.empty((m, 2))
        z[:, 0] = r * np.cos(theta)
        z[:, 1] = r * np.sin(theta)
        return z.reshape(-1)[:n]

    def permutation(self, n):
        return np.argsort(self.uint64(n), kind="stable")
