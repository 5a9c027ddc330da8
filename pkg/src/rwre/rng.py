"""Counter-based random streams shared by the numpy and numba code paths.

Every random draw in the toolkit is a pure function of a 64-bit stream key
and a draw counter (splitmix64 finalizer).  That makes generation
order-independent: parallel workers, vectorised numpy loops and sequential
numba loops all produce bit-identical output for the same (key, counter)
pairs.
"""

from __future__ import annotations

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1

# uniform in (0, 1): top 53 bits, offset by half an ulp so 0.0 never occurs
_INV53 = 2.0 ** -53


def mix64(x):
    """splitmix64 finalizer; accepts uint64 scalars or arrays."""
    x = np.uint64(x) if np.isscalar(x) else np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = x + GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def derive_key(*parts) -> int:
    """Fold integers and strings into a single 64-bit stream key."""
    k = 0x8C90FD9B1E98D7A5
    for part in parts:
        if isinstance(part, str):
            for b in part.encode():
                k = int(mix64(np.uint64((k ^ b) & _MASK)))
        else:
            k = int(mix64(np.uint64((k ^ (int(part) & _MASK)) & _MASK)))
    return k


def u64(key, counter):
    """Raw 64-bit draw(s) for stream `key` at position(s) `counter`."""
    key = np.uint64(key)
    ctr = np.asarray(counter, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(key + ctr * GOLDEN)


def uniform01(key, counter):
    """Uniform draw(s) in the open interval (0, 1)."""
    bits = u64(key, counter)
    return ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * _INV53


def uniform(key, counter, low=0.0, high=1.0):
    return low + (high - low) * uniform01(key, counter)


def exponential(key, counter, rate=1.0):
    return -np.log(uniform01(key, counter)) / rate


def integers(key, counter, n):
    """Uniform integer draw(s) in [0, n)."""
    return (u64(key, counter) % np.uint64(n)).astype(np.int64)


def normal(key, counter):
    """Standard normal via Box-Muller; consumes counters 2c and 2c+1."""
    ctr = np.asarray(counter, dtype=np.uint64)
    u1 = uniform01(key, 2 * ctr)
    u2 = uniform01(key, 2 * ctr + 1)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
