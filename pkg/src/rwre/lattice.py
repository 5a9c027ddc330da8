"""Torus lattice conventions used across the toolkit.

Fields live on a d-dimensional periodic torus of side L as numpy arrays of
shape (L,)*d; axis a holds coordinate a+1.  The 2d unit directions are
indexed j = 0..2d-1 with axis(j) = j // 2 and sign +1 for even j, -1 for odd
j, so the opposite direction is always j ^ 1.  ``shift(f, j)`` implements the
translation operator (T_k f)(x) = f(x + k_j).
"""

from __future__ import annotations

import numpy as np


def n_dirs(d: int) -> int:
    return 2 * d


def axis_of(j: int) -> int:
    return j >> 1


def sign_of(j: int) -> int:
    return 1 if j % 2 == 0 else -1


def opposite(j: int) -> int:
    return j ^ 1


def step_vectors(d: int) -> np.ndarray:
    """(2d, d) integer steps; row j is the lattice vector of direction j."""
    steps = np.zeros((2 * d, d), dtype=np.int64)
    for a in range(d):
        steps[2 * a, a] = 1
        steps[2 * a + 1, a] = -1
    return steps


def shift(f: np.ndarray, j: int) -> np.ndarray:
    """(T_k f)(x) = f(x + k_j) with periodic wraparound."""
    return np.roll(f, -sign_of(j), axis=axis_of(j))


def shift_by(f: np.ndarray, z) -> np.ndarray:
    """(T_z f)(x) = f(x + z) for an integer lattice vector z."""
    out = f
    for a, za in enumerate(z):
        if za:
            out = np.roll(out, -int(za), axis=a)
    return out


def neighbor_table(d: int, L: int) -> np.ndarray:
    """(2d, N) flat site index of x + k_j, C-order raveled."""
    shape = (L,) * d
    idx = np.arange(L**d, dtype=np.int64).reshape(shape)
    table = np.empty((2 * d, L**d), dtype=np.int64)
    for j in range(2 * d):
        table[j] = shift(idx, j).ravel()
    return table


def site_coords(flat: np.ndarray, d: int, L: int) -> np.ndarray:
    """Coordinates (…, d) of flat C-order site indices."""
    flat = np.asarray(flat)
    coords = np.empty(flat.shape + (d,), dtype=np.int64)
    rem = flat
    for a in range(d - 1, -1, -1):
        coords[..., a] = rem % L
        rem = rem // L
    return coords


def flat_index(coords, d: int, L: int):
    """Inverse of :func:`site_coords` (coordinates may be out of range)."""
    coords = np.asarray(coords) % L
    flat = np.zeros(coords.shape[:-1], dtype=np.int64)
    for a in range(d):
        flat = flat * L + coords[..., a]
    return flat
