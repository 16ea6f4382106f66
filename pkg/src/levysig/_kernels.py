"""Fused in-place ``x ← x ⊗ exp(v)`` on rows of a flat signature stack.

The Monte Carlo engine applies this once per path and grid cell, so it is
compiled with numba.  Layout: row ``p`` of ``flat`` holds levels 0..L back to
back, level ``n`` starting at ``offsets[n]``.
"""
from __future__ import annotations

import numpy as np
from numba import njit


def level_offsets(A: int, L: int) -> np.ndarray:
    return np.concatenate([[0], np.cumsum([A**n for n in range(L + 1)])]).astype(np.int64)


@njit(cache=True, fastmath=True, nogil=True)
def _mul_exp_rows(flat, rows, V, A, L, offsets):
    size_max = A**L
    buf_a = np.empty(size_max)
    buf_b = np.empty(size_max)
    for r in range(rows.shape[0]):
        x = flat[rows[r]]
        v = V[r]
        for n in range(L, 0, -1):
            # Horner: ((x0/n ⊗ v + x1) ⊗ v / (n-1) + x2) ... + x_n
            acc = buf_a
            nxt = buf_b
            s = x[0] / n
            for a in range(A):
                acc[a] = s * v[a]
            size = A
            for k in range(1, n):
                c = 1.0 / (n - k)
                off = offsets[k]
                for i in range(size):
                    ti = (acc[i] + x[off + i]) * c
                    for a in range(A):
                        nxt[i * A + a] = ti * v[a]
                size *= A
                acc, nxt = nxt, acc
            off = offsets[n]
            for i in range(size):
                x[off + i] += acc[i]


def mul_exp_rows(flat: np.ndarray, rows: np.ndarray, V: np.ndarray, A: int, L: int, offsets: np.ndarray) -> None:
    """In place: ``flat[rows[r]] ← flat[rows[r]] ⊗ exp(V[r])`` truncated at level ``L``."""
    if L == 0 or len(rows) == 0:
        return
    _mul_exp_rows(flat, np.ascontiguousarray(rows, dtype=np.int64), np.ascontiguousarray(V, dtype=float), A, L, offsets)
