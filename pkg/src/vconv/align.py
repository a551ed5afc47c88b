"""Dynamic time warping over feature-vector sequences.

Monotone alignment with unit steps (1,1), (1,0), (0,1), Euclidean local
distance, endpoints pinned at both ends.  Ties during backtrace resolve
diagonal first, then the A-advance step, then the B-advance step, so the
path is a deterministic function of the inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist


class StaleAlignmentError(IndexError):
    """An alignment was applied to sequences it was not computed from."""


@dataclass
class DtwAlignment:
    path: list  # (i, j) index pairs, both coordinates non-decreasing
    total_cost: float  # sum of local distances over the path cells


def dtw_align(seq_a, seq_b) -> DtwAlignment:
    """Align two (frames, dims) arrays / vector lists of equal dimension."""
    a = np.atleast_2d(np.asarray(seq_a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(seq_b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise ValueError("cannot align an empty sequence")
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    n, m = a.shape[0], b.shape[0]

    local = cdist(a, b)
    acc = np.empty((n, m))
    # edge cells accumulate in path order so costs match a step-by-step sum
    acc[0, :] = np.cumsum(local[0, :])
    acc[:, 0] = np.cumsum(local[:, 0])
    for i in range(1, n):
        row = acc[i]
        prev = acc[i - 1]
        for j in range(1, m):
            row[j] = local[i, j] + min(prev[j - 1], prev[j], row[j - 1])

    path = [(n - 1, m - 1)]
    i, j = n - 1, m - 1
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            best = min(acc[i - 1, j - 1], acc[i - 1, j], acc[i, j - 1])
            if acc[i - 1, j - 1] == best:
                i, j = i - 1, j - 1
            elif acc[i - 1, j] == best:
                i -= 1
            else:
                j -= 1
        path.append((i, j))
    path.reverse()
    return DtwAlignment(path=path, total_cost=float(acc[n - 1, m - 1]))


def pair_frames(alignment: DtwAlignment, seq_a, seq_b) -> list:
    """One (a_i, b_j) pair per path cell, in path order."""
    a = np.atleast_2d(np.asarray(seq_a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(seq_b, dtype=np.float64))
    idx = np.asarray(alignment.path, dtype=np.intp)
    if idx[:, 0].max() >= a.shape[0] or idx[:, 1].max() >= b.shape[0]:
        raise StaleAlignmentError(
            f"path indexes up to ({idx[:, 0].max()}, {idx[:, 1].max()}) but "
            f"sequences have {a.shape[0]} and {b.shape[0]} frames")
    return [(a[i], b[j]) for i, j in idx]
