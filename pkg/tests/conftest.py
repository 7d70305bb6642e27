"""Shared helpers for the test suite: point pools, streams, brute-force MIS."""

from __future__ import annotations

import random

import numpy as np
import pytest

from dynclust.metric import DELETE, INSERT, MatrixOracle, UpdateOp


def random_points(n: int, seed: int, dim: int = 2) -> list[tuple]:
    rng = random.Random(seed)
    return [tuple(rng.random() for _ in range(dim)) for _ in range(n)]


def distance_matrix(points: list[tuple]) -> list[list[float]]:
    arr = np.asarray(points, dtype=float)
    diff = arr[:, None, :] - arr[None, :, :]
    return np.sqrt((diff * diff).sum(axis=2)).tolist()


def churn_stream(pool_size: int, updates: int, seed: int,
                 insert_bias: float = 0.55):
    """Insert/delete churn over integer ids [0, pool_size); yields UpdateOps."""
    rng = random.Random(seed)
    active: list[int] = []
    free = list(range(pool_size))
    ops = []
    for _ in range(updates):
        do_insert = free and (not active or rng.random() < insert_bias)
        if do_insert:
            pid = free.pop(rng.randrange(len(free)))
            ops.append(UpdateOp(INSERT, pid))
            active.append(pid)
        else:
            pid = active.pop(rng.randrange(len(active)))
            ops.append(UpdateOp(DELETE, pid))
            free.append(pid)
    return ops


class BitsetLfmis:
    """Brute-force top-cap LFMIS over a fixed pool, adjacency as bit masks."""

    def __init__(self, dmat: list[list[float]], r: float):
        n = len(dmat)
        self.masks = []
        for i in range(n):
            m = 0
            row = dmat[i]
            for j in range(n):
                if j != i and row[j] <= r:
                    m |= 1 << j
            self.masks.append(m)

    def top(self, ranked_active: list[tuple[int, int]], cap: int) -> list[int]:
        """ranked_active: (rank, slot) pairs sorted ascending by rank."""
        killed = 0
        out = []
        for _, slot in ranked_active:
            if not (killed >> slot) & 1:
                out.append(slot)
                killed |= self.masks[slot] | (1 << slot)
                if len(out) == cap:
                    break
        return out


@pytest.fixture
def line4_oracle():
    """The 4-point line {0, 1, 100, 101} under l1=l2 on one axis."""
    pts = [(0.0,), (1.0,), (100.0,), (101.0,)]
    dmat = [[abs(a[0] - b[0]) for b in pts] for a in pts]
    return MatrixOracle(dmat)
