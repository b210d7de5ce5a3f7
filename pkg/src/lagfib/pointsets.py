"""Deduplication and set comparison of point clouds by cell hashing."""
from __future__ import annotations

import itertools

import numpy as np


def _cell(p: np.ndarray, radius: float) -> tuple:
    return tuple(np.floor(p / radius).astype(np.int64).tolist())


def _neighbours(cell: tuple):
    for off in itertools.product((-1, 0, 1), repeat=len(cell)):
        yield tuple(c + o for c, o in zip(cell, off))


def dedup(points: np.ndarray, radius: float) -> list[int]:
    """Indices of representatives, scanning in lexicographic order and dropping points
    within ``radius`` (Euclidean) of an earlier representative."""
    points = np.asarray(points, dtype=float)
    if points.shape[0] == 0:
        return []
    # collapse near-identical points first (Newton sends many seeds to one root)
    fine = np.floor(points / (radius * 1e-3)).astype(np.int64)
    _, first = np.unique(fine, axis=0, return_index=True)
    sub = points[first]
    order = first[np.lexsort(sub.T[::-1])]
    grid: dict = {}
    kept: list[int] = []
    for i in order:
        p = points[i]
        c = _cell(p, radius)
        if any(np.linalg.norm(points[j] - p) < radius for nb in _neighbours(c) for j in grid.get(nb, ())):
            continue
        grid.setdefault(c, []).append(int(i))
        kept.append(int(i))
    return kept


def same_set(A: np.ndarray, B: np.ndarray, radius: float) -> bool:
    """Equal size and every point of each set within ``radius`` of a point of the other."""
    A = np.asarray(A, dtype=float).reshape(len(A), -1) if len(A) else np.zeros((0, 1))
    B = np.asarray(B, dtype=float).reshape(len(B), -1) if len(B) else np.zeros((0, 1))
    if A.shape[0] != B.shape[0]:
        return False
    return covered(A, B, radius) and covered(B, A, radius)


def covered(A: np.ndarray, B: np.ndarray, radius: float) -> bool:
    """Every row of A lies within ``radius`` of some row of B."""
    grid: dict = {}
    for j, q in enumerate(B):
        grid.setdefault(_cell(q, radius), []).append(j)
    for p in A:
        c = _cell(p, radius)
        if not any(np.linalg.norm(B[j] - p) < radius for nb in _neighbours(c) for j in grid.get(nb, ())):
            return False
    return True
