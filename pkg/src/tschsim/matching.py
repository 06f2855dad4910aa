"""Scheduling bipartite graph and max-weight assignment via the Hungarian method."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .validation import check_weights


class MatchingError(RuntimeError):
    pass


@njit(cache=True)
def _lsap_min(cost):
    """Min-cost assignment of every row of ``cost`` (n <= m) to distinct columns.

    Shortest augmenting path with row/column potentials, O(n^2 m). Rows are
    inserted in ascending order and ties on reduced cost go to the lowest
    column index.
    """
    n, m = cost.shape
    inf = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    p = np.zeros(m + 1, dtype=np.int64)  # p[j]: 1-based row matched to column j
    way = np.zeros(m + 1, dtype=np.int64)
    minv = np.empty(m + 1)
    used = np.empty(m + 1, dtype=np.bool_)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv[:] = inf
        used[:] = False
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = inf
            j1 = -1
            for j in range(1, m + 1):
                if not used[j]:
                    cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    col_of_row = np.empty(n, dtype=np.int64)
    for j in range(1, m + 1):
        if p[j] != 0:
            col_of_row[p[j] - 1] = j - 1
    return col_of_row


def _solve_max(w):
    """Max-weight matching of the smaller side of ``w``; returns (rows, cols)."""
    n, m = w.shape
    if n <= m:
        cols = _lsap_min(np.ascontiguousarray(-w))
        return np.arange(n), cols
    rows = _lsap_min(np.ascontiguousarray(-w.T))
    order = np.argsort(rows, kind="stable")
    return rows[order], np.arange(m)[order]


@dataclass(frozen=True)
class Assignment:
    """Matched (set, cell) pairs.

    From :func:`hungarian_max_weight` the pairs cover the whole padded square;
    from :func:`max_weight_assignment` only real pairs are listed and any
    remaining cells idle.
    """

    sets: np.ndarray
    cells: np.ndarray
    total_weight: float

    def __post_init__(self):
        object.__setattr__(self, "sets", np.asarray(self.sets, dtype=np.int64))
        object.__setattr__(self, "cells", np.asarray(self.cells, dtype=np.int64))
        if self.sets.shape != self.cells.shape or self.sets.ndim != 1:
            raise ValueError("sets and cells must be 1-D arrays of equal length")

    @property
    def pairs(self):
        return list(zip(self.sets.tolist(), self.cells.tolist()))

    def __len__(self):
        return len(self.sets)

    def __contains__(self, pair):
        s, c = pair
        return bool(np.any((self.sets == s) & (self.cells == c)))

    def is_matching(self):
        return (len(np.unique(self.sets)) == len(self.sets)
                and len(np.unique(self.cells)) == len(self.cells))

    def restrict(self, n_sets, n_cells, weights=None):
        """Drop pairs that touch padding vertices."""
        keep = (self.sets < n_sets) & (self.cells < n_cells)
        s, c = self.sets[keep], self.cells[keep]
        order = np.argsort(c, kind="stable")
        s, c = s[order], c[order]
        total = self.total_weight if weights is None else float(np.asarray(weights)[s, c].sum())
        return Assignment(s, c, total)

    @classmethod
    def empty(cls):
        return cls(np.zeros(0, np.int64), np.zeros(0, np.int64), 0.0)


@dataclass
class BipartiteSchedulingGraph:
    """Independent sets (upper side) against slot-frame cells (lower side).

    Cell ``c`` is slot ``c // n_channels`` on channel offset ``c % n_channels``.
    ``weights`` is the zero-padded square matrix; ``core`` the real block.
    """

    weights: np.ndarray
    n_sets: int
    n_slots: int
    n_channels: int

    @property
    def n_cells(self):
        return self.n_slots * self.n_channels

    @property
    def n_edges(self):
        return self.n_sets * self.n_cells

    @property
    def core(self):
        return self.weights[: self.n_sets, : self.n_cells]

    def cell_slot(self):
        return np.arange(self.n_cells) // self.n_channels

    def cell_offset(self):
        return np.arange(self.n_cells) % self.n_channels

    def edge_index(self, s, c):
        return s * self.n_cells + c

    def edge_pair(self, e):
        return divmod(int(e), self.n_cells)


def build_bipartite(catalog, n_slots, n_channels, set_weights):
    """Weight every (set, cell) edge with the set's rate, padded to a square."""
    n_sets = len(catalog) if not isinstance(catalog, int) else catalog
    w = np.asarray(set_weights, dtype=float).reshape(-1)
    if w.shape[0] != n_sets:
        raise ValueError(f"need one weight per catalog entry ({n_sets}), got {w.shape[0]}")
    if not np.isfinite(w).all() or (w < 0).any():
        raise ValueError("set weights must be finite and non-negative")
    n_cells = n_slots * n_channels
    n = max(n_sets, n_cells)
    square = np.zeros((n, n))
    square[:n_sets, :n_cells] = w[:, None]
    return BipartiteSchedulingGraph(square, n_sets, n_slots, n_channels)


def forced_weights(w, force):
    """Copy of ``w`` with ``force`` raised enough to be in every optimum."""
    s, c = force
    w = np.array(w, dtype=float)
    big = 1.0 + max(w.shape) * float(w.max(initial=0.0))
    w[s, c] += big
    return w


def hungarian_max_weight(w, force=None):
    """Maximum-weight perfect matching of a square non-negative matrix.

    ``force=(row, col)`` returns the best perfect matching containing that
    pair.
    """
    w = check_weights(w, square=True)
    solve_on = w if force is None else forced_weights(w, force)
    rows, cols = _solve_max(solve_on)
    a = Assignment(rows, cols, float(w[rows, cols].sum()))
    if force is not None and tuple(force) not in a:
        raise MatchingError(f"forced pair {tuple(force)} missing from the matching")
    return a


def max_weight_assignment(w, force=None):
    """Optimal (set, cell) pairs on a rectangular non-negative weight block.

    Same optimum as padding ``w`` to a square with zeros and calling
    :func:`hungarian_max_weight`, without materializing the padding: the
    smaller side is matched in full and the leftovers are the idle/padding
    pairs. Zero-weight pairs are kept so that every cell of a tall block
    is assigned.
    """
    w = np.asarray(w, dtype=float)
    solve_on = w if force is None else forced_weights(w, force)
    rows, cols = _solve_max(solve_on)
    order = np.argsort(cols, kind="stable")
    rows, cols = rows[order], cols[order]
    a = Assignment(rows, cols, float(w[rows, cols].sum()))
    if force is not None and tuple(force) not in a:
        raise MatchingError(f"forced pair {tuple(force)} missing from the matching")
    return a


def assignment_weight(a, w):
    w = np.asarray(w, dtype=float)
    if len(a) == 0:
        return 0.0
    if w.ndim != 2 or a.sets.max() >= w.shape[0] or a.cells.max() >= w.shape[1] \
            or a.sets.min() < 0 or a.cells.min() < 0:
        raise ValueError(f"assignment indices do not fit a {w.shape} weight matrix")
    return float(w[a.sets, a.cells].sum())
