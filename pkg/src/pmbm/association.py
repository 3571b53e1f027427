"""Gating, DBSCAN partitioning and Murty's ranked assignment.

Clusters are sorted tuples of measurement indices and partitions are tuples
of clusters ordered by their smallest member.
"""
from __future__ import annotations

import heapq
import itertools
import math

import numpy as np
from scipy.stats import chi2

from . import _kernels


class InfeasibleAssignmentError(ValueError):
    pass


# ---------------------------------------------------------------------------
# gating
# ---------------------------------------------------------------------------

def mahalanobis_sq(Z, center, S):
    """Squared Mahalanobis distances of the rows of ``Z`` to ``N(center, S)``."""
    D = Z - center
    return np.einsum("ij,ij->i", D, np.linalg.solve(S, D.T).T)


def gate_threshold(gate_prob, d):
    if not 0.0 < gate_prob < 1.0:
        raise ValueError("gate_prob must lie in (0, 1)")
    return chi2.ppf(gate_prob, d)


def density_gate(density, Z, threshold, point_meas, ext_meas):
    """Boolean mask of measurements inside the gate of a hybrid density.

    The density gates a measurement if either of its branches does.  Point
    branch: ``H P H^T + R``.  Extended branch: ``H P H^T + E[X]``.
    """
    mask = np.zeros(len(Z), dtype=bool)
    if len(Z) == 0:
        return mask
    if density.point is not None:
        g = density.point
        H = point_meas.H
        mask |= mahalanobis_sq(Z, H @ g.mean, H @ g.cov @ H.T + point_meas.R) < threshold
    if density.extended is not None:
        mask |= ggiw_gate(density.extended, Z, threshold, ext_meas)
    return mask


def gaussian_gate(g, Z, threshold, point_meas):
    H = point_meas.H
    return mahalanobis_sq(Z, H @ g.mean, H @ g.cov @ H.T + point_meas.R) < threshold


def ggiw_gate(zeta, Z, threshold, ext_meas):
    H = ext_meas.H
    d = zeta.d
    if zeta.dof <= 2 * d + 2:
        return np.ones(len(Z), dtype=bool)
    S = H @ zeta.cov @ H.T + zeta.expected_extent()
    return mahalanobis_sq(Z, H @ zeta.mean, S) < threshold


def gate(pred, Z, gate_prob, point_meas, ext_meas):
    """Split measurement indices into Bernoulli-gated, PPP-only and discarded.

    Returns three sorted integer arrays.
    """
    Z = np.asarray(Z, dtype=float).reshape(-1, point_meas.H.shape[0])
    m = len(Z)
    if m == 0:
        e = np.empty(0, dtype=np.int64)
        return e, e.copy(), e.copy()
    thr = gate_threshold(gate_prob, Z.shape[1])
    bern = np.zeros(m, dtype=bool)
    for track in pred.tracks:
        for h in track.hypotheses:
            if h.existence > 0:
                bern |= density_gate(h.density, Z, thr, point_meas, ext_meas)
    ppp = np.zeros(m, dtype=bool)
    for _, g in pred.ppp.point:
        ppp |= gaussian_gate(g, Z, thr, point_meas)
    for _, z in pred.ppp.extended:
        ppp |= ggiw_gate(z, Z, thr, ext_meas)
    idx = np.arange(m)
    return idx[bern], idx[~bern & ppp], idx[~bern & ~ppp]


# ---------------------------------------------------------------------------
# partitions
# ---------------------------------------------------------------------------

def eps_grid(eps_min, eps_max, eps_step):
    if not (eps_min > 0 and eps_step > 0 and eps_max >= eps_min):
        raise ValueError("need eps_min > 0, eps_step > 0 and eps_max >= eps_min")
    n = int(math.floor((eps_max - eps_min) / eps_step + 1e-9)) + 1
    return eps_min + eps_step * np.arange(n)


def labels_to_partition(labels, indices):
    groups = {}
    for lab, idx in zip(labels, indices):
        groups.setdefault(int(lab), []).append(int(idx))
    return tuple(sorted(tuple(sorted(c)) for c in groups.values()))


def dbscan_partitions(Z, eps_min=0.1, eps_max=12.0, eps_step=0.1, indices=None):
    """Unique DBSCAN partitions (``minPts = 1``) over a grid of thresholds.

    With one point per region allowed, DBSCAN reduces to the connected
    components of the graph linking measurements at distance ``<= eps``.
    ``indices`` relabels the rows of ``Z`` (defaults to ``0..n-1``).
    Partitions are returned in order of first appearance along the grid.
    """
    Z = np.asarray(Z, dtype=float)
    n = len(Z)
    indices = np.arange(n) if indices is None else np.asarray(indices)
    eps = eps_grid(eps_min, eps_max, eps_step)
    if n == 0:
        return []
    labels = _kernels.grid_components(Z.reshape(n, -1), eps)
    seen = set()
    out = []
    for row in labels:
        key = row.tobytes()
        if key in seen:
            continue
        seen.add(key)
        out.append(labels_to_partition(row, indices))
    return out


def all_partitions(indices):
    """Every set partition of ``indices`` (Bell-number many)."""
    items = [int(i) for i in indices]
    if not items:
        return [()]

    def rec(rest):
        if not rest:
            yield []
            return
        first, tail = rest[0], rest[1:]
        for part in rec(tail):
            yield [(first,)] + part
            for i in range(len(part)):
                yield part[:i] + [(first,) + part[i]] + part[i + 1:]

    return [tuple(sorted(tuple(sorted(c)) for c in p)) for p in rec(items)]


def unique_subsets(partitions):
    """Deduplicated clusters across partitions, in order of first appearance."""
    seen = {}
    for part in partitions:
        for cluster in part:
            if cluster not in seen:
                seen[cluster] = len(seen)
    return list(seen)


# ---------------------------------------------------------------------------
# Murty's k-best assignment
# ---------------------------------------------------------------------------

class MurtyStream:
    """Lazily enumerate assignments of a cost matrix in nondecreasing cost.

    Every row is assigned to a distinct column; ``+inf`` marks forbidden
    pairs.  Iterating yields ``(assignment, cost)`` with ``assignment[r]`` the
    column of row ``r``.
    """

    def __init__(self, cost):
        cost = np.asarray(cost, dtype=float)
        if cost.ndim != 2:
            raise ValueError("cost matrix must be 2-D")
        self.cost = cost
        self.n, self.m = cost.shape
        self._heap = []
        self._tick = itertools.count()
        if self.n > self.m:
            return
        root = self._solve((), ())
        if root is not None:
            self._push(root, (), ())

    def _solve(self, forced, excluded):
        n, m = self.n, self.m
        rows_used = {r for r, _ in forced}
        cols_used = {c for _, c in forced}
        free_r = [r for r in range(n) if r not in rows_used]
        free_c = [c for c in range(m) if c not in cols_used]
        assign = np.empty(n, dtype=np.int64)
        for r, c in forced:
            assign[r] = c
        if free_r:
            sub = self.cost[np.ix_(free_r, free_c)].copy()
            rpos = {r: i for i, r in enumerate(free_r)}
            cpos = {c: i for i, c in enumerate(free_c)}
            for r, c in excluded:
                if r in rpos and c in cpos:
                    sub[rpos[r], cpos[c]] = math.inf
            sol = _kernels.solve_lsap(sub)
            if sol is None:
                return None
            for i, r in enumerate(free_r):
                assign[r] = free_c[sol[i]]
        return assign

    def _push(self, assign, forced, excluded):
        total = float(self.cost[np.arange(self.n), assign].sum())
        if not math.isfinite(total):
            return
        heapq.heappush(self._heap, (total, tuple(assign.tolist()), next(self._tick), forced, excluded))

    def peek_cost(self):
        return self._heap[0][0] if self._heap else math.inf

    def __iter__(self):
        return self

    def __next__(self):
        if not self._heap:
            raise StopIteration
        total, assign, _, forced, excluded = heapq.heappop(self._heap)
        forced_rows = {r for r, _ in forced}
        free_r = [r for r in range(self.n) if r not in forced_rows]
        fixed = list(forced)
        for r in free_r:
            child_excl = excluded + ((r, assign[r]),)
            child_forced = tuple(fixed)
            sol = self._solve(child_forced, child_excl)
            if sol is not None:
                self._push(sol, child_forced, child_excl)
            fixed.append((r, assign[r]))
        return assign, total


def murty_kbest(cost, k):
    """The ``k`` lowest-cost assignments, as ``[(assignment, cost), ...]``."""
    if k < 1:
        raise ValueError("k must be positive")
    stream = MurtyStream(cost)
    out = list(itertools.islice(stream, k))
    if not out:
        raise InfeasibleAssignmentError("no finite-cost assignment exists")
    return out
