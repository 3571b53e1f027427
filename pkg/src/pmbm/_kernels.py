"""Hot numeric kernels with a numba path and a pure numpy/scipy fallback.

The backend is picked at import time from the ``PMBM_DISABLE_NUMBA``
environment variable (any of ``1``, ``true``, ``yes``) and can be switched
at runtime with :func:`set_backend`.  Both backends implement the same
contracts:

``solve_lsap(cost)``
    Rectangular linear sum assignment (rows <= cols).  ``cost`` may contain
    ``+inf`` for forbidden pairs.  Returns the column chosen for every row,
    or ``None`` when no finite assignment exists.

``grid_components(points, eps)``
    For each threshold in ``eps`` the connected components of the graph that
    links points at Euclidean distance ``<= eps``.  Labels are canonical:
    components are numbered in order of their smallest member.
"""
import os

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse.csgraph import connected_components

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

_DISABLED = os.environ.get("PMBM_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")
_backend = "numba" if HAVE_NUMBA and not _DISABLED else "numpy"


def get_backend():
    return _backend


def set_backend(name):
    """Select ``"numba"`` or ``"numpy"`` kernels; returns the previous name."""
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    prev, _backend = _backend, name
    return prev


# ---------------------------------------------------------------------------
# numpy / scipy path
# ---------------------------------------------------------------------------

def _lsap_numpy(cost):
    try:
        rows, cols = linear_sum_assignment(cost)
    except ValueError:
        return None
    out = np.empty(cost.shape[0], dtype=np.int64)
    out[rows] = cols
    if not np.all(np.isfinite(cost[rows, cols])):
        return None
    return out


def _canonical(labels):
    out = np.empty_like(labels)
    mapping = {}
    for i, lab in enumerate(labels):
        if lab not in mapping:
            mapping[lab] = len(mapping)
        out[i] = mapping[lab]
    return out


def _grid_components_numpy(points, eps):
    n = points.shape[0]
    out = np.empty((len(eps), n), dtype=np.int64)
    if n == 0:
        return out
    diff = points[:, None, :] - points[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    iu = np.triu_indices(n, 1)
    edge_d = np.sort(dist[iu])
    # the component structure only changes when another edge enters the graph
    counts = np.searchsorted(edge_d, eps, side="right")
    cache = {}
    for e, cnt in enumerate(counts):
        if cnt not in cache:
            adj = dist <= eps[e]
            _, labels = connected_components(adj, directed=False)
            cache[cnt] = _canonical(labels)
        out[e] = cache[cnt]
    return out


# ---------------------------------------------------------------------------
# numba path
# ---------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def _lsap_jit(cost):
        # shortest augmenting path (Jonker-Volgenant / Crouse); nr <= nc
        nr, nc = cost.shape
        u = np.zeros(nr)
        v = np.zeros(nc)
        spc = np.empty(nc)
        path = np.full(nc, -1, dtype=np.int64)
        col4row = np.full(nr, -1, dtype=np.int64)
        row4col = np.full(nc, -1, dtype=np.int64)
        sr = np.zeros(nr, dtype=np.bool_)
        sc = np.zeros(nc, dtype=np.bool_)
        remaining = np.empty(nc, dtype=np.int64)
        for cur in range(nr):
            min_val = 0.0
            i = cur
            num_rem = nc
            for it in range(nc):
                remaining[it] = nc - it - 1
            sr[:] = False
            sc[:] = False
            spc[:] = np.inf
            sink = -1
            while sink == -1:
                index = -1
                lowest = np.inf
                sr[i] = True
                for it in range(num_rem):
                    j = remaining[it]
                    r = min_val + cost[i, j] - u[i] - v[j]
                    if r < spc[j]:
                        path[j] = i
                        spc[j] = r
                    if spc[j] < lowest or (spc[j] == lowest and row4col[j] == -1):
                        lowest = spc[j]
                        index = it
                min_val = lowest
                if min_val == np.inf:
                    return col4row, False
                j = remaining[index]
                if row4col[j] == -1:
                    sink = j
                else:
                    i = row4col[j]
                sc[j] = True
                num_rem -= 1
                remaining[index] = remaining[num_rem]
            u[cur] += min_val
            for i in range(nr):
                if sr[i] and i != cur:
                    u[i] += min_val - spc[col4row[i]]
            for j in range(nc):
                if sc[j]:
                    v[j] -= min_val - spc[j]
            j = sink
            while True:
                i = path[j]
                row4col[j] = i
                tmp = col4row[i]
                col4row[i] = j
                j = tmp
                if i == cur:
                    break
        return col4row, True

    @njit(cache=True)
    def _find(parent, i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    @njit(cache=True)
    def _grid_components_jit(points, eps):
        n = points.shape[0]
        n_eps = eps.shape[0]
        out = np.empty((n_eps, n), dtype=np.int64)
        n_edges = n * (n - 1) // 2
        ed = np.empty(n_edges)
        ea = np.empty(n_edges, dtype=np.int64)
        eb = np.empty(n_edges, dtype=np.int64)
        k = 0
        for a in range(n):
            for b in range(a + 1, n):
                s = 0.0
                for c in range(points.shape[1]):
                    t = points[a, c] - points[b, c]
                    s += t * t
                ed[k] = np.sqrt(s)
                ea[k] = a
                eb[k] = b
                k += 1
        order = np.argsort(ed, kind="mergesort")
        parent = np.arange(n)
        root_label = np.empty(n, dtype=np.int64)
        nxt = 0
        for e in range(n_eps):
            while nxt < n_edges and ed[order[nxt]] <= eps[e]:
                ra = _find(parent, ea[order[nxt]])
                rb = _find(parent, eb[order[nxt]])
                if ra != rb:
                    if ra < rb:
                        parent[rb] = ra
                    else:
                        parent[ra] = rb
                nxt += 1
            root_label[:] = -1
            lab = 0
            for i in range(n):
                r = _find(parent, i)
                if root_label[r] == -1:
                    root_label[r] = lab
                    lab += 1
                out[e, i] = root_label[r]
        return out


def solve_lsap(cost):
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    if cost.shape[0] == 0:
        return np.empty(0, dtype=np.int64)
    if cost.shape[0] > cost.shape[1]:
        raise ValueError("solve_lsap needs rows <= cols")
    if _backend == "numba":
        cols, ok = _lsap_jit(cost)
        return cols if ok else None
    return _lsap_numpy(cost)


def grid_components(points, eps):
    points = np.ascontiguousarray(points, dtype=np.float64)
    eps = np.ascontiguousarray(eps, dtype=np.float64)
    if _backend == "numba":
        return _grid_components_jit(points, eps)
    return _grid_components_numpy(points, eps)
