"""Independent brute-force reference implementations used by the tests."""
import itertools
import math

import numpy as np
from scipy import linalg
from scipy.special import gammaln, multigammaln
from scipy.stats import multivariate_normal


# --- assignment --------------------------------------------------------------

def brute_assignments(cost):
    """All finite-cost injective row->column maps, sorted by cost."""
    n, m = cost.shape
    out = []
    for cols in itertools.permutations(range(m), n):
        c = sum(cost[r, cols[r]] for r in range(n))
        if math.isfinite(c):
            out.append((tuple(cols), c))
    out.sort(key=lambda x: x[1])
    return out


# --- connected components ----------------------------------------------------

def bfs_partition(Z, eps):
    n = len(Z)
    seen = [False] * n
    comps = []
    for s in range(n):
        if seen[s]:
            continue
        seen[s] = True
        queue, comp = [s], []
        while queue:
            i = queue.pop()
            comp.append(i)
            for j in range(n):
                if not seen[j] and np.linalg.norm(Z[i] - Z[j]) <= eps:
                    seen[j] = True
                    queue.append(j)
        comps.append(tuple(sorted(comp)))
    return tuple(sorted(comps))


# --- set partitions ----------------------------------------------------------

def set_partitions(items):
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for p in set_partitions(rest):
        yield [[first]] + p
        for i in range(len(p)):
            yield p[:i] + [[first] + p[i]] + p[i + 1:]


# --- GOSPA -------------------------------------------------------------------

def brute_gospa(D, c, p):
    """min over partial matchings of sum d^p + c^p/2 * (unmatched)."""
    n, m = D.shape
    best = math.inf
    for k in range(min(n, m) + 1):
        for rows in itertools.combinations(range(n), k):
            for cols in itertools.permutations(range(m), k):
                v = sum(min(D[r, c_], c) ** p for r, c_ in zip(rows, cols))
                v += c ** p / 2 * (n + m - 2 * k)
                best = min(best, v)
    return best


# --- single-target likelihoods, written independently ------------------------

def kalman_loglik(mean, cov, z, H, R):
    return multivariate_normal.logpdf(z, H @ mean, H @ cov @ H.T + R)


def ggiw_loglik(alpha, beta, mean, cov, dof, scale, W, H):
    """GGIW predictive likelihood of a nonempty set, direct formula."""
    W = np.atleast_2d(W)
    n, d = W.shape
    Xh = scale / (dof - 2 * d - 2)
    zbar = W.mean(0)
    Zs = (W - zbar).T @ (W - zbar)
    S = H @ cov @ H.T + Xh / n
    e = zbar - H @ mean
    Xs = linalg.sqrtm(Xh).real
    Si = linalg.sqrtm(np.linalg.inv(S)).real
    N = Xs @ Si @ np.outer(e, e) @ Si.T @ Xs.T
    V = scale + N + Zs
    v = dof + n
    a2, b2 = alpha + n, beta + 1
    lg = gammaln(a2) - gammaln(alpha) + alpha * math.log(beta) - a2 * math.log(b2)
    liw = (0.5 * (dof - d - 1) * math.log(np.linalg.det(scale))
           - 0.5 * (v - d - 1) * math.log(np.linalg.det(V))
           + multigammaln((v - d - 1) / 2, d) - multigammaln((dof - d - 1) / 2, d))
    lk = (-0.5 * d * n * math.log(math.pi) - 0.5 * d * math.log(n)
          + 0.5 * math.log(np.linalg.det(Xh)) - 0.5 * math.log(np.linalg.det(S)))
    return lg + liw + lk


# --- exhaustive one-step association enumerator -------------------------------

def enumerate_posterior(tracks, ppp_point, ppp_ext, Z, p1, p2, clutter, H, R):
    """Exact one-step posterior by enumerating partitions and associations.

    ``tracks``: list of ``(r, c, (mean, cov) or None, (alpha, beta, mean, cov,
    dof, scale) or None)``, one hypothesis each, single prior global.
    ``ppp_point``: ``[(w, mean, cov)]``; ``ppp_ext``: ``[(w, alpha, beta,
    mean, cov, dof, scale)]``.  Returns ``{key: (weight, track_info)}`` where
    ``key = (tuple of cluster-or-None per prior track, frozenset of new-target
    clusters)`` and ``track_info`` maps each key element to ``(r, c)``.
    """
    m = len(Z)

    def new_target(C):
        Zc = Z[list(C)]
        lp = 0.0
        if len(C) == 1:
            for w, mu, P in ppp_point:
                lp += p1 * w * math.exp(kalman_loglik(mu, P, Zc[0], H, R))
        le = 0.0
        for w, a, b, mu, P, v, V in ppp_ext:
            le += p2 * w * math.exp(ggiw_loglik(a, b, mu, P, v, V, Zc, H))
        lw = lp + le
        weight = (clutter if len(C) == 1 else 0.0) + lw
        r = lw / weight if weight > 0 else 0.0
        c = lp / lw if lw > 0 else 0.0
        return weight, r, c

    def miss(t):
        r, c, g, z = t
        le = (z[1] / (z[1] + 1)) ** z[0] if z is not None else 0.0
        l0 = c * (1 - p1) + (1 - c) * (1 - p2 + p2 * le)
        f = 1 - r + r * l0
        return f, r * l0 / f, c * (1 - p1) / l0

    def detect(t, C):
        r, c, g, z = t
        Zc = Z[list(C)]
        lp = c * p1 * math.exp(kalman_loglik(g[0], g[1], Zc[0], H, R)) if (len(C) == 1 and c > 0) else 0.0
        le = (1 - c) * p2 * math.exp(ggiw_loglik(*z, Zc, H)) if c < 1 else 0.0
        l = lp + le
        return r * l, 1.0, (lp / l if l > 0 else 0.0)

    out = {}
    for part in set_partitions(range(m)):
        part = [tuple(sorted(c)) for c in part]
        nt = len(tracks)
        # each track takes one cluster or none, injectively
        options = [None] + list(range(len(part)))
        for choice in itertools.product(options, repeat=nt):
            used = [x for x in choice if x is not None]
            if len(used) != len(set(used)):
                continue
            w = 1.0
            info = {}
            for i, (t, x) in enumerate(zip(tracks, choice)):
                if x is None:
                    f, r, c = miss(t)
                else:
                    f, r, c = detect(t, part[x])
                w *= f
                info[("track", i)] = (r, c)
            new = []
            for j, C in enumerate(part):
                if j in used:
                    continue
                f, r, c = new_target(C)
                w *= f
                info[C] = (r, c)
                new.append(C)
            if w > 0:
                key = (tuple(None if x is None else part[x] for x in choice), frozenset(new))
                out[key] = (w, info)
    total = sum(v[0] for v in out.values())
    return {k: (w / total, info) for k, (w, info) in out.items()}
