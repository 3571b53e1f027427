"""Target-set estimation and GOSPA scoring with a Gaussian-Wasserstein base."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .models import position_matrix, sym_sqrt
from .state import PMBMDensity


@dataclass(frozen=True, eq=False)
class PointEstimate:
    state: np.ndarray
    position: np.ndarray

    @property
    def extent(self):
        return np.zeros((len(self.position), len(self.position)))

    kind = "point"

    def to_dict(self):
        return {"kind": self.kind, "state": np.asarray(self.state).tolist(),
                "position": np.asarray(self.position).tolist()}


@dataclass(frozen=True, eq=False)
class ExtendedEstimate:
    state: np.ndarray
    position: np.ndarray
    extent: np.ndarray

    kind = "extended"

    def to_dict(self):
        return {"kind": self.kind, "state": np.asarray(self.state).tolist(),
                "position": np.asarray(self.position).tolist(),
                "extent": np.asarray(self.extent).tolist()}


TargetEstimate = PointEstimate | ExtendedEstimate


def estimate_from_dict(d):
    if d["kind"] == "point":
        return PointEstimate(np.asarray(d["state"]), np.asarray(d["position"]))
    return ExtendedEstimate(np.asarray(d["state"]), np.asarray(d["position"]),
                            np.asarray(d["extent"]))


@dataclass(frozen=True)
class GospaResult:
    total: float
    localization: float
    missed_cost: float
    false_cost: float
    n_missed: int = 0
    n_false: int = 0


def estimate(post: PMBMDensity, r_thresh=0.5, c_thresh=0.5, H=None) -> list:
    """Targets of the most probable global hypothesis.

    A Bernoulli is reported if its existence exceeds ``r_thresh``; it is a
    point target if its point probability exceeds ``c_thresh``.
    """
    H = position_matrix() if H is None else H
    if not post.globals:
        return []
    out = []
    for _, h in post.selected(post.best_global()):
        if h.existence <= r_thresh:
            continue
        dens = h.density
        if dens.point_prob > c_thresh:
            x = dens.point.mean
            out.append(PointEstimate(x, H @ x))
        else:
            z = dens.extended
            out.append(ExtendedEstimate(z.mean, H @ z.mean, z.expected_extent()))
    return out


def _pos_ext(a):
    if isinstance(a, tuple):
        return np.asarray(a[0], dtype=float), np.asarray(a[1], dtype=float)
    return np.asarray(a.position, dtype=float), np.asarray(a.extent, dtype=float)


def gaussian_wasserstein(a, b) -> float:
    """Gaussian-Wasserstein distance on position and extent.

    ``a`` and ``b`` are estimates, truth objects or ``(position, extent)``
    tuples; point targets have a zero extent.
    """
    pa, Xa = _pos_ext(a)
    pb, Xb = _pos_ext(b)
    d2 = float(np.sum((pa - pb) ** 2))
    if np.any(Xa) or np.any(Xb):
        if not np.any(Xa):
            tr = np.trace(Xb)
        elif not np.any(Xb):
            tr = np.trace(Xa)
        else:
            sA = sym_sqrt(Xa)
            tr = np.trace(Xa + Xb - 2.0 * sym_sqrt(sA @ Xb @ sA))
        d2 += max(float(tr), 0.0)
    return math.sqrt(max(d2, 0.0))


def gospa(estimates, truth, c=10.0, p=2.0, alpha=2.0, dist=gaussian_wasserstein) -> GospaResult:
    """GOSPA (``alpha = 2``) with its localisation / missed / false split."""
    if alpha != 2:
        raise ValueError("only alpha = 2 is supported")
    if not (p >= 1 and c > 0):
        raise ValueError("need p >= 1 and c > 0")
    est, tru = list(estimates), list(truth)
    n_t, n_e = len(tru), len(est)
    half = c ** p / 2.0
    if n_t == 0 or n_e == 0:
        miss, false = half * n_t, half * n_e
        return GospaResult((miss + false) ** (1 / p), 0.0, miss ** (1 / p), false ** (1 / p),
                           n_t, n_e)
    D = np.array([[dist(t, e) for e in est] for t in tru])
    C = np.minimum(D, c) ** p
    if n_t <= n_e:
        rows = np.arange(n_t)
        cols = _kernels.solve_lsap(C)
    else:
        cols = np.arange(n_e)
        rows = _kernels.solve_lsap(C.T)
    d = D[rows, cols]
    good = d < c
    loc = float(np.sum(d[good] ** p))
    n_good = int(good.sum())
    miss = half * (n_t - n_good)
    false = half * (n_e - n_good)
    total = loc + miss + false
    return GospaResult(total ** (1 / p), loc ** (1 / p), miss ** (1 / p), false ** (1 / p),
                       n_t - n_good, n_e - n_good)
