"""Domain types for the hybrid point / extended single-target space.

A target is either a point target (kinematic vector only) or an extended
target (measurement rate, kinematic vector, extent matrix); the two cases are
disjoint.  Single-target densities carry a Gaussian for the point branch and a
gamma Gaussian inverse-Wishart (GGIW) density for the extended branch, mixed
by the probability ``point_prob`` that the target is a point target.

All containers are frozen dataclasses.  Arrays stored inside them are treated
as read-only; operations always build new objects.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import stats


class DegeneratePosteriorError(ValueError):
    """Every global hypothesis ended up with zero weight."""


def _arr(x):
    a = np.array(x, dtype=float)
    a.setflags(write=False)
    return a


# ---------------------------------------------------------------------------
# states
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PointState:
    x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _arr(self.x))


@dataclass(frozen=True, eq=False)
class ExtendedState:
    gamma: float
    x: np.ndarray
    extent: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _arr(self.x))
        object.__setattr__(self, "extent", _arr(self.extent))
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not np.allclose(self.extent, self.extent.T) or np.linalg.eigvalsh(self.extent)[0] <= 0:
            raise ValueError("extent must be symmetric positive definite")


HybridState = PointState | ExtendedState


# ---------------------------------------------------------------------------
# densities
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GaussianDensity:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", _arr(self.mean))
        object.__setattr__(self, "cov", _arr(self.cov))

    @property
    def dim(self):
        return self.mean.shape[0]

    def logpdf(self, x):
        return stats.multivariate_normal.logpdf(x, self.mean, self.cov)

    def to_dict(self):
        return {"mean": self.mean.tolist(), "cov": self.cov.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["mean"], d["cov"])


@dataclass(frozen=True, eq=False)
class GGIWParams:
    """Factorised gamma Gaussian inverse-Wishart parameters.

    The gamma part uses the shape/rate convention (mean ``alpha / beta``).
    The inverse-Wishart part uses ``dof > 2d`` with expected extent
    ``scale / (dof - 2d - 2)``, i.e. a standard inverse-Wishart with
    ``dof - d - 1`` degrees of freedom.
    """

    alpha: float
    beta: float
    mean: np.ndarray
    cov: np.ndarray
    dof: float
    scale: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "dof", float(self.dof))
        object.__setattr__(self, "mean", _arr(self.mean))
        object.__setattr__(self, "cov", _arr(self.cov))
        object.__setattr__(self, "scale", _arr(self.scale))

    @property
    def d(self):
        return self.scale.shape[0]

    @property
    def kinematic(self):
        return GaussianDensity(self.mean, self.cov)

    def expected_extent(self):
        d = self.d
        if self.dof <= 2 * d + 2:
            raise ValueError(f"expected extent undefined for dof={self.dof} <= {2 * d + 2}")
        return self.scale / (self.dof - 2 * d - 2)

    def expected_gamma(self):
        return self.alpha / self.beta

    def is_valid(self, tol=0.0):
        d = self.d
        if not (self.alpha > 0 and self.beta > 0 and self.dof > 2 * d):
            return False
        if not np.allclose(self.scale, self.scale.T, atol=1e-9 * (1 + np.abs(self.scale).max())):
            return False
        return np.linalg.eigvalsh(self.scale)[0] > tol

    def logpdf(self, gamma, x, extent):
        d = self.d
        lg = stats.gamma.logpdf(gamma, self.alpha, scale=1.0 / self.beta)
        lx = stats.multivariate_normal.logpdf(x, self.mean, self.cov)
        if d == 1:
            lX = stats.invgamma.logpdf(np.asarray(extent).reshape(()), (self.dof - 2) / 2,
                                       scale=self.scale[0, 0] / 2)
        else:
            lX = stats.invwishart.logpdf(extent, self.dof - d - 1, self.scale)
        return lg + lx + lX

    def to_dict(self):
        return {"alpha": self.alpha, "beta": self.beta, "mean": self.mean.tolist(),
                "cov": self.cov.tolist(), "dof": self.dof, "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["alpha"], d["beta"], d["mean"], d["cov"], d["dof"], d["scale"])


@dataclass(frozen=True, eq=False)
class HybridDensity:
    """``point_prob * Gaussian + (1 - point_prob) * GGIW`` on the hybrid space.

    A branch whose mixing probability is exactly zero is stored as ``None``.
    """

    point_prob: float
    point: Optional[GaussianDensity] = None
    extended: Optional[GGIWParams] = None

    def __post_init__(self):
        c = float(self.point_prob)
        if not 0.0 <= c <= 1.0:
            raise ValueError(f"point_prob {c} outside [0, 1]")
        object.__setattr__(self, "point_prob", c)
        if c == 0.0:
            object.__setattr__(self, "point", None)
        elif self.point is None:
            raise ValueError("point branch missing while point_prob > 0")
        if c == 1.0:
            object.__setattr__(self, "extended", None)
        elif self.extended is None:
            raise ValueError("extended branch missing while point_prob < 1")

    def logpdf(self, state):
        if isinstance(state, PointState):
            if self.point is None:
                return -math.inf
            return math.log(self.point_prob) + self.point.logpdf(state.x)
        if self.extended is None:
            return -math.inf
        return math.log1p(-self.point_prob) + self.extended.logpdf(state.gamma, state.x, state.extent)

    def to_dict(self):
        return {"point_prob": self.point_prob,
                "point": None if self.point is None else self.point.to_dict(),
                "extended": None if self.extended is None else self.extended.to_dict()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["point_prob"],
                   None if d["point"] is None else GaussianDensity.from_dict(d["point"]),
                   None if d["extended"] is None else GGIWParams.from_dict(d["extended"]))


# kept as the long-form name used across the code base
HybridSingleTargetDensity = HybridDensity


# ---------------------------------------------------------------------------
# hypotheses and the PMBM container
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LocalHypothesis:
    """One association history of a Bernoulli component.

    ``log_weight`` holds the (unnormalised) local hypothesis weight in log
    domain.  ``history`` is an append-only tuple of ``(time, measurement
    index)`` pairs.
    """

    log_weight: float
    existence: float
    density: Optional[HybridDensity]
    history: tuple = ()

    def __post_init__(self):
        r = float(self.existence)
        if not 0.0 <= r <= 1.0:
            raise ValueError(f"existence {r} outside [0, 1]")
        if self.density is None and r > 0:
            raise ValueError("a hypothesis with positive existence needs a density")
        object.__setattr__(self, "existence", r)
        object.__setattr__(self, "log_weight", float(self.log_weight))
        hist = self.history
        if type(hist) is not tuple or (hist and type(hist[-1]) is not tuple):
            object.__setattr__(self, "history", tuple(tuple(p) for p in hist))

    @property
    def weight(self):
        return math.exp(self.log_weight)

    def measurements_at(self, k):
        return frozenset(j for t, j in self.history if t == k)

    def to_dict(self):
        return {"log_weight": self.log_weight, "existence": self.existence,
                "density": None if self.density is None else self.density.to_dict(),
                "history": [list(p) for p in self.history]}

    @classmethod
    def from_dict(cls, d):
        dens = None if d["density"] is None else HybridDensity.from_dict(d["density"])
        return cls(d["log_weight"], d["existence"], dens, tuple(tuple(p) for p in d["history"]))


@dataclass(frozen=True, eq=False)
class Track:
    id: int
    hypotheses: tuple

    def __post_init__(self):
        object.__setattr__(self, "hypotheses", tuple(self.hypotheses))
        if not self.hypotheses:
            raise ValueError("a track needs at least one local hypothesis")


@dataclass(frozen=True, eq=False)
class GlobalHypothesis:
    weight: float
    choice: tuple

    def __post_init__(self):
        object.__setattr__(self, "weight", float(self.weight))
        object.__setattr__(self, "choice", tuple(int(a) for a in self.choice))


@dataclass(frozen=True, eq=False)
class PPPIntensity:
    """Mixture intensity of undetected targets: ``(weight, density)`` pairs."""

    point: tuple = ()
    extended: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "point", tuple((float(w), g) for w, g in self.point))
        object.__setattr__(self, "extended", tuple((float(w), z) for w, z in self.extended))
        for w, _ in self.point + self.extended:
            if not w > 0:
                raise ValueError("PPP component weights must be positive")

    @property
    def expected_point(self):
        return sum(w for w, _ in self.point)

    @property
    def expected_extended(self):
        return sum(w for w, _ in self.extended)

    def __len__(self):
        return len(self.point) + len(self.extended)

    def to_dict(self):
        return {"point": [[w, g.to_dict()] for w, g in self.point],
                "extended": [[w, z.to_dict()] for w, z in self.extended]}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple((w, GaussianDensity.from_dict(g)) for w, g in d["point"]),
                   tuple((w, GGIWParams.from_dict(z)) for w, z in d["extended"]))


@dataclass(frozen=True, eq=False)
class PMBMDensity:
    ppp: PPPIntensity = field(default_factory=PPPIntensity)
    tracks: tuple = ()
    globals: tuple = (GlobalHypothesis(1.0, ()),)
    time: int = 0
    next_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "tracks", tuple(self.tracks))
        object.__setattr__(self, "globals", tuple(self.globals))

    def best_global(self):
        return max(range(len(self.globals)), key=lambda g: self.globals[g].weight)

    def selected(self, g):
        """``(track, local hypothesis)`` pairs picked by global hypothesis ``g``."""
        glob = self.globals[g]
        return [(t, t.hypotheses[a]) for t, a in zip(self.tracks, glob.choice)]

    def check(self, tol=1e-9):
        """Assert the container-level invariants; returns ``self``."""
        total = sum(g.weight for g in self.globals)
        if abs(total - 1.0) > tol:
            raise AssertionError(f"global weights sum to {total}")
        for glob in self.globals:
            if len(glob.choice) != len(self.tracks):
                raise AssertionError("global hypothesis length mismatch")
            for t, a in zip(self.tracks, glob.choice):
                if not 0 <= a < len(t.hypotheses):
                    raise AssertionError(f"track {t.id}: hypothesis index {a} out of range")
        return self

    def to_dict(self):
        return {
            "time": self.time,
            "next_id": self.next_id,
            "ppp": self.ppp.to_dict(),
            "tracks": [{"id": t.id, "hypotheses": [h.to_dict() for h in t.hypotheses]}
                       for t in self.tracks],
            "globals": [{"weight": g.weight, "choice": list(g.choice)} for g in self.globals],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            ppp=PPPIntensity.from_dict(d["ppp"]),
            tracks=tuple(Track(t["id"], tuple(LocalHypothesis.from_dict(h) for h in t["hypotheses"]))
                         for t in d["tracks"]),
            globals=tuple(GlobalHypothesis(g["weight"], tuple(g["choice"])) for g in d["globals"]),
            time=d["time"], next_id=d["next_id"])

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def hybrid_integral(fn, branch=None):
    """Integral of an analytic function on the hybrid space.

    The integral over the hybrid space is the integral over the point branch
    plus the integral over the extended branch.  ``fn`` may be a
    :class:`HybridDensity` (integrates to one), a :class:`PPPIntensity`
    (integrates to the expected number of undetected targets), ``None`` or
    ``0`` (the zero function).  ``branch`` multiplies ``fn`` by the indicator
    of one branch (``"point"`` or ``"extended"``).
    """
    if fn is None or (isinstance(fn, (int, float)) and fn == 0):
        return 0.0
    if isinstance(fn, HybridDensity):
        parts = {"point": fn.point_prob, "extended": 1.0 - fn.point_prob}
    elif isinstance(fn, PPPIntensity):
        parts = {"point": fn.expected_point, "extended": fn.expected_extended}
    else:
        raise TypeError(f"no analytic integral for {type(fn).__name__}")
    if branch is None:
        return parts["point"] + parts["extended"]
    return parts[branch]


def normalize_globals(density: PMBMDensity) -> PMBMDensity:
    """Divide the global hypothesis weights by their sum."""
    w = np.array([g.weight for g in density.globals], dtype=float)
    total = w.sum()
    if not total > 0 or not np.isfinite(total):
        raise DegeneratePosteriorError("all global hypothesis weights are zero")
    globs = tuple(GlobalHypothesis(wi / total, g.choice) for wi, g in zip(w, density.globals))
    return replace(density, globals=globs)


def normalize_log_weights(log_w: Sequence[float]) -> np.ndarray:
    """Max-shifted log-sum-exp normalisation of log weights."""
    lw = np.asarray(log_w, dtype=float)
    if lw.size == 0 or not np.isfinite(lw.max()):
        raise DegeneratePosteriorError("all global hypothesis weights are zero")
    w = np.exp(lw - lw.max())
    return w / w.sum()
