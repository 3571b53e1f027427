"""Single-target models: Kalman and GGIW predict/update, mixture reduction.

Marginal likelihoods are returned in log domain and never include detection
probabilities; callers combine them with ``p_D`` themselves.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import digamma, gammaln, polygamma

from .state import GaussianDensity, GGIWParams

LOG_PI = math.log(math.pi)
NEWTON_MAXITER = 100
NEWTON_TOL = 1e-10


class SingularInnovationError(np.linalg.LinAlgError):
    pass


class MergeConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class PointMotionModel:
    F: np.ndarray
    Q: np.ndarray
    survival: float = 0.99

    def __post_init__(self):
        object.__setattr__(self, "F", np.asarray(self.F, dtype=float))
        object.__setattr__(self, "Q", np.asarray(self.Q, dtype=float))
        if not 0.0 <= self.survival <= 1.0:
            raise ValueError("survival probability outside [0, 1]")


@dataclass(frozen=True, eq=False)
class PointMeasModel:
    H: np.ndarray
    R: np.ndarray
    detection: float = 0.95

    def __post_init__(self):
        object.__setattr__(self, "H", np.asarray(self.H, dtype=float))
        object.__setattr__(self, "R", np.asarray(self.R, dtype=float))
        if not 0.0 <= self.detection <= 1.0:
            raise ValueError("detection probability outside [0, 1]")


@dataclass(frozen=True, eq=False)
class ExtendedMeasModel:
    H: np.ndarray
    detection: float = 0.95

    def __post_init__(self):
        object.__setattr__(self, "H", np.asarray(self.H, dtype=float))
        if not 0.0 <= self.detection <= 1.0:
            raise ValueError("detection probability outside [0, 1]")


@dataclass(frozen=True)
class GGIWPredictParams:
    """Extent / rate prediction constants.

    ``extent_decay`` is the temporal decay constant of the inverse-Wishart
    degrees of freedom (``inf`` keeps them fixed) and ``gamma_forget`` the
    forgetting factor applied to both gamma parameters.
    """

    tau: float = 1.0
    extent_decay: float = 1e9
    gamma_forget: float = 1.0

    def __post_init__(self):
        if not self.extent_decay > 0:
            raise ValueError("extent_decay must be positive")
        if not self.gamma_forget >= 1:
            raise ValueError("gamma_forget must be >= 1")


def constant_velocity(tau=1.0, q=0.25, survival=0.99):
    """Nearly-constant velocity model on ``[px, vx, py, vy]``."""
    F1 = np.array([[1.0, tau], [0.0, 1.0]])
    Q1 = q * np.array([[tau ** 3 / 3, tau ** 2 / 2], [tau ** 2 / 2, tau]])
    return PointMotionModel(np.kron(np.eye(2), F1), np.kron(np.eye(2), Q1), survival)


def position_matrix():
    return np.array([[1.0, 0, 0, 0], [0, 0, 1.0, 0]])


def _sym(A):
    return 0.5 * (A + A.T)


def sym_sqrt(A, inverse=False):
    """Symmetric square root (or inverse square root) via eigendecomposition.

    Eigenvalues in ``[-1e-10, 0]`` are clamped to zero; anything more negative
    is treated as a numerical failure.
    """
    w, U = np.linalg.eigh(_sym(A))
    if w[0] < -1e-10:
        raise np.linalg.LinAlgError(f"matrix not positive semidefinite (eigenvalue {w[0]:.3g})")
    w = np.clip(w, 0.0, None)
    if inverse:
        if w[0] <= 0:
            raise np.linalg.LinAlgError("inverse square root of a singular matrix")
        s = 1.0 / np.sqrt(w)
    else:
        s = np.sqrt(w)
    return (U * s) @ U.T


# ---------------------------------------------------------------------------
# Kalman filter
# ---------------------------------------------------------------------------

def kalman_predict(g: GaussianDensity, m: PointMotionModel) -> GaussianDensity:
    F = m.F
    if F.shape[1] != g.mean.shape[0] or m.Q.shape != (F.shape[0], F.shape[0]):
        raise ValueError("dimension mismatch in kalman_predict")
    return GaussianDensity(F @ g.mean, _sym(F @ g.cov @ F.T + m.Q))


def _innovation(mean, cov, H, extra):
    S = _sym(H @ cov @ H.T + extra)
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as e:
        raise SingularInnovationError("innovation covariance is not positive definite") from e
    return S, L


def kalman_update(g: GaussianDensity, z, m) -> tuple[GaussianDensity, float]:
    """Kalman update; returns the posterior and the log marginal likelihood.

    ``m`` is anything with ``H`` and ``R`` attributes.  The likelihood is the
    Gaussian density of ``z`` under ``N(H mean, H cov H^T + R)``.
    """
    H = m.H
    z = np.asarray(z, dtype=float)
    if H.shape[1] != g.mean.shape[0] or z.shape != (H.shape[0],):
        raise ValueError("dimension mismatch in kalman_update")
    S, L = _innovation(g.mean, g.cov, H, m.R)
    eps = z - H @ g.mean
    PHt = g.cov @ H.T
    K = np.linalg.solve(S, PHt.T).T
    mean = g.mean + K @ eps
    cov = _sym(g.cov - K @ S @ K.T)
    u = np.linalg.solve(L, eps)
    n = z.shape[0]
    loglik = -0.5 * (u @ u) - np.log(np.diag(L)).sum() - 0.5 * n * math.log(2 * math.pi)
    return GaussianDensity(mean, cov), float(loglik)


# ---------------------------------------------------------------------------
# GGIW
# ---------------------------------------------------------------------------

def measurement_stats(W):
    """``(count, mean, scatter)`` of a measurement set given as ``(n, d)``."""
    W = np.atleast_2d(np.asarray(W, dtype=float))
    n = W.shape[0]
    if n == 0:
        return 0, None, None
    zbar = W.mean(axis=0)
    D = W - zbar
    return n, zbar, D.T @ D


def _sqrtm2(A):
    # closed form for 2x2 SPD: (A + sqrt(det) I) / sqrt(trace + 2 sqrt(det))
    a, b, d = A[0, 0], 0.5 * (A[0, 1] + A[1, 0]), A[1, 1]
    det = a * d - b * b
    if det <= 0:
        return sym_sqrt(A)
    s = math.sqrt(det)
    t = math.sqrt(a + d + 2.0 * s)
    return np.array([[(a + s) / t, b / t], [b / t, (d + s) / t]])


def _logdet_spd(A):
    if A.shape == (2, 2):
        det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
        if det > 0 and A[0, 0] > 0:
            return math.log(det)
        raise np.linalg.LinAlgError("GGIW scale matrix lost positive definiteness")
    sign, ld = np.linalg.slogdet(A)
    if sign <= 0:
        raise np.linalg.LinAlgError("GGIW scale matrix lost positive definiteness")
    return ld


def _lmvgamma(a, d):
    return 0.25 * d * (d - 1) * LOG_PI + math.fsum(gammaln(a - 0.5 * j) for j in range(d))


def ggiw_update(zeta: GGIWParams, W, m, stats=None) -> tuple[GGIWParams, float]:
    """GGIW update with a measurement set; returns ``(posterior, log_lik)``.

    ``W`` is an ``(n, d)`` array (``n`` may be 0).  ``stats`` optionally
    supplies precomputed :func:`measurement_stats` of ``W``.
    """
    n, zbar, Zs = stats if stats is not None else measurement_stats(W)
    a0, b0 = zeta.alpha, zeta.beta
    if n == 0:
        post = GGIWParams(a0, b0 + 1.0, zeta.mean, zeta.cov, zeta.dof, zeta.scale)
        return post, a0 * math.log(b0 / (b0 + 1.0))

    d = zeta.d
    v0, V0 = zeta.dof, zeta.scale
    if v0 <= 2 * d + 2:
        raise ValueError(f"GGIW update needs dof > {2 * d + 2}, got {v0}")
    H = m.H
    Xhat = V0 / (v0 - 2 * d - 2)
    S, L = _innovation(zeta.mean, zeta.cov, H, Xhat / n)
    eps = zbar - H @ zeta.mean
    PHt = zeta.cov @ H.T
    K = np.linalg.solve(S, PHt.T).T
    mean = zeta.mean + K @ eps
    cov = _sym(zeta.cov - K @ S @ K.T)

    if d == 2:
        sX = _sqrtm2(Xhat)
        sS = _sqrtm2(S)
        a = sX @ np.linalg.solve(sS, eps)
    else:
        a = sym_sqrt(Xhat) @ (sym_sqrt(S, inverse=True) @ eps)
    V = _sym(V0 + np.outer(a, a) + Zs)
    v = v0 + n
    alpha, beta = a0 + n, b0 + 1.0

    ldV0 = _logdet_spd(V0)
    ldV = _logdet_spd(V)
    ldX = _logdet_spd(Xhat)
    ldS = 2.0 * math.log(np.prod(np.diag(L)))
    loglik = (-0.5 * d * (n * LOG_PI + math.log(n))
              + 0.5 * (v0 - d - 1) * ldV0 - 0.5 * (v - d - 1) * ldV
              + _lmvgamma(0.5 * (v - d - 1), d) - _lmvgamma(0.5 * (v0 - d - 1), d)
              + 0.5 * ldX - 0.5 * ldS
              + gammaln(alpha) - gammaln(a0) + a0 * math.log(b0) - alpha * math.log(beta))
    return GGIWParams(alpha, beta, mean, cov, v, V), float(loglik)


def ggiw_predict(zeta: GGIWParams, m: PointMotionModel, p: GGIWPredictParams) -> GGIWParams:
    d = zeta.d
    base = 2 * d + 2
    if zeta.dof <= base:
        raise ValueError(f"GGIW predict needs dof > {base}, got {zeta.dof}")
    kin = kalman_predict(zeta.kinematic, m)
    decay = math.exp(-p.tau / p.extent_decay)
    dof = base + decay * (zeta.dof - base)
    scale = ((dof - base) / (zeta.dof - base)) * zeta.scale
    return GGIWParams(zeta.alpha / p.gamma_forget, zeta.beta / p.gamma_forget,
                      kin.mean, kin.cov, dof, scale)


# ---------------------------------------------------------------------------
# mixture reduction
# ---------------------------------------------------------------------------

def _normalised(weights):
    w = np.asarray(weights, dtype=float)
    if w.size == 0 or np.any(w < 0) or not w.sum() > 0:
        raise ValueError("mixture weights must be nonnegative with positive sum")
    return w / w.sum()


def _solve_log_moment(f, fprime, t0, what):
    """Newton on ``f(t) = 0`` for increasing ``f``, bisection-safeguarded."""
    lo, hi = -math.inf, math.inf
    t = t0
    for _ in range(NEWTON_MAXITER):
        val = f(t)
        if abs(val) < NEWTON_TOL:
            return t
        if val < 0:
            lo = max(lo, t)
        else:
            hi = min(hi, t)
        step = val / fprime(t)
        t_new = t - step
        if not (lo < t_new < hi) or not np.isfinite(t_new):
            if np.isfinite(lo) and np.isfinite(hi):
                t_new = 0.5 * (lo + hi)
            elif np.isfinite(lo):
                t_new = lo + max(1.0, abs(step))
            else:
                t_new = hi - max(1.0, abs(step))
        t = t_new
    raise MergeConvergenceError(f"{what} merge did not converge in {NEWTON_MAXITER} iterations")


def gamma_merge(components):
    """Merge ``(weight, alpha, beta)`` gamma components into one gamma.

    Matches the mixture ``E[gamma]`` exactly and ``E[ln gamma]`` to the Newton
    tolerance.
    """
    comps = sorted((float(w), float(a), float(b)) for w, a, b in components)
    if len(comps) == 1 or all(c[1:] == comps[0][1:] for c in comps):
        return comps[0][1], comps[0][2]
    w = _normalised([c[0] for c in comps])
    al = np.array([c[1] for c in comps])
    be = np.array([c[2] for c in comps])
    mean = math.fsum(w * al / be)
    mean_log = math.fsum(w * (digamma(al) - np.log(be)))
    s = math.log(mean) - mean_log
    if s <= 0:
        # numerically a single gamma; nothing to spread
        i = int(np.argmax(w))
        return al[i], al[i] / mean
    second = math.fsum(w * (al / be ** 2 + (al / be) ** 2))
    var = max(second - mean ** 2, 1e-300)
    t0 = math.log(mean ** 2 / var)
    # ln(alpha) - digamma(alpha) = s, solved in t = ln(alpha); decreasing, so negate
    t = _solve_log_moment(lambda t: s - (t - digamma(math.exp(t))),
                          lambda t: -(1.0 - math.exp(t) * polygamma(1, math.exp(t))),
                          t0, "gamma")
    alpha = math.exp(t)
    return alpha, alpha / mean


def gaussian_mixture_moments(components) -> GaussianDensity:
    comps = list(components)
    if len(comps) == 1:
        return comps[0][1]
    w = _normalised([c[0] for c in comps])
    means = np.array([g.mean for _, g in comps])
    covs = np.array([g.cov for _, g in comps])
    mean = w @ means
    D = means - mean
    cov = np.einsum("i,ijk->jk", w, covs) + np.einsum("i,ij,ik->jk", w, D, D)
    return GaussianDensity(mean, _sym(cov))


def iw_expected_logdet(dof, scale):
    d = scale.shape[0]
    n = dof - d - 1
    j = np.arange(1, d + 1)
    return np.linalg.slogdet(scale)[1] - d * math.log(2.0) - digamma((n - j + 1) / 2.0).sum()


def _iw_merge(weights, dofs, scales):
    d = scales[0].shape[0]
    base = 2 * d + 2
    M = _sym(np.einsum("i,ijk->jk", weights, scales / (dofs - base)[:, None, None]))
    L = math.fsum(w * iw_expected_logdet(v, V) for w, v, V in zip(weights, dofs, scales))
    ldM = np.linalg.slogdet(M)[1]
    j = np.arange(1, d + 1)

    # unknown u = dof - 2d - 2 > 0, solved in t = ln(u); f is increasing in t
    def f(t):
        u = math.exp(t)
        return d * t + ldM - d * math.log(2.0) - digamma((u + d + 2 - j) / 2.0).sum() - L

    def fp(t):
        u = math.exp(t)
        return d - 0.5 * u * polygamma(1, (u + d + 2 - j) / 2.0).sum()

    if ldM - L <= 0:
        i = int(np.argmax(weights))
        return dofs[i], (dofs[i] - base) * M
    t0 = math.log(max(float(weights @ dofs) - base, 1e-3))
    u = math.exp(_solve_log_moment(f, fp, t0, "inverse-Wishart"))
    return u + base, _sym(u * M)


def ggiw_mixture_merge(components) -> GGIWParams:
    """KLD-motivated merge of weighted GGIW components into one GGIW.

    Gamma part via :func:`gamma_merge`, Gaussian part by moment matching,
    inverse-Wishart part matching the mixture ``E[X]`` and ``E[ln|X|]``.
    """
    comps = sorted(((float(w), z) for w, z in components),
                   key=lambda c: (c[0], c[1].alpha, c[1].beta, c[1].dof,
                                  tuple(c[1].mean), tuple(c[1].scale.ravel())))
    if len(comps) == 1:
        return comps[0][1]
    if len({c[1].d for c in comps}) != 1:
        raise ValueError("GGIW components with different extent dimensions")
    first = comps[0][1]
    if all(_same_ggiw(first, z) for _, z in comps[1:]):
        return first
    w = _normalised([c[0] for c in comps])
    alpha, beta = gamma_merge([(wi, z.alpha, z.beta) for wi, (_, z) in zip(w, comps)])
    kin = gaussian_mixture_moments([(wi, z.kinematic) for wi, (_, z) in zip(w, comps)])
    dofs = np.array([z.dof for _, z in comps])
    scales = np.array([z.scale for _, z in comps])
    if np.all(dofs == dofs[0]) and np.all(scales == scales[0]):
        dof, scale = dofs[0], scales[0]
    else:
        dof, scale = _iw_merge(w, dofs, scales)
    return GGIWParams(alpha, beta, kin.mean, kin.cov, dof, scale)


def _same_ggiw(a, b):
    return (a.alpha == b.alpha and a.beta == b.beta and a.dof == b.dof
            and np.array_equal(a.mean, b.mean) and np.array_equal(a.cov, b.cov)
            and np.array_equal(a.scale, b.scale))
