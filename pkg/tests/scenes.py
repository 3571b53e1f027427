"""Random one-step micro-scenes and their comparison with the enumerator."""
import math

import numpy as np

from pmbm.filtering import NO_PRUNE, BirthModel, ClutterModel, FilterConfig, update
from pmbm.models import ExtendedMeasModel, PointMeasModel, constant_velocity, position_matrix
from pmbm.state import (GaussianDensity, GGIWParams, GlobalHypothesis, HybridDensity, LocalHypothesis, PMBMDensity,
                        PPPIntensity, Track)

from oracles import enumerate_posterior

H = position_matrix()
REGION = ((-5.0, 5.0), (-5.0, 5.0))


def _spd(rng, n, lo, hi):
    A = rng.normal(size=(n, n))
    return A @ A.T * rng.uniform(lo, hi) / n + rng.uniform(lo, hi) * np.eye(n)


def _ggiw(rng):
    return GGIWParams(rng.uniform(3, 30), rng.uniform(0.5, 5), rng.normal(0, 2, 4),
                      _spd(rng, 4, 0.5, 4), rng.uniform(7, 30), _spd(rng, 2, 5, 30))


def _gauss(rng):
    return GaussianDensity(rng.normal(0, 2, 4), _spd(rng, 4, 0.5, 4))


def micro_scene(rng, n_tracks=None, n_meas=None, point_only=False):
    n_tracks = rng.integers(0, 2) if n_tracks is None else n_tracks
    m = rng.integers(0, 4) if n_meas is None else n_meas
    p1, p2 = rng.uniform(0.3, 0.99, 2)
    pm = PointMeasModel(H, np.eye(2) * rng.uniform(0.5, 2), p1)
    em = ExtendedMeasModel(H, p2)
    clutter = ClutterModel(rng.uniform(0.01, 2.0), REGION)
    tracks = []
    for i in range(n_tracks):
        if point_only:
            c = 1.0
        else:
            c = float(rng.choice([0.0, 1.0, rng.uniform(0.05, 0.95)]))
        dens = HybridDensity(c, _gauss(rng) if c > 0 else None, _ggiw(rng) if c < 1 else None)
        tracks.append(Track(i, (LocalHypothesis(0.0, rng.uniform(0.1, 1.0), dens),)))
    n_pt = rng.integers(0, 3) if not point_only else rng.integers(1, 3)
    n_ex = 0 if point_only else rng.integers(0, 3)
    ppp = PPPIntensity([(rng.uniform(0.01, 0.5), _gauss(rng)) for _ in range(n_pt)],
                       [(rng.uniform(0.01, 0.5), _ggiw(rng)) for _ in range(n_ex)])
    Z = rng.normal(0, 2.5, (m, 2))
    globs = (GlobalHypothesis(1.0, (0,) * n_tracks),)
    pred = PMBMDensity(ppp, tracks, globs, time=1, next_id=n_tracks)
    cfg = FilterConfig(constant_velocity(), pm, em, BirthModel(), clutter, prune=NO_PRUNE,
                       gate_prob=None, partitions="all", check=True)
    return pred, Z, cfg


def _as_tuples(pred):
    tr = []
    for t in pred.tracks:
        h = t.hypotheses[0]
        d = h.density
        g = None if d.point is None else (d.point.mean, d.point.cov)
        z = None if d.extended is None else (d.extended.alpha, d.extended.beta, d.extended.mean,
                                             d.extended.cov, d.extended.dof, d.extended.scale)
        tr.append((h.existence, d.point_prob, g, z))
    pt = [(w, g.mean, g.cov) for w, g in pred.ppp.point]
    ex = [(w, z.alpha, z.beta, z.mean, z.cov, z.dof, z.scale) for w, z in pred.ppp.extended]
    return tr, pt, ex


def posterior_table(post, n_prior, k):
    """``{key: (weight, info)}`` in the enumerator's format."""
    out = {}
    for g in post.globals:
        prior, new, info = [], [], {}
        for i, (t, a) in enumerate(zip(post.tracks, g.choice)):
            h = t.hypotheses[a]
            js = tuple(sorted(j for tt, j in h.history if tt == k))
            if i < n_prior:
                prior.append(js or None)
                info[("track", i)] = (h.existence, h.density.point_prob if h.density else 0.0)
            elif js:
                new.append(js)
                info[js] = (h.existence, h.density.point_prob if h.density else 0.0)
        out[(tuple(prior), frozenset(new))] = (g.weight, info)
    return out


def compare_scene(pred, Z, cfg, rtol=1e-10):
    """Largest relative discrepancy between ``update`` and the enumerator."""
    post = update(pred, Z, cfg)
    got = posterior_table(post, len(pred.tracks), pred.time)
    tr, pt, ex = _as_tuples(pred)
    ref = enumerate_posterior(tr, pt, ex, Z, cfg.point_meas.detection, cfg.ext_meas.detection,
                              cfg.clutter.intensity(), H, cfg.point_meas.R)
    floor = 1e-250
    keys_got = {k for k, v in got.items() if v[0] > floor}
    keys_ref = {k for k, v in ref.items() if v[0] > floor}
    if keys_got != keys_ref:
        return math.inf, f"hypothesis sets differ: {keys_got ^ keys_ref}"
    worst = 0.0
    for key in keys_ref:
        wg, ig = got[key]
        wr, ir = ref[key]
        worst = max(worst, abs(wg - wr) / wr)
        for name, (r_ref, c_ref) in ir.items():
            r_got, c_got = ig[name]
            worst = max(worst, _rel(r_got, r_ref))
            if r_ref > 0:
                worst = max(worst, _rel(c_got, c_ref))
    return worst, ""


def _rel(a, b):
    if b == 0:
        return abs(a)
    return abs(a - b) / abs(b)
