"""Track-oriented projection of a PMBM density onto a PMB density."""
from __future__ import annotations

import math

import numpy as np

from .models import gaussian_mixture_moments, ggiw_mixture_merge
from .state import GlobalHypothesis, HybridDensity, LocalHypothesis, PMBMDensity, Track


def marginal_weights(post: PMBMDensity) -> list:
    """Per track, the summed weight of the globals selecting each hypothesis."""
    out = [np.zeros(len(t.hypotheses)) for t in post.tracks]
    for g in post.globals:
        for i, a in enumerate(g.choice):
            out[i][a] += g.weight
    return out


def merge_track(track: Track, wbar) -> LocalHypothesis | None:
    """Collapse the hypotheses of one track into a single Bernoulli.

    Returns ``None`` when the merged existence is zero.
    """
    hyps = track.hypotheses
    wr = [float(w) * h.existence for w, h in zip(wbar, hyps)]
    r = math.fsum(wr)
    if not r > 0:
        return None
    point = [(x * h.density.point_prob, h.density.point) for x, h in zip(wr, hyps)
             if x > 0 and h.density.point_prob > 0]
    ext = [(x * (1.0 - h.density.point_prob), h.density.extended) for x, h in zip(wr, hyps)
           if x > 0 and h.density.point_prob < 1]
    c = math.fsum(b for b, _ in point) / r
    c = min(max(c, 0.0), 1.0)
    g = gaussian_mixture_moments(point) if point and c > 0 else None
    z = ggiw_mixture_merge(ext) if ext and c < 1 else None
    # the surviving history is that of the most probable hypothesis
    best = int(np.argmax(wbar))
    return LocalHypothesis(0.0, min(r, 1.0), HybridDensity(c, g, z), hyps[best].history)


def pmb_project(post: PMBMDensity, exist_min: float = 0.0) -> PMBMDensity:
    """PMB approximation with a single global hypothesis.

    The PPP part is passed through untouched.  Bernoullis whose merged
    existence is zero or below ``exist_min`` are dropped.
    """
    wbar = marginal_weights(post)
    tracks = []
    for t, w in zip(post.tracks, wbar):
        h = merge_track(t, w)
        if h is None or h.existence < exist_min:
            continue
        tracks.append(Track(t.id, (h,)))
    glob = GlobalHypothesis(1.0, (0,) * len(tracks))
    return PMBMDensity(post.ppp, tuple(tracks), (glob,), post.time, post.next_id)
