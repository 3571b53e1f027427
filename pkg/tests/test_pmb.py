import math

import numpy as np
import pytest

from pmbm.models import gaussian_mixture_moments, iw_expected_logdet
from pmbm.pmb import marginal_weights, merge_track, pmb_project
from pmbm.state import (GlobalHypothesis, HybridDensity, LocalHypothesis, PMBMDensity,
                        PPPIntensity, Track)

from conftest import random_gaussian, random_ggiw, random_hybrid


def random_pmbm(rng, n_tracks=3, n_hyp=3, n_glob=4):
    tracks = []
    for i in range(n_tracks):
        hyps = [LocalHypothesis(0.0, float(rng.uniform(0, 1)), random_hybrid(rng))
                for _ in range(n_hyp)]
        tracks.append(Track(i, hyps))
    w = rng.uniform(0.1, 1, n_glob)
    w /= w.sum()
    globs = [GlobalHypothesis(wi, tuple(rng.integers(0, n_hyp, n_tracks))) for wi in w]
    ppp = PPPIntensity([(0.1, random_gaussian(rng))], [(0.2, random_ggiw(rng))])
    return PMBMDensity(ppp, tracks, globs, time=3, next_id=n_tracks)


def test_marginal_weights_examples(rng):
    post = random_pmbm(rng)
    for wb in marginal_weights(post):
        assert wb.sum() == pytest.approx(1.0)
    d = random_hybrid(rng)
    t = Track(0, (LocalHypothesis(0, 0.5, d), LocalHypothesis(0, 0.5, d), LocalHypothesis(0, 0.5, d)))
    two = PMBMDensity(PPPIntensity(), (t,), (GlobalHypothesis(0.6, (1,)), GlobalHypothesis(0.4, (2,))))
    np.testing.assert_allclose(marginal_weights(two)[0], [0, 0.6, 0.4])


def test_projection_preserves_ppp_and_count(rng):
    for _ in range(30):
        post = random_pmbm(rng)
        out = pmb_project(post)
        assert out.ppp is post.ppp
        assert len(out.globals) == 1 and out.globals[0].weight == 1.0
        wb = marginal_weights(post)
        expect = [math.fsum(float(w) * h.existence for w, h in zip(wi, t.hypotheses))
                  for wi, t in zip(wb, post.tracks)]
        got = [t.hypotheses[0].existence for t in out.tracks]
        assert got == [e for e in expect if e > 0]
        for t, e in zip(post.tracks, wb):
            rs = [h.existence for h, w in zip(t.hypotheses, e) if w > 0]
        out.check()


def test_projection_moments(rng):
    for _ in range(20):
        post = random_pmbm(rng, n_tracks=1)
        wb = marginal_weights(post)[0]
        t = post.tracks[0]
        h = merge_track(t, wb)
        wr = np.array([w * x.existence for w, x in zip(wb, t.hypotheses)])
        c = np.array([x.density.point_prob for x in t.hypotheses])
        assert h.density.point_prob == pytest.approx((wr * c).sum() / wr.sum(), rel=1e-12)
        bg = wr * c
        if bg.sum() > 0:
            comps = [(b, x.density.point) for b, x in zip(bg, t.hypotheses) if b > 0]
            w = np.array([b for b, _ in comps]) / sum(b for b, _ in comps)
            mean = sum(wi * g.mean for wi, (_, g) in zip(w, comps))
            np.testing.assert_allclose(h.density.point.mean, mean, rtol=1e-12, atol=1e-12)
            cov = sum(wi * (g.cov + np.outer(g.mean - mean, g.mean - mean))
                      for wi, (_, g) in zip(w, comps))
            np.testing.assert_allclose(h.density.point.cov, cov, rtol=1e-12, atol=1e-11)
        bz = wr * (1 - c)
        if bz.sum() > 0:
            comps = [(b, x.density.extended) for b, x in zip(bz, t.hypotheses) if b > 0]
            w = np.array([b for b, _ in comps]) / sum(b for b, _ in comps)
            EX = sum(wi * z.expected_extent() for wi, (_, z) in zip(w, comps))
            np.testing.assert_allclose(h.density.extended.expected_extent(), EX, rtol=1e-10)
            Eg = sum(wi * z.expected_gamma() for wi, (_, z) in zip(w, comps))
            assert h.density.extended.expected_gamma() == pytest.approx(Eg, rel=1e-12)


def test_projection_examples(rng):
    d = random_hybrid(rng, 0.0)
    t = Track(0, (LocalHypothesis(0, 1.0, d), LocalHypothesis(0, 0.0, None)))
    post = PMBMDensity(PPPIntensity(), (t,), (GlobalHypothesis(0.5, (0,)), GlobalHypothesis(0.5, (1,))))
    h = pmb_project(post).tracks[0].hypotheses[0]
    assert h.existence == 0.5 and h.density.extended is d.extended and h.density.point_prob == 0
    # already a PMB: identity
    one = PMBMDensity(PPPIntensity(), (Track(0, (LocalHypothesis(0, 0.7, d),)),),
                      (GlobalHypothesis(1.0, (0,)),))
    assert pmb_project(one).tracks[0].hypotheses[0].density.extended is d.extended
    # zero existence is dropped; low existence dropped on request
    zero = PMBMDensity(PPPIntensity(), (Track(0, (LocalHypothesis(0, 0.0, None),)),),
                       (GlobalHypothesis(1.0, (0,)),))
    assert pmb_project(zero).tracks == ()
    assert pmb_project(one, exist_min=0.8).tracks == ()


def test_existence_is_convex_combination(rng):
    post = random_pmbm(rng, n_tracks=4)
    out = pmb_project(post)
    wb = marginal_weights(post)
    by_id = {t.id: t for t in out.tracks}
    for t, w in zip(post.tracks, wb):
        if t.id not in by_id:
            continue
        rs = [h.existence for h, x in zip(t.hypotheses, w) if x > 0]
        r = by_id[t.id].hypotheses[0].existence
        assert min(rs) - 1e-15 <= r <= max(rs) + 1e-15
