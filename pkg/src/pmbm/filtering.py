"""PMBM prediction, update and pruning on the hybrid point / extended space.

Weights are handled in log domain throughout.  The update follows the usual
clustering-based scheme: gate, partition the measurements that gate a
Bernoulli with DBSCAN, build local hypotheses per unique cluster, then rank
global hypotheses per (parent global, partition) with Murty's algorithm.
Measurements gated only by the undetected-target intensity are clustered
once and spawn new Bernoullis shared by every global hypothesis.
"""
from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from .association import (MurtyStream, all_partitions, dbscan_partitions, gaussian_gate,
                          gate_threshold, density_gate, ggiw_gate, unique_subsets)
from .models import (ExtendedMeasModel, GGIWPredictParams, PointMeasModel, PointMotionModel,
                     gamma_merge, gaussian_mixture_moments, ggiw_mixture_merge, ggiw_predict,
                     ggiw_update, kalman_predict, kalman_update, measurement_stats)
from .state import (DegeneratePosteriorError, GGIWParams, GlobalHypothesis, HybridDensity,
                    LocalHypothesis, PMBMDensity, PPPIntensity, Track, normalize_log_weights)

log = logging.getLogger(__name__)

NEG_INF = -math.inf


def _log(x):
    return math.log(x) if x > 0 else NEG_INF


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BirthModel:
    """Birth as a PPP intensity or as a set of birth Bernoullis, never both."""

    ppp: PPPIntensity = field(default_factory=PPPIntensity)
    bernoullis: tuple = ()

    def __post_init__(self):
        bern = tuple((float(r), d) for r, d in self.bernoullis)
        object.__setattr__(self, "bernoullis", bern)
        if bern and len(self.ppp):
            raise ValueError("birth model must be either PPP or multi-Bernoulli")
        for r, _ in bern:
            if not 0.0 <= r <= 1.0:
                raise ValueError("birth existence outside [0, 1]")

    @property
    def mode(self):
        return "multi-bernoulli" if self.bernoullis else "ppp"


@dataclass(frozen=True)
class ClutterModel:
    """Uniform Poisson clutter over an axis-aligned box."""

    rate: float = 8.0
    region: tuple = ((-500.0, 500.0), (-500.0, 500.0))

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("clutter rate must be nonnegative")
        if self.area <= 0:
            raise ValueError("clutter region is degenerate")

    @property
    def area(self):
        return float(np.prod([hi - lo for lo, hi in self.region]))

    def intensity(self, z=None):
        return self.rate / self.area

    @property
    def log_intensity(self):
        return _log(self.rate / self.area)


@dataclass(frozen=True)
class PruneConfig:
    max_globals: Optional[int] = 20
    ppp_weight_min: float = 1e-5
    bernoulli_exist_min: float = 1e-3
    global_weight_min: float = 1e-3

    def __post_init__(self):
        if self.max_globals is not None and self.max_globals < 1:
            raise ValueError("max_globals must be positive")
        if min(self.ppp_weight_min, self.bernoulli_exist_min, self.global_weight_min) < 0:
            raise ValueError("pruning thresholds must be nonnegative")


@dataclass(frozen=True, eq=False)
class FilterConfig:
    """Everything the recursion needs.

    ``gate_prob=None`` switches off gating and, together with
    ``partitions="all"`` and a no-op :class:`PruneConfig`, gives the exact
    single-step posterior (used by the enumeration tests).
    ``pmb=True`` projects onto a single global hypothesis after each update.
    """

    motion: PointMotionModel
    point_meas: PointMeasModel
    ext_meas: ExtendedMeasModel
    birth: BirthModel
    clutter: ClutterModel = field(default_factory=ClutterModel)
    ggiw_params: GGIWPredictParams = field(default_factory=GGIWPredictParams)
    prune: PruneConfig = field(default_factory=PruneConfig)
    gate_prob: Optional[float] = 0.999
    eps_grid: tuple = (0.1, 12.0, 0.1)
    partitions: str = "dbscan"
    pmb: bool = False
    check: bool = False

    def __post_init__(self):
        if self.partitions not in ("dbscan", "all"):
            raise ValueError("partitions must be 'dbscan' or 'all'")


NO_PRUNE = PruneConfig(None, 0.0, 0.0, 0.0)


# ---------------------------------------------------------------------------
# prediction
# ---------------------------------------------------------------------------

def predict_density(dens: HybridDensity, motion, ggiw_params) -> HybridDensity:
    point = None if dens.point is None else kalman_predict(dens.point, motion)
    ext = None if dens.extended is None else ggiw_predict(dens.extended, motion, ggiw_params)
    return HybridDensity(dens.point_prob, point, ext)


def predict(post: PMBMDensity, motion: PointMotionModel, ggiw_params: GGIWPredictParams,
            birth: BirthModel) -> PMBMDensity:
    ps = motion.survival
    tracks = []
    for t in post.tracks:
        hyps = []
        for h in t.hypotheses:
            if h.existence == 0 or h.density is None:
                hyps.append(h)
            else:
                hyps.append(LocalHypothesis(h.log_weight, h.existence * ps,
                                            predict_density(h.density, motion, ggiw_params),
                                            h.history))
        tracks.append(Track(t.id, hyps))

    point = [(ps * w, kalman_predict(g, motion)) for w, g in post.ppp.point if ps * w > 0]
    ext = [(ps * w, ggiw_predict(z, motion, ggiw_params)) for w, z in post.ppp.extended if ps * w > 0]
    point += list(birth.ppp.point)
    ext += list(birth.ppp.extended)

    globs = post.globals
    next_id = post.next_id
    if birth.bernoullis:
        for r, dens in birth.bernoullis:
            tracks.append(Track(next_id, (LocalHypothesis(0.0, r, dens, ()),)))
            next_id += 1
        extra = (0,) * len(birth.bernoullis)
        globs = tuple(GlobalHypothesis(g.weight, g.choice + extra) for g in globs)
    return PMBMDensity(PPPIntensity(point, ext), tracks, globs, post.time + 1, next_id)


# ---------------------------------------------------------------------------
# single-component updates
# ---------------------------------------------------------------------------

def update_ppp_intensity(ppp: PPPIntensity, point_meas: PointMeasModel,
                         ext_meas: ExtendedMeasModel) -> PPPIntensity:
    p1, p2 = point_meas.detection, ext_meas.detection
    point = [((1 - p1) * w, g) for w, g in ppp.point if (1 - p1) * w > 0]
    ext = []
    for w, z in ppp.extended:
        if (1 - p2) * w > 0:
            ext.append(((1 - p2) * w, z))
        w2 = p2 * w * (z.beta / (z.beta + 1.0)) ** z.alpha
        if w2 > 0:
            ext.append((w2, replace(z, beta=z.beta + 1.0)))
    return PPPIntensity(point, ext)


def _misdetect(h, point_meas, ext_meas):
    r = h.existence
    if r == 0:
        return h, 0.0
    dens = h.density
    c = dens.point_prob
    p1, p2 = point_meas.detection, ext_meas.detection
    l_pt = c * (1 - p1)
    l_ext = 0.0
    if dens.extended is not None:
        z = dens.extended
        ext_miss = 1 - p2 + p2 * (z.beta / (z.beta + 1.0)) ** z.alpha
        l_ext = (1 - c) * ext_miss
    l0 = l_pt + l_ext
    if not l0 > 0:
        raise ValueError("misdetection likelihood is zero for every state; "
                         "check the detection probabilities")
    fac = 1 - r + r * l0
    r_new = min(1.0, r * l0 / fac)
    c_new = min(1.0, l_pt / l0)
    ext = None
    if c_new < 1:
        z = dens.extended
        w = (1 - p2) / ext_miss
        if w >= 1:
            ext = z
        elif w <= 0:
            ext = replace(z, beta=z.beta + 1.0)
        else:
            a, b = gamma_merge([(w, z.alpha, z.beta), (1 - w, z.alpha, z.beta + 1.0)])
            ext = GGIWParams(a, b, z.mean, z.cov, z.dof, z.scale)
    new = HybridDensity(c_new, dens.point if c_new > 0 else None, ext)
    lf = math.log(fac)
    return LocalHypothesis(h.log_weight + lf, r_new, new, h.history), lf


def _detect(h, W, Zw, stats, k, point_meas, ext_meas):
    r = h.existence
    if r == 0:
        return None
    dens = h.density
    c = dens.point_prob
    p1, p2 = point_meas.detection, ext_meas.detection
    la = lb = NEG_INF
    g = z = None
    if len(W) == 1 and c > 0 and p1 > 0:
        g, ll = kalman_update(dens.point, Zw[0], point_meas)
        la = math.log(c) + math.log(p1) + ll
    if c < 1 and p2 > 0:
        z, ll = ggiw_update(dens.extended, Zw, ext_meas, stats)
        lb = math.log1p(-c) + math.log(p2) + ll
    ll = np.logaddexp(la, lb)
    if ll == NEG_INF:
        return None
    c_new = math.exp(la - ll) if la > NEG_INF else 0.0
    c_new = min(c_new, 1.0)
    new = HybridDensity(c_new, g if c_new > 0 else None, z if c_new < 1 else None)
    lf = math.log(r) + float(ll)
    hist = h.history + tuple((k, int(j)) for j in W)
    return LocalHypothesis(h.log_weight + lf, 1.0, new, hist), lf


def _new_bernoulli(ppp, W, Zw, stats, k, log_clutter, point_meas, ext_meas,
                   point_ok=None, ext_ok=None):
    """``(hypothesis or None, log weight)``, or ``None`` without any column.

    The hypothesis is ``None`` when only the clutter term contributes.
    """
    n = len(W)
    p1, p2 = point_meas.detection, ext_meas.detection
    a_t, a_d, b_t, b_d = [], [], [], []
    if n == 1 and p1 > 0:
        for q, (w, g) in enumerate(ppp.point):
            if point_ok is None or point_ok[q]:
                g2, ll = kalman_update(g, Zw[0], point_meas)
                a_t.append(math.log(w) + math.log(p1) + ll)
                a_d.append(g2)
    if p2 > 0:
        for q, (w, z) in enumerate(ppp.extended):
            if ext_ok is None or ext_ok[q]:
                z2, ll = ggiw_update(z, Zw, ext_meas, stats)
                b_t.append(math.log(w) + math.log(p2) + ll)
                b_d.append(z2)
    la = float(logsumexp(a_t)) if a_t else NEG_INF
    lb = float(logsumexp(b_t)) if b_t else NEG_INF
    l_w = float(np.logaddexp(la, lb))
    lw = float(np.logaddexp(log_clutter, l_w)) if n == 1 else l_w
    if lw == NEG_INF:
        return None
    hist = tuple((k, int(j)) for j in W)
    if l_w == NEG_INF:
        return None, lw
    r = min(1.0, math.exp(l_w - lw))
    c = min(1.0, math.exp(la - l_w)) if la > NEG_INF else 0.0
    point = ext = None
    if c > 0:
        comps = [(math.exp(t - la), g) for t, g in zip(a_t, a_d)]
        point = gaussian_mixture_moments([cg for cg in comps if cg[0] > 0])
    if c < 1:
        comps = [(math.exp(t - lb), z) for t, z in zip(b_t, b_d)]
        ext = ggiw_mixture_merge([cz for cz in comps if cz[0] > 0])
    return LocalHypothesis(lw, r, HybridDensity(c, point, ext), hist), lw


def bernoulli_misdetect(h: LocalHypothesis, point_meas: PointMeasModel,
                        ext_meas: ExtendedMeasModel) -> LocalHypothesis:
    """Misdetection update of one local hypothesis (weight included)."""
    return _misdetect(h, point_meas, ext_meas)[0]


def bernoulli_detect(h: LocalHypothesis, W, Z, point_meas: PointMeasModel,
                     ext_meas: ExtendedMeasModel, k: int = 0) -> LocalHypothesis:
    """Update of one local hypothesis with the measurement cluster ``W``.

    ``W`` holds row indices into ``Z``.  If the likelihood underflows (or
    the hypothesis cannot exist) the result carries weight zero.
    """
    W = tuple(int(j) for j in W)
    if not W:
        raise ValueError("detection needs a nonempty cluster")
    Zw = np.atleast_2d(np.asarray(Z, dtype=float))[list(W)]
    res = _detect(h, W, Zw, measurement_stats(Zw), k, point_meas, ext_meas)
    if res is None:
        return LocalHypothesis(NEG_INF, 1.0 if h.density is not None else 0.0, h.density,
                               h.history + tuple((k, j) for j in W))
    return res[0]


def new_bernoulli(ppp: PPPIntensity, W, Z, clutter: ClutterModel, point_meas: PointMeasModel,
                  ext_meas: ExtendedMeasModel, k: int = 0) -> LocalHypothesis:
    """Existence hypothesis of the Bernoulli started by cluster ``W``.

    The companion non-existence hypothesis has weight one and is implicit.
    Pure clutter comes back with existence zero and no density; a cluster
    that can be neither clutter nor a new target has weight zero.
    """
    W = tuple(int(j) for j in W)
    if not W:
        raise ValueError("a new Bernoulli needs a nonempty cluster")
    Zw = np.atleast_2d(np.asarray(Z, dtype=float))[list(W)]
    res = _new_bernoulli(ppp, W, Zw, measurement_stats(Zw), k, clutter.log_intensity,
                         point_meas, ext_meas)
    hist = tuple((k, j) for j in W)
    if res is None:
        return LocalHypothesis(NEG_INF, 0.0, None, hist)
    hyp, lw = res
    return hyp if hyp is not None else LocalHypothesis(lw, 0.0, None, hist)


# ---------------------------------------------------------------------------
# update
# ---------------------------------------------------------------------------

def _gate_masks(pred, Z, cfg):
    m = len(Z)
    pm, em = cfg.point_meas, cfg.ext_meas
    hyp_masks = {}
    if cfg.gate_prob is None:
        ones = np.ones(m, dtype=bool)
        for i, t in enumerate(pred.tracks):
            for a, h in enumerate(t.hypotheses):
                if h.existence > 0:
                    hyp_masks[i, a] = ones
        return hyp_masks, [ones] * len(pred.ppp.point), [ones] * len(pred.ppp.extended)
    thr = gate_threshold(cfg.gate_prob, Z.shape[1])
    for i, t in enumerate(pred.tracks):
        for a, h in enumerate(t.hypotheses):
            if h.existence > 0:
                hyp_masks[i, a] = density_gate(h.density, Z, thr, pm, em)
    pt = [gaussian_gate(g, Z, thr, pm) for _, g in pred.ppp.point]
    ex = [ggiw_gate(z, Z, thr, em) for _, z in pred.ppp.extended]
    return hyp_masks, pt, ex


def _partitions(Z, idx, cfg):
    if len(idx) == 0:
        return [()]
    if cfg.partitions == "all":
        return all_partitions(idx)
    return dbscan_partitions(Z[idx], *cfg.eps_grid, indices=idx)


class _Context:
    """Per-update cache of cluster statistics and new-Bernoulli results."""

    def __init__(self, pred, Z, cfg, pt_masks, ext_masks):
        self.pred, self.Z, self.cfg = pred, Z, cfg
        self.pt_masks, self.ext_masks = pt_masks, ext_masks
        self._stats = {}
        self._new = {}

    def cluster(self, s):
        if s not in self._stats:
            Zw = self.Z[list(s)]
            self._stats[s] = (Zw, measurement_stats(Zw))
        return self._stats[s]

    def new_bernoulli(self, s):
        if s in self._new:
            return self._new[s]
        cfg = self.cfg
        Zw, stats = self.cluster(s)
        if len(s) == 1:
            j = s[0]
            point_ok = [bool(m[j]) for m in self.pt_masks]
            ext_ok = [bool(m[j]) for m in self.ext_masks]
            admissible = True
        else:
            point_ok = [False] * len(self.pt_masks)
            ext_ok = [bool(m[list(s)].any()) for m in self.ext_masks]
            # every measurement of the cluster must gate some extended component
            cover = np.zeros(len(s), dtype=bool)
            for m in self.ext_masks:
                cover |= m[list(s)]
            admissible = bool(cover.all())
        res = None
        if admissible:
            res = _new_bernoulli(self.pred.ppp, s, Zw, stats, self.pred.time,
                                 cfg.clutter.log_intensity, cfg.point_meas, cfg.ext_meas,
                                 point_ok, ext_ok)
        self._new[s] = res
        return res


def _associate(pred, ctx, partitions, hyp_masks, max_globals, log_min_ratio):
    """Local hypotheses and ranked global hypotheses for one set of partitions.

    Returns ``(tracks, choices, log_weights)``.
    """
    cfg = ctx.cfg
    k = pred.time
    pm, em = cfg.point_meas, cfg.ext_meas
    subsets = unique_subsets(partitions)

    # prior tracks: misdetection plus one detection hypothesis per admissible cluster
    tracks, miss_idx, miss_lf, det = [], [], [], []
    for i, t in enumerate(pred.tracks):
        hyps, mi, ml, dt = [], [], [], []
        for a, h in enumerate(t.hypotheses):
            mh, lf = _misdetect(h, pm, em)
            mi.append(len(hyps))
            ml.append(lf)
            hyps.append(mh)
            entries = {}
            mask = hyp_masks.get((i, a))
            if mask is not None:
                gated = set(np.flatnonzero(mask).tolist())
                for s in subsets:
                    if not gated.issuperset(s):
                        continue
                    Zw, stats = ctx.cluster(s)
                    res = _detect(h, s, Zw, stats, k, pm, em)
                    if res is not None:
                        entries[s] = (len(hyps), res[1] - lf)
                        hyps.append(res[0])
            dt.append(entries)
        tracks.append(Track(t.id, hyps))
        miss_idx.append(mi)
        miss_lf.append(ml)
        det.append(dt)

    # one potential new Bernoulli per cluster
    new_col = {}
    next_id = pred.next_id
    for s in subsets:
        res = ctx.new_bernoulli(s)
        if res is None:
            continue
        hyp, lw = res
        if hyp is None:
            hyp = LocalHypothesis(lw, 0.0, None, tuple((k, j) for j in s))
        new_col[s] = (len(tracks), lw)
        tracks.append(Track(next_id, (LocalHypothesis(0.0, 0.0, None, ()), hyp)))
        next_id += 1
    n_prior = len(pred.tracks)
    n_tracks = len(tracks)

    # per (parent, partition) Murty streams, merged lazily by global weight
    parent_w = np.array([g.weight for g in pred.globals])
    parent_w = parent_w / parent_w.sum()
    heap, streams = [], []
    for g, glob in enumerate(pred.globals):
        if not parent_w[g] > 0:
            continue
        base0 = math.log(parent_w[g]) + math.fsum(miss_lf[i][a] for i, a in enumerate(glob.choice))
        budget = math.inf if max_globals is None else max(1, math.ceil(max_globals * parent_w[g]))
        for part in partitions:
            cols = [i for i, a in enumerate(glob.choice) if any(s in det[i][a] for s in part)]
            nr, nc = len(part), len(cols)
            cost = np.full((nr, nc + nr), math.inf)
            for r, s in enumerate(part):
                for ci, i in enumerate(cols):
                    e = det[i][glob.choice[i]].get(s)
                    if e is not None:
                        cost[r, ci] = -e[1]
                if s in new_col:
                    cost[r, nc + r] = -new_col[s][1]
            if nr and not np.isfinite(cost).any(axis=1).all():
                continue
            stream = MurtyStream(cost)
            top = stream.peek_cost()
            if not math.isfinite(top):
                continue
            sid = len(streams)
            streams.append([stream, g, part, cols, base0, budget, 0])
            heapq.heappush(heap, (-(base0 - top), sid))

    choices, logws = [], []
    best = None
    while heap and (max_globals is None or len(choices) < max_globals):
        neg, sid = heapq.heappop(heap)
        lw = -neg
        if best is not None and lw < best + log_min_ratio:
            break
        entry = streams[sid]
        stream, g, part, cols, base0, budget, used = entry
        assign, total = next(stream)
        entry[6] = used + 1
        best = lw if best is None else best
        glob = pred.globals[g]
        choice = [miss_idx[i][a] for i, a in enumerate(glob.choice)] + [0] * (n_tracks - n_prior)
        nc = len(cols)
        for r, s in enumerate(part):
            col = assign[r]
            if col < nc:
                i = cols[col]
                choice[i] = det[i][glob.choice[i]][s][0]
            else:
                choice[new_col[s][0]] = 1
        choices.append(tuple(choice))
        logws.append(base0 - total)
        if entry[6] < budget:
            nxt = stream.peek_cost()
            if math.isfinite(nxt):
                heapq.heappush(heap, (-(base0 - nxt), sid))
    return tracks, choices, logws, next_id


def _check_cover(tracks, choices, k, expected):
    expected = set(int(j) for j in expected)
    for choice in choices:
        seen = []
        for t, a in zip(tracks, choice):
            seen.extend(j for tt, j in t.hypotheses[a].history if tt == k)
        if len(seen) != len(set(seen)):
            raise AssertionError("a measurement is assigned twice in one global hypothesis")
        if set(seen) != expected:
            raise AssertionError("global hypothesis does not cover the gated measurements")


def update(pred: PMBMDensity, Z, cfg: FilterConfig, info: Optional[dict] = None) -> PMBMDensity:
    """One measurement update; ``pred.time`` labels the measurements.

    Pass a dict as ``info`` to receive counts of groups, partitions and
    harvested global hypotheses.
    """
    pm = cfg.point_meas
    Z = np.asarray(Z, dtype=float).reshape(-1, pm.H.shape[0])
    k = pred.time
    m = len(Z)
    if cfg.check:
        pred.check()
    hyp_masks, pt_masks, ext_masks = _gate_masks(pred, Z, cfg)
    idx = np.arange(m)
    if cfg.gate_prob is None:
        group1, group2 = idx, idx[:0]
    else:
        bern = np.zeros(m, dtype=bool)
        for mask in hyp_masks.values():
            bern |= mask
        ppp = np.zeros(m, dtype=bool)
        for mask in pt_masks + ext_masks:
            ppp |= mask
        group1, group2 = idx[bern], idx[~bern & ppp]

    ctx = _Context(pred, Z, cfg, pt_masks, ext_masks)
    pc = cfg.prune
    log_min = _log(pc.global_weight_min) if pc.global_weight_min > 0 else NEG_INF
    partitions = _partitions(Z, group1, cfg)
    tracks, choices, logws, next_id = _associate(pred, ctx, partitions, hyp_masks,
                                                 pc.max_globals, log_min)
    if not choices and len(group1):
        singles = (tuple((int(j),) for j in group1),)
        if singles[0] not in partitions:
            log.debug("no feasible association at step %d; retrying with singleton clusters", k)
            partitions = list(singles)
            tracks, choices, logws, next_id = _associate(pred, ctx, partitions, hyp_masks,
                                                         pc.max_globals, log_min)
    if not choices:
        raise DegeneratePosteriorError(f"no feasible global hypothesis at step {k}")
    if cfg.check:
        _check_cover(tracks, choices, k, group1)

    w = normalize_log_weights(logws)
    post = PMBMDensity(update_ppp_intensity(pred.ppp, pm, cfg.ext_meas), tracks,
                       tuple(GlobalHypothesis(wi, c) for wi, c in zip(w, choices)),
                       k, next_id)
    post = prune(post, pc)

    if len(group2):
        post = _spawn_ppp_only(post, ctx, group2, cfg)
    if cfg.pmb:
        from .pmb import pmb_project
        post = pmb_project(post, exist_min=pc.bernoulli_exist_min)
    if info is not None:
        info.update(group1=len(group1), group2=len(group2), discarded=m - len(group1) - len(group2),
                    partitions=len(partitions), globals=len(choices))
    if cfg.check:
        check_invariants(post, k, disjoint=not cfg.pmb)
    return post


def _spawn_ppp_only(post, ctx, group2, cfg):
    """New Bernoullis from the best partition of the PPP-only measurements."""
    Z = ctx.Z
    parts = _partitions(Z, group2, cfg)
    singles = tuple((int(j),) for j in group2)
    if singles not in parts:
        parts = parts + [singles]
    scored = []
    for part in parts:
        res = [ctx.new_bernoulli(s) for s in part]
        if any(r is None for r in res):
            continue
        scored.append((-math.fsum(r[1] for r in res), part, res))
    if not scored:
        return post
    _, part, res = min(scored, key=lambda x: (x[0], x[1]))
    new_tracks = []
    next_id = post.next_id
    for hyp, _ in res:
        if hyp is None or hyp.existence < cfg.prune.bernoulli_exist_min or hyp.existence == 0:
            continue
        new_tracks.append(Track(next_id, (hyp,)))
        next_id += 1
    if not new_tracks:
        return post
    extra = (0,) * len(new_tracks)
    globs = tuple(GlobalHypothesis(g.weight, g.choice + extra) for g in post.globals)
    return replace(post, tracks=post.tracks + tuple(new_tracks), globals=globs, next_id=next_id)


# ---------------------------------------------------------------------------
# pruning
# ---------------------------------------------------------------------------

def prune(post: PMBMDensity, cfg: PruneConfig) -> PMBMDensity:
    ppp = PPPIntensity([(w, g) for w, g in post.ppp.point if w >= cfg.ppp_weight_min],
                       [(w, z) for w, z in post.ppp.extended if w >= cfg.ppp_weight_min])
    w = np.array([g.weight for g in post.globals], dtype=float)
    if not w.sum() > 0:
        raise DegeneratePosteriorError("all global hypothesis weights are zero")
    w = w / w.sum()
    keep = [g for g in range(len(w)) if w[g] >= cfg.global_weight_min]
    if not keep:
        keep = [int(np.argmax(w))]
    if cfg.max_globals is not None and len(keep) > cfg.max_globals:
        keep = sorted(sorted(keep, key=lambda g: (-w[g], g))[:cfg.max_globals])
    globs = [post.globals[g] for g in keep]

    track_keep, remaps = [], []
    for i, t in enumerate(post.tracks):
        used = sorted({g.choice[i] for g in globs})
        rmax = max(t.hypotheses[a].existence for a in used)
        if rmax < cfg.bernoulli_exist_min:
            continue
        track_keep.append(i)
        remaps.append({a: n for n, a in enumerate(used)})
    tracks = tuple(Track(post.tracks[i].id, tuple(post.tracks[i].hypotheses[a] for a in remap))
                   for i, remap in zip(track_keep, remaps))

    merged = {}
    for g, wi in zip(globs, w[keep]):
        choice = tuple(remap[g.choice[i]] for i, remap in zip(track_keep, remaps))
        merged[choice] = merged.get(choice, 0.0) + wi
    total = math.fsum(merged.values())
    new_globs = tuple(GlobalHypothesis(v / total, c) for c, v in merged.items())
    return PMBMDensity(ppp, tracks, new_globs, post.time, post.next_id)


# ---------------------------------------------------------------------------
# invariants
# ---------------------------------------------------------------------------

def _spd(A, what):
    A = np.asarray(A)
    if not np.allclose(A, A.T, rtol=1e-8, atol=1e-8 * (1 + np.abs(A).max())):
        raise AssertionError(f"{what} is not symmetric")
    if np.linalg.eigvalsh(0.5 * (A + A.T))[0] <= 0:
        raise AssertionError(f"{what} is not positive definite")


def _check_density(dens, what):
    if not 0.0 <= dens.point_prob <= 1.0:
        raise AssertionError(f"{what}: point probability out of range")
    if dens.point is not None:
        _spd(dens.point.cov, f"{what}: Gaussian covariance")
    if dens.extended is not None:
        z = dens.extended
        _spd(z.cov, f"{what}: GGIW covariance")
        _spd(z.scale, f"{what}: inverse-Wishart scale")
        if not (z.alpha > 0 and z.beta > 0 and z.dof > 2 * z.d):
            raise AssertionError(f"{what}: invalid GGIW parameters")


def check_invariants(post: PMBMDensity, k: Optional[int] = None, disjoint=True, tol=1e-9):
    """Assert structural invariants of a posterior; returns it unchanged.

    Global weights normalise, probabilities lie in [0, 1], covariance and
    scale matrices are SPD and, with ``disjoint``, no global hypothesis
    assigns a measurement of step ``k`` to two Bernoullis.
    """
    post.check(tol)
    for g in post.globals:
        if not 0.0 <= g.weight <= 1.0 + tol:
            raise AssertionError("global weight outside [0, 1]")
    for w, g in post.ppp.point:
        _spd(g.cov, "PPP Gaussian covariance")
    for w, z in post.ppp.extended:
        _check_density(HybridDensity(0.0, None, z), "PPP component")
    for t in post.tracks:
        for h in t.hypotheses:
            if not 0.0 <= h.existence <= 1.0:
                raise AssertionError(f"track {t.id}: existence out of range")
            if h.density is not None:
                _check_density(h.density, f"track {t.id}")
    if disjoint and k is not None:
        for g in post.globals:
            seen = set()
            for t, a in zip(post.tracks, g.choice):
                js = [j for tt, j in t.hypotheses[a].history if tt == k]
                if seen.intersection(js) or len(js) != len(set(js)):
                    raise AssertionError("measurement used twice in one global hypothesis")
                seen.update(js)
    return post


# ---------------------------------------------------------------------------
# convenience wrapper
# ---------------------------------------------------------------------------

class PMBMFilter:
    """Stateful predict/update loop around a :class:`FilterConfig`."""

    def __init__(self, cfg: FilterConfig, initial: Optional[PMBMDensity] = None):
        self.cfg = cfg
        self.density = initial if initial is not None else PMBMDensity()

    def predict(self):
        c = self.cfg
        self.density = predict(self.density, c.motion, c.ggiw_params, c.birth)
        return self.density

    def update(self, Z, info=None):
        self.density = update(self.density, Z, self.cfg, info)
        return self.density

    def step(self, Z, info=None):
        self.predict()
        return self.update(Z, info)
