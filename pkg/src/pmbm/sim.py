"""Scenario sampling, measurement generation and Monte Carlo evaluation.

Random streams come from numpy's counter-based Philox generator.  Each run
owns substreams keyed by ``SeedSequence([seed, run, stream])``: stream 0
samples ground truth, stream 1 the measurements.  Every filter variant sees
the same measurements for a given ``(seed, run)``.
"""
from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import stats

from .filtering import (BirthModel, ClutterModel, FilterConfig, PMBMFilter, PruneConfig)
from .metrics import estimate, gospa
from .models import (ExtendedMeasModel, GGIWPredictParams, PointMeasModel, constant_velocity,
                     position_matrix)
from .state import GaussianDensity, GGIWParams, HybridDensity, PPPIntensity

log = logging.getLogger(__name__)

VARIANTS = ("pe-pmbm", "pe-pmb", "pe-mbm", "e-pmbm", "e-pmb")
REFERENCE_SCENARIO = "reference"


@dataclass(frozen=True)
class ScenarioConfig:
    """Scenario, model and filter parameters in one flat record.

    ``fixed_scenario`` selects the ground truth: ``"reference"`` for the built-in
    mixed scene, a path to a scenario JSONL file, or ``None`` to sample a
    fresh truth in every run.
    """

    steps: int = 100
    region: tuple = ((-500.0, 500.0), (-500.0, 500.0))
    rng_seed: int = 0
    fixed_scenario: Optional[str] = REFERENCE_SCENARIO
    # motion
    tau: float = 1.0
    q: float = 0.25
    survival: float = 0.99
    extent_decay: float = 1e9
    gamma_forget: float = 1.0
    # birth
    point_birth_weight: float = 0.03
    ext_birth_weight: float = 0.06
    birth_mean: tuple = (0.0, 0.0, 0.0, 0.0)
    birth_cov_diag: tuple = (200.0 ** 2, 4.0 ** 2, 200.0 ** 2, 4.0 ** 2)
    birth_alpha: float = 40.0
    birth_beta: float = 4.0
    birth_dof: float = 20.0
    birth_scale: float = 200.0
    mb_existence: float = 0.06
    mb_point_prob: float = 1.0 / 3.0
    # measurements and clutter
    point_detection: float = 0.95
    ext_detection: float = 0.95
    meas_var: float = 1.0
    clutter_rate: float = 8.0
    # filter
    gate_prob: Optional[float] = 0.999
    eps_min: float = 0.1
    eps_max: float = 12.0
    eps_step: float = 0.1
    max_globals: int = 20
    ppp_weight_min: float = 1e-5
    bernoulli_exist_min: float = 1e-3
    global_weight_min: float = 1e-3
    r_thresh: float = 0.5
    c_thresh: float = 0.5
    # metric
    gospa_c: float = 10.0
    gospa_p: float = 2.0

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        object.__setattr__(self, "region", tuple(tuple(map(float, r)) for r in self.region))

    # model blocks ----------------------------------------------------------
    def motion(self):
        return constant_velocity(self.tau, self.q, self.survival)

    def point_meas(self):
        return PointMeasModel(position_matrix(), self.meas_var * np.eye(2), self.point_detection)

    def ext_meas(self):
        return ExtendedMeasModel(position_matrix(), self.ext_detection)

    def clutter(self):
        return ClutterModel(self.clutter_rate, self.region)

    def birth_gaussian(self):
        return GaussianDensity(np.array(self.birth_mean), np.diag(self.birth_cov_diag))

    def birth_ggiw(self):
        return GGIWParams(self.birth_alpha, self.birth_beta, np.array(self.birth_mean),
                          np.diag(self.birth_cov_diag), self.birth_dof, self.birth_scale * np.eye(2))


def make_filter_config(cfg: ScenarioConfig, variant: str, check=False) -> FilterConfig:
    """Filter settings for one of the named variants.

    ``e-*`` variants differ from ``pe-*`` only in a zero point birth weight.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown filter variant {variant!r}; choose from {VARIANTS}")
    point_w = 0.0 if variant.startswith("e-") else cfg.point_birth_weight
    if variant == "pe-mbm":
        dens = HybridDensity(cfg.mb_point_prob, cfg.birth_gaussian(), cfg.birth_ggiw())
        birth = BirthModel(bernoullis=((cfg.mb_existence, dens),))
    else:
        point = [(point_w, cfg.birth_gaussian())] if point_w > 0 else []
        ext = [(cfg.ext_birth_weight, cfg.birth_ggiw())] if cfg.ext_birth_weight > 0 else []
        birth = BirthModel(PPPIntensity(point, ext))
    prune = PruneConfig(cfg.max_globals, cfg.ppp_weight_min, cfg.bernoulli_exist_min,
                        cfg.global_weight_min)
    return FilterConfig(
        motion=cfg.motion(), point_meas=cfg.point_meas(), ext_meas=cfg.ext_meas(), birth=birth,
        clutter=cfg.clutter(),
        ggiw_params=GGIWPredictParams(cfg.tau, cfg.extent_decay, cfg.gamma_forget),
        prune=prune, gate_prob=cfg.gate_prob, eps_grid=(cfg.eps_min, cfg.eps_max, cfg.eps_step),
        pmb=variant.endswith("-pmb"), check=check)


# ---------------------------------------------------------------------------
# ground truth
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TruthObject:
    """A target at one step; point targets carry a zero extent."""

    id: int
    kind: str
    state: np.ndarray
    position: np.ndarray
    extent: np.ndarray
    gamma: Optional[float] = None

    def to_dict(self):
        d = {"id": self.id, "kind": self.kind, "state": self.state.tolist(),
             "position": self.position.tolist()}
        if self.kind == "extended":
            d["extent"] = self.extent.tolist()
            d["gamma"] = self.gamma
        return d

    @classmethod
    def from_dict(cls, d):
        state = np.asarray(d["state"], dtype=float)
        pos = np.asarray(d["position"], dtype=float)
        ext = np.asarray(d["extent"], dtype=float) if d["kind"] == "extended" else np.zeros((2, 2))
        return cls(int(d["id"]), d["kind"], state, pos, ext, d.get("gamma"))


@dataclass
class TruthTarget:
    id: int
    kind: str
    birth: int
    states: list
    gamma: Optional[float] = None
    extent: Optional[np.ndarray] = None

    @property
    def death(self):
        """Last step at which the target exists."""
        return self.birth + len(self.states) - 1

    def at(self, k):
        x = np.asarray(self.states[k - self.birth])
        ext = self.extent if self.kind == "extended" else np.zeros((2, 2))
        return TruthObject(self.id, self.kind, x, position_matrix() @ x, ext, self.gamma)


@dataclass
class GroundTruth:
    steps: int
    targets: list = field(default_factory=list)

    def at(self, k):
        return [t.at(k) for t in self.targets if t.birth <= k <= t.death]

    @classmethod
    def from_steps(cls, per_step):
        """Rebuild targets from per-step lists of :class:`TruthObject`."""
        targets = {}
        for k, objs in enumerate(per_step, start=1):
            for o in objs:
                if o.id not in targets:
                    ext = o.extent if o.kind == "extended" else None
                    targets[o.id] = TruthTarget(o.id, o.kind, k, [], o.gamma, ext)
                targets[o.id].states.append(o.state)
        return cls(len(per_step), list(targets.values()))


def _sample_target(cfg, kind, tid, k, rng):
    g = cfg.birth_gaussian()
    x = rng.multivariate_normal(g.mean, g.cov)
    if kind == "point":
        return TruthTarget(tid, kind, k, [x])
    z = cfg.birth_ggiw()
    gamma = rng.gamma(z.alpha, 1.0 / z.beta)
    d = z.d
    X = stats.invwishart.rvs(df=z.dof - d - 1, scale=z.scale, random_state=rng)
    return TruthTarget(tid, kind, k, [x], float(gamma), np.atleast_2d(X))


def sample_ground_truth(cfg: ScenarioConfig, rng: np.random.Generator) -> GroundTruth:
    """Birth/death/motion sampled from the model; extent and rate stay fixed."""
    motion = cfg.motion()
    chol = np.linalg.cholesky(motion.Q + 1e-300 * np.eye(4)) if np.any(motion.Q) else None
    alive, done = [], []
    tid = 0
    total = cfg.point_birth_weight + cfg.ext_birth_weight
    for k in range(1, cfg.steps + 1):
        still = []
        for t in alive:
            if rng.random() < cfg.survival:
                x = motion.F @ t.states[-1]
                if chol is not None:
                    x = x + chol @ rng.standard_normal(4)
                t.states.append(x)
                still.append(t)
            else:
                done.append(t)
        alive = still
        n = rng.poisson(total) if total > 0 else 0
        for _ in range(n):
            kind = "point" if rng.random() < cfg.point_birth_weight / total else "extended"
            alive.append(_sample_target(cfg, kind, tid, k, rng))
            tid += 1
    targets = sorted(done + alive, key=lambda t: t.id)
    return GroundTruth(cfg.steps, targets)


def reference_scenario(cfg: ScenarioConfig, seed: int = 2020) -> GroundTruth:
    """Fixed mixed scene: two extended targets alive over the whole horizon
    and two point targets with births at steps 5 and 10 and deaths at steps
    38 and 60.  Initial states are drawn from the birth densities and
    propagated with the motion model using a fixed seed.
    """
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed])))
    motion = cfg.motion()
    chol = np.linalg.cholesky(motion.Q)
    plan = [("extended", 1, cfg.steps), ("extended", 1, cfg.steps),
            ("point", min(5, cfg.steps), min(38, cfg.steps)),
            ("point", min(10, cfg.steps), min(60, cfg.steps))]
    targets = []
    for tid, (kind, b, d) in enumerate(plan):
        t = _sample_target(cfg, kind, tid, b, rng)
        for _ in range(d - b):
            t.states.append(motion.F @ t.states[-1] + chol @ rng.standard_normal(4))
        targets.append(t)
    return GroundTruth(cfg.steps, targets)


def generate_measurements(truth_k, cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    """One scan: detections of the targets in ``truth_k`` plus clutter, shuffled."""
    out = []
    sd = math.sqrt(cfg.meas_var)
    for o in truth_k:
        if o.kind == "point":
            if rng.random() < cfg.point_detection:
                out.append(o.position + sd * rng.standard_normal(2))
        elif rng.random() < cfg.ext_detection:
            n = rng.poisson(o.gamma)
            if n:
                out.extend(rng.multivariate_normal(o.position, o.extent, size=n))
    n_c = rng.poisson(cfg.clutter_rate) if cfg.clutter_rate > 0 else 0
    if n_c:
        lo = np.array([r[0] for r in cfg.region])
        hi = np.array([r[1] for r in cfg.region])
        out.extend(lo + (hi - lo) * rng.random((n_c, 2)))
    Z = np.array(out, dtype=float).reshape(-1, 2)
    return Z[rng.permutation(len(Z))]


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

def substream(seed, run, stream):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(run), int(stream)])))


def load_truth(cfg: ScenarioConfig, seed, run):
    if cfg.fixed_scenario is None:
        return sample_ground_truth(cfg, substream(seed, run, 0))
    if cfg.fixed_scenario == REFERENCE_SCENARIO:
        return reference_scenario(cfg)
    from .records import read_scenario
    truth, _ = read_scenario(cfg.fixed_scenario)
    return truth


def run_filter(fcfg: FilterConfig, scans, r_thresh=0.5, c_thresh=0.5, on_step=None):
    """Run the filter over a list of scans; returns ``(estimates, seconds)``."""
    filt = PMBMFilter(fcfg)
    out = []
    elapsed = 0.0
    for Z in scans:
        t0 = time.perf_counter()
        post = filt.step(Z)
        est = estimate(post, r_thresh, c_thresh)
        elapsed += time.perf_counter() - t0
        out.append(est)
        if on_step is not None:
            on_step(post)
    return out, elapsed


@dataclass
class RunResult:
    run: int
    total: np.ndarray
    loc: np.ndarray
    missed: np.ndarray
    false: np.ndarray
    seconds: float
    estimates: list = field(default_factory=list, repr=False)


def score_run(truth_steps, estimates, c=10.0, p=2.0):
    res = [gospa(e, t, c, p) for e, t in zip(estimates, truth_steps)]
    return (np.array([r.total for r in res]), np.array([r.localization for r in res]),
            np.array([r.missed_cost for r in res]), np.array([r.false_cost for r in res]))


def run_single(cfg: ScenarioConfig, variant: str, run: int, seed=None, check=False, keep=False):
    seed = cfg.rng_seed if seed is None else seed
    truth = load_truth(cfg, seed, run)
    rng = substream(seed, run, 1)
    truth_steps = [truth.at(k) for k in range(1, cfg.steps + 1)]
    scans = [generate_measurements(t, cfg, rng) for t in truth_steps]
    fcfg = make_filter_config(cfg, variant, check=check)
    try:
        est, secs = run_filter(fcfg, scans, cfg.r_thresh, cfg.c_thresh)
    except Exception as e:
        raise RuntimeError(f"{variant}: run {run} (seed {seed}) failed: {e}") from e
    tot, loc, mis, fal = score_run(truth_steps, est, cfg.gospa_c, cfg.gospa_p)
    return RunResult(run, tot, loc, mis, fal, secs, est if keep else [])


def _run_single_args(args):
    return run_single(*args)


@dataclass
class MonteCarloResult:
    variant: str
    runs: list

    def _stack(self, name):
        return np.array([getattr(r, name) for r in self.runs])

    def rms_per_step(self, name="total"):
        return np.sqrt(np.mean(self._stack(name) ** 2, axis=0))

    def rms_all(self, name="total"):
        return float(np.sqrt(np.mean(self._stack(name) ** 2)))

    @property
    def seconds(self):
        return math.fsum(r.seconds for r in self.runs)

    def table(self):
        """Rows ``(step, rms_total, rms_loc, rms_missed, rms_false)``."""
        cols = [self.rms_per_step(n) for n in ("total", "loc", "missed", "false")]
        return [(k + 1,) + tuple(float(c[k]) for c in cols) for k in range(len(cols[0]))]

    def summary(self):
        return {"filter": self.variant, "runs": len(self.runs),
                "rms_total": self.rms_all("total"), "rms_loc": self.rms_all("loc"),
                "rms_missed": self.rms_all("missed"), "rms_false": self.rms_all("false")}


def run_monte_carlo(cfg: ScenarioConfig, variant: str, runs: int, seed=None, workers=1,
                    check=False) -> MonteCarloResult:
    """Independent runs, reduced in run-index order."""
    seed = cfg.rng_seed if seed is None else seed
    args = [(cfg, variant, r, seed, check) for r in range(runs)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            res = list(pool.map(_run_single_args, args))
    else:
        res = [run_single(*a) for a in args]
    return MonteCarloResult(variant, res)
