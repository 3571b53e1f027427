"""TOML configuration for :class:`~pmbm.sim.ScenarioConfig`.

Sections group the flat fields; every key must belong to its section::

    [scenario]   steps, region, rng_seed, fixed_scenario
    [motion]     tau, q, survival, extent_decay, gamma_forget
    [birth]      point_birth_weight, ext_birth_weight, birth_mean, birth_cov_diag,
                 birth_alpha, birth_beta, birth_dof, birth_scale,
                 mb_existence, mb_point_prob
    [measurement] point_detection, ext_detection, meas_var, clutter_rate
    [filter]     gate_prob, eps_min, eps_max, eps_step, max_globals,
                 ppp_weight_min, bernoulli_exist_min, global_weight_min,
                 r_thresh, c_thresh
    [metric]     gospa_c, gospa_p

``fixed_scenario = "none"`` samples a fresh ground truth per run,
``"reference"`` uses the built-in mixed scene, anything else is a scenario file
path (relative paths resolve against the config file).  ``gate_prob = 0``
disables gating.
"""
from __future__ import annotations

import sys
from dataclasses import replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .sim import REFERENCE_SCENARIO, ScenarioConfig

SECTIONS = {
    "scenario": ("steps", "region", "rng_seed", "fixed_scenario"),
    "motion": ("tau", "q", "survival", "extent_decay", "gamma_forget"),
    "birth": ("point_birth_weight", "ext_birth_weight", "birth_mean", "birth_cov_diag",
              "birth_alpha", "birth_beta", "birth_dof", "birth_scale", "mb_existence",
              "mb_point_prob"),
    "measurement": ("point_detection", "ext_detection", "meas_var", "clutter_rate"),
    "filter": ("gate_prob", "eps_min", "eps_max", "eps_step", "max_globals", "ppp_weight_min",
               "bernoulli_exist_min", "global_weight_min", "r_thresh", "c_thresh"),
    "metric": ("gospa_c", "gospa_p"),
}


def config_from_dict(data, base_dir=None) -> ScenarioConfig:
    kw = {}
    for section, values in data.items():
        if section not in SECTIONS:
            raise ValueError(f"unknown config section [{section}]")
        for key, val in values.items():
            if key not in SECTIONS[section]:
                raise ValueError(f"unknown key {key!r} in [{section}]")
            kw[key] = val
    fixed = kw.get("fixed_scenario", REFERENCE_SCENARIO)
    if isinstance(fixed, str) and fixed.lower() == "none":
        kw["fixed_scenario"] = None
    elif fixed != REFERENCE_SCENARIO and base_dir is not None and not Path(fixed).is_absolute():
        kw["fixed_scenario"] = str(Path(base_dir) / fixed)
    if kw.get("gate_prob") == 0:
        kw["gate_prob"] = None
    for key in ("region", "birth_mean", "birth_cov_diag"):
        if key in kw:
            kw[key] = tuple(tuple(v) if isinstance(v, list) else v for v in kw[key])
    return ScenarioConfig(**kw)


def load_config(path=None) -> ScenarioConfig:
    """Defaults when ``path`` is ``None``."""
    if path is None:
        return ScenarioConfig()
    path = Path(path)
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    return config_from_dict(data, path.parent)


def with_overrides(cfg: ScenarioConfig, **kw) -> ScenarioConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})
