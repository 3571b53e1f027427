"""Command line entry point: ``pmbm {simulate,run,bench,score}``."""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from . import __version__
from .config import load_config, with_overrides
from .records import (read_estimates, read_scenario, write_estimates, write_results,
                      write_scenario, write_summary)
from .sim import (VARIANTS, MonteCarloResult, RunResult, generate_measurements, load_truth,
                  make_filter_config, run_filter, run_monte_carlo, score_run, substream)

log = logging.getLogger("pmbm")


def _out_dir(path):
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def cmd_simulate(args):
    cfg = with_overrides(load_config(args.config), rng_seed=args.seed)
    truth = load_truth(cfg, cfg.rng_seed, 0)
    rng = substream(cfg.rng_seed, 0, 1)
    scans = [generate_measurements(truth.at(k), cfg, rng) for k in range(1, cfg.steps + 1)]
    out = _out_dir(args.out)
    write_scenario(out / "scenario.jsonl", truth, scans)
    log.info("wrote %s (%d steps, %d targets)", out / "scenario.jsonl", cfg.steps, len(truth.targets))
    return 0


def _write_scores(out, variant, truth_steps, estimates, cfg, seconds):
    tot, loc, mis, fal = score_run(truth_steps, estimates, cfg.gospa_c, cfg.gospa_p)
    res = MonteCarloResult(variant, [RunResult(0, tot, loc, mis, fal, seconds)])
    write_results(out / "results.csv", res.table())
    summary = res.summary()
    summary["wall_clock_s"] = seconds
    write_summary(out / "summary.json", {"filters": [summary]})
    return summary


def cmd_run(args):
    cfg = load_config(args.config)
    truth, scans = read_scenario(args.scenario)
    if scans is None:
        raise SystemExit(f"{args.scenario} holds no measurements")
    cfg = with_overrides(cfg, steps=len(scans))
    fcfg = make_filter_config(cfg, args.filter, check=args.check)
    est, secs = run_filter(fcfg, scans, cfg.r_thresh, cfg.c_thresh)
    out = _out_dir(args.out)
    write_estimates(out / "estimates.jsonl", est)
    truth_steps = [truth.at(k) for k in range(1, len(scans) + 1)]
    s = _write_scores(out, args.filter, truth_steps, est, cfg, secs)
    log.info("%s: all-steps RMS-GOSPA %.3f m in %.2f s", args.filter, s["rms_total"], secs)
    return 0


def cmd_score(args):
    cfg = load_config(args.config)
    truth, _ = read_scenario(args.truth)
    est = read_estimates(args.estimates)
    truth_steps = [truth.at(k) for k in range(1, len(est) + 1)]
    s = _write_scores(_out_dir(args.out), "scored", truth_steps, est, cfg, 0.0)
    print(f"RMS-GOSPA {s['rms_total']:.4f} (loc {s['rms_loc']:.4f}, "
          f"missed {s['rms_missed']:.4f}, false {s['rms_false']:.4f})")
    return 0


def cmd_bench(args):
    cfg = with_overrides(load_config(args.config), rng_seed=args.seed)
    filters = args.filter or ["pe-pmbm", "pe-pmb", "e-pmbm"]
    out = _out_dir(args.out)
    summaries = []
    for variant in filters:
        t0 = time.perf_counter()
        res = run_monte_carlo(cfg, variant, args.runs, cfg.rng_seed, args.workers)
        wall = time.perf_counter() - t0
        target = out if len(filters) == 1 else _out_dir(out / variant)
        write_results(target / "results.csv", res.table())
        s = res.summary()
        s["filter_seconds"] = res.seconds
        s["wall_clock_s"] = wall
        summaries.append(s)
        print(f"{variant:8s} rms {s['rms_total']:.3f}  loc {s['rms_loc']:.3f}  "
              f"missed {s['rms_missed']:.3f}  false {s['rms_false']:.3f}  "
              f"({res.seconds:.1f} s filtering)")
    write_summary(out / "summary.json", {"seed": cfg.rng_seed, "runs": args.runs,
                                         "steps": cfg.steps, "filters": summaries})
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="pmbm", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=False):
        sp.add_argument("--config", help="TOML configuration file (defaults if omitted)")
        sp.add_argument("--out", required=True, help="output directory")
        if seed:
            sp.add_argument("--seed", type=int, default=None, help="master seed")

    sp = sub.add_parser("simulate", help="write a scenario with measurements")
    common(sp, seed=True)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("run", help="filter one scenario file")
    common(sp)
    sp.add_argument("--filter", choices=VARIANTS, default="pe-pmbm")
    sp.add_argument("--scenario", required=True, help="scenario JSONL with measurements")
    sp.add_argument("--check", action="store_true", help="assert structural invariants")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("bench", help="Monte Carlo comparison of filter variants")
    common(sp, seed=True)
    sp.add_argument("--filter", choices=VARIANTS, action="append",
                    help="variant to run (repeatable; default pe-pmbm, pe-pmb, e-pmbm)")
    sp.add_argument("--runs", type=int, default=25)
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("score", help="GOSPA between an estimate file and a scenario file")
    common(sp)
    sp.add_argument("--estimates", required=True)
    sp.add_argument("--truth", required=True)
    sp.set_defaults(func=cmd_score)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
