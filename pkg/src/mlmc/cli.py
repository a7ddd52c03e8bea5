"""Command-line entry point ``mlmc``.

Exit codes: 0 success, 2 configuration error, 3 state cap exceeded,
4 an enabled bound check failed.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import _accel
from .config import default_config, load_config
from .errors import (CapacityError, ConfigError, InvalidParameter, InvalidResolution,
                     KernelLeakageError)
from .io import dump_json, write_csv, write_matrix, write_overlap_trace
from .multilevel import build_schedule, run_pipeline
from .partition import build_partition
from .spectral import stationary_density
from .szegedy import build_walk, target_state, walk_evolve, walk_spectrum_check
from .ulam import StochasticMatrix, discretize_kernel

log = logging.getLogger("mlmc")

EXIT_OK, EXIT_CONFIG, EXIT_CAPACITY, EXIT_BOUND = 0, 2, 3, 4


def _config(args):
    cfg = load_config(args.config) if args.config else default_config()
    raw = cfg.raw
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 2 ** 64:
            raise ConfigError("--seed must be an unsigned 64-bit integer", "seed")
        raw["quadrature"]["seed"] = args.seed
        raw["walk"]["seed"] = args.seed
    if args.cap is not None:
        raw["caps"]["states"] = args.cap
    if getattr(args, "out", None):
        raw["output_dir"] = str(args.out)
    return cfg.validate()


def cmd_print_config(args) -> int:
    cfg = _config(args) if args.config else default_config()
    sys.stdout.write(cfg.to_yaml())
    return EXIT_OK


def cmd_discretize(args) -> int:
    cfg = _config(args)
    kernel, quad, out = cfg.kernel, cfg.quadrature, cfg.out_dir
    parts = [build_partition(h, cfg.d, cfg.state_cap) for h in cfg.levels]
    for part in parts:
        P = discretize_kernel(kernel, part, quad, cfg.raw["threshold"])
        stem = out / f"matrix_h{part.h.numerator}-{part.h.denominator}_d{part.d}"
        write_matrix(P, stem)
        print(f"h={part.h} d={part.d} n_states={P.n} nnz={P.nnz} -> {stem}.csv")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    cfg = _config(args)
    sched = build_schedule(cfg.h_max, cfg.h_min, cfg.d, cfg.state_cap)
    sl = cfg.raw["slack"]
    rep = run_pipeline(cfg.kernel, sched, cfg.raw["mode"], float(cfg.raw["target_epsilon"]),
                       cfg.quadrature, cfg.raw["threshold"], cost_slack=sl["cost"],
                       overlap_slack=sl["overlap"], payoff_ratio=sl["payoff"])
    out = cfg.out_dir
    dump_json(rep.to_dict(), out / "pipeline_report.json")
    write_csv(out / "pipeline_levels.csv", rep.csv_columns(), rep.csv_rows())
    for r in rep.records:
        print(f"h={r.h} n={r.n_states} delta={r.delta:.6g} q={r.q:.6g} "
              f"steps={r.walk_steps} C={r.C:.6g}")
    for name, chk in rep.checks.items():
        state = ("PASS" if chk["pass"] else "FAIL") if chk.get("enabled", True) else "info"
        if name == "warm_start_payoff":
            state += f" (ratio {chk['ratio']:.4f}, target {chk['threshold']})"
        print(f"check {name}: {state}")
    return EXIT_OK if rep.passed else EXIT_BOUND


def cmd_walk_check(args) -> int:
    from .verify import TWO_STATE, random_reversible_chain

    cfg = _config(args)
    w = cfg.raw["walk"]
    rng = np.random.default_rng(int(w["seed"]))
    cases = {"two-state": TWO_STATE}
    for i in range(int(w["random_chains"])):
        n = int(rng.integers(2, int(w["max_states"]) + 1))
        cases[f"random-{i:02d}"] = random_reversible_chain(rng, n)
    for h in cfg.levels:
        part = build_partition(h, cfg.d, cfg.state_cap)
        if part.n_states <= cfg.walk_cap:
            cases[f"kernel-h{h}"] = discretize_kernel(cfg.kernel, part, cfg.quadrature,
                                                      cfg.raw["threshold"]).dense()
    results, ok = {}, True
    for name, P in cases.items():
        r = walk_spectrum_check(P, cap=cfg.walk_cap)
        results[name] = r
        if r["pass"] is False:
            ok = False
        tag = "skipped" if r["skipped"] else ("PASS" if r["pass"] else "FAIL")
        print(f"{name}: {tag}" + ("" if r["skipped"] else
                                  f" cos_err={r['cos_match_error']:.3g} gap={r['phase_gap']}"))
    W = build_walk(TWO_STATE, cfg.walk_cap)
    pi = stationary_density(StochasticMatrix.from_array(TWO_STATE), method="eig")
    psi0 = W.isometry(np.full(2, 1.0 / math.sqrt(2.0)))
    ev = walk_evolve(W, psi0, int(w["steps"]), target=target_state(W, pi))
    out = cfg.out_dir
    write_overlap_trace(ev["overlap_trace"], out / "walk_overlap.csv")
    write_overlap_trace(ev["autocorrelation"], out / "walk_autocorrelation.csv", "autocorrelation")
    dump_json({"cases": results, "pass": ok}, out / "walk_check.json")
    return EXIT_OK if ok else EXIT_BOUND


def cmd_verify(args) -> int:
    from .verify import SUITES, run_suite

    cfg = _config(args)
    if args.suite not in SUITES:
        raise ConfigError(f"unknown suite {args.suite!r}; choose from {sorted(SUITES)}", "suite")
    res = run_suite(args.suite)
    for key, c in res["criteria"].items():
        print(f"criterion {key} ({c.get('name')}): {'PASS' if c['pass'] else 'FAIL'}")
    dump_json(res, cfg.out_dir / f"verify_{args.suite}.json")
    return EXIT_OK if res["pass"] else EXIT_BOUND


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML experiment config")
    common.add_argument("--out", type=Path, help="output directory (overrides output_dir)")
    common.add_argument("--seed", type=int, help="seed for quadrature sampling and random chains")
    common.add_argument("--cap", type=int, help="maximum number of states per level")
    common.add_argument("-v", "--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="mlmc", description="multilevel Ulam-Galerkin chain toolkit")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("discretize", parents=[common]).set_defaults(fn=cmd_discretize)
    sub.add_parser("pipeline", parents=[common]).set_defaults(fn=cmd_pipeline)
    sub.add_parser("walk-check", parents=[common]).set_defaults(fn=cmd_walk_check)
    v = sub.add_parser("verify", parents=[common])
    v.add_argument("--suite", default="all")
    v.set_defaults(fn=cmd_verify)
    sub.add_parser("print-config", parents=[common]).set_defaults(fn=cmd_print_config)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    _accel.configure_threads()
    try:
        return args.fn(args)
    except ConfigError as exc:
        where = f" [{exc.field}]" if getattr(exc, "field", None) else ""
        print(f"config error{where}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InvalidResolution, InvalidParameter, KernelLeakageError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapacityError as exc:
        print(f"capacity exceeded at level h={exc.level}: {exc}", file=sys.stderr)
        return EXIT_CAPACITY


if __name__ == "__main__":
    sys.exit(main())
