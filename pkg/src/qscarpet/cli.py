"""Command-line front end: construct, verify, dim, walk, render."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from fractions import Fraction

from . import render
from .carpet import eval_f, eval_h, fiber_census, glued_f
from .checks import (
    CHECKS,
    check_dimension,
    check_j_bound,
    check_joint_survival,
    check_walk_bound,
    dimension_extras,
    run_checks,
    run_joint,
)
from .config import RunConfig, output_root
from .grid import ConfigError, classes_of, index_from_cell, stopping_from_classes
from .report import OutputDir
from .stochastic import WalkSpec
from .weights import WeightHierarchy

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3
RENDER_DEPTH_CAP = 3
CENSUS_BUDGET = 2_000_000

log = logging.getLogger("qscarpet")

# flag name -> dotted config key
OVERRIDES = {
    "M": "grid.M",
    "r": "grid.r",
    "mode": "grid.mode",
    "n": "carpet.n",
    "depth": "depth",
    "seed": "seed",
    "p": "walk.p",
    "trials": "walk.trials",
    "horizon": "walk.horizon",
}


def _label(idx) -> str:
    return "".join(f"({i},{j})" for i, j in idx)


def _interval(iv) -> list[str]:
    return [str(iv.lo), str(iv.hi)]


def _write_weights(cfg: RunConfig, out: OutputDir) -> None:
    h = WeightHierarchy(cfg.grid)
    M = cfg.grid.M
    survivors = {}
    for m in range(1, cfg["depth"] + 1):
        alive = []
        with open(out.path(f"weights/level_{m}.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["level", "index", "rho", "stopped_at"])
            for cx in range(M**m):
                for cy in range(M**m):
                    idx = index_from_cell(cx, cy, m, M)
                    ledger = stopping_from_classes(classes_of(idx, M))
                    w.writerow([m, _label(idx), str(h.rho(idx)), ledger.stopped_at or ""])
                    if not ledger.stopped:
                        alive.append(_label(idx))
        survivors[m] = alive
    out.write_json("survivors.json", survivors)


def _write_traces(cfg: RunConfig, out: OutputDir) -> None:
    cp, depth = cfg.carpet, cfg["depth"]
    C = cp.columns
    points = [Fraction(k, C) for k in range(C + 1)] + [Fraction(1, 3), Fraction(2, 7), Fraction(1, 2)]
    trace = {
        "depth": depth,
        "h": {str(x): _interval(eval_h(x, depth, cp)) for x in points},
        "f": {str(x): _interval(eval_f(x, depth, cp)) for x in points},
        "glued": {
            str(x): _interval(glued_f(x, depth, cfg.grid))
            for x in [Fraction(0), Fraction(1), Fraction(3, 4), Fraction(1, 3)]
            + [Fraction(1, 2**b) for b in range(1, 6)]
        },
    }
    out.write_json("traces.json", trace)


def _render_figures(cfg: RunConfig, out: OutputDir) -> None:
    cp = cfg.carpet
    depth = min(cfg["depth"], RENDER_DEPTH_CAP)
    render.render_pattern(cp, out.path("pattern_sawtooth.svg"), "sawtooth")
    render.render_pattern(cp, out.path("pattern_linear.svg"), "linear")
    render.render_graph(cp, depth, out.path(f"graph_h{cp.n}_depth{depth}.svg"))
    render.render_graph(cp, depth, out.path(f"graph_f{cp.n}_depth{depth}.svg"), stopped=True)


def cmd_construct(cfg: RunConfig, out: OutputDir, args) -> int:
    log.info("weights and survivor sets to level %d", cfg["depth"])
    _write_weights(cfg, out)
    log.info("function traces")
    _write_traces(cfg, out)
    cp = cfg.carpet
    if cp.columns ** cfg["depth"] <= CENSUS_BUDGET:
        fiber_census(cp, cfg["depth"]).write_csv(out.path("census.csv"))
    _render_figures(cfg, out)
    return EXIT_OK


def _report(out: OutputDir, results) -> int:
    for res in results:
        out.write_json(f"{res.name}.json", res.as_dict())
        log.info("%-18s %s", res.name, "pass" if res.passed else "FAIL")
    out.write_json(
        "summary.json",
        {"checks": {r.name: r.passed for r in results}, "passed": all(r.passed for r in results)},
    )
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def cmd_verify(cfg: RunConfig, out: OutputDir, args) -> int:
    names = None
    if args.only:
        names = [n.strip() for n in args.only.split(",") if n.strip()]
        unknown = [n for n in names if n not in CHECKS]
        if unknown:
            raise ConfigError(f"unknown checks {unknown}; choose from {sorted(CHECKS)}")
    return _report(out, run_checks(cfg, names, out))


def cmd_dim(cfg: RunConfig, out: OutputDir, args) -> int:
    res = check_dimension(cfg, out)
    out.write_json("dim_extras.json", dimension_extras(cfg, out))
    return _report(out, [res])


def cmd_walk(cfg: RunConfig, out: OutputDir, args) -> int:
    joint = run_joint(cfg)
    results = [
        check_walk_bound(cfg, out),
        check_joint_survival(cfg, out, joint=joint),
        check_j_bound(cfg, out, joint=joint),
    ]
    spec = WalkSpec(cfg.p, cfg["walk"]["horizon"], cfg["walk"]["trials"], cfg.seed)
    render.render_walk_region(spec, out.path("walk_region.svg"))
    return _report(out, results)


def cmd_render(cfg: RunConfig, out: OutputDir, args) -> int:
    _render_figures(cfg, out)
    spec = WalkSpec(cfg.p, cfg["walk"]["horizon"], cfg["walk"]["trials"], cfg.seed)
    render.render_walk_region(spec, out.path("walk_region.svg"))
    return EXIT_OK


COMMANDS = {
    "construct": cmd_construct,
    "verify": cmd_verify,
    "dim": cmd_dim,
    "walk": cmd_walk,
    "render": cmd_render,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qscarpet", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--out", help="output root (default: $QSCARPET_OUT or ./qscarpet-out)")
    common.add_argument("--M", type=int)
    common.add_argument("--r", help='rational, e.g. "1/126"')
    common.add_argument("--mode", choices=["demo", "strict"])
    common.add_argument("--n", type=int)
    common.add_argument("--depth", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--p", help='walk down-step probability, e.g. "74/78"')
    common.add_argument("--trials", type=int)
    common.add_argument("--horizon", type=int)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "verify":
            sp.add_argument("--only", help="comma-separated check names")
            sp.add_argument(
                "--inject-bad-weight", action="store_true", help="test hook: corrupt one survivor weight"
            )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s"
    )
    overrides = {key: getattr(args, flag) for flag, key in OVERRIDES.items() if getattr(args, flag) is not None}
    if getattr(args, "inject_bad_weight", False):
        overrides["inject_bad_weight"] = True
    try:
        cfg = RunConfig.load(args.config, overrides)
        out = OutputDir(output_root(args.out) / args.command)
        code = COMMANDS[args.command](cfg, out, args)
        out.write_manifest(cfg.data, {"command": args.command})
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return code


if __name__ == "__main__":
    sys.exit(main())
