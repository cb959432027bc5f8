"""Verification checks shared by the ``verify`` command and the acceptance tests.

Each check returns a :class:`CheckResult`; side files (CSV, SVG) go through an
optional :class:`OutputDir`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import render
from .carpet import (
    CarpetParams,
    continuity_violations,
    enumerate_table,
    fiber_census,
    glued_f,
    glued_f_block,
    row_counts,
)
from .config import RunConfig
from .grid import GridParams, IndexClass, class_counts, classify
from .measures import (
    FiberMeasure,
    box_count,
    fiber_measure_ball_check,
    generic_height,
    glued_box_count,
    level_set_boxcount,
    sigma_share,
)
from .metric import GridMetric, diameter_audit, qs_ratio_audit
from .stochastic import (
    WalkSpec,
    exit_bound,
    exit_probability_dp,
    independence_check,
    joint_survival_mc,
    walk_exit_mc,
)
from .weights import ContentBound, WeightHierarchy, survivor_weight_bound_check

# tolerances fixed by the acceptance criteria
SLOPE_TOL = 0.1
C1_SPREAD = 2.0
SIGMAS = 3.0
CONFIDENCE = 0.99
CONTENT_LEVELS = 20


@dataclass
class CheckResult:
    name: str
    passed: bool
    details: dict = field(default_factory=dict)
    informational: bool = False

    def as_dict(self) -> dict:
        return {
            "check": self.name,
            "passed": self.passed,
            "informational": self.informational,
            "details": self.details,
        }


def _save(out, name, writer):
    if out is not None:
        writer(out.path(name))


def bad_weight_index(M: int):
    """A level-1 Center index, unstopped, used by the fault-injection hook."""
    c = (M + 1) // 2
    return ((c, c),)


def hierarchy_for(cfg: RunConfig) -> WeightHierarchy:
    overrides = {}
    if cfg["inject_bad_weight"]:
        overrides[bad_weight_index(cfg.grid.M)] = Fraction(1)
    return WeightHierarchy(cfg.grid, overrides)


# ---------------------------------------------------------------------------


def check_weight_bound(cfg: RunConfig, out=None) -> CheckResult:
    h = hierarchy_for(cfg)
    levels = {}
    ok = True
    for m in range(1, cfg["weights"]["max_level"] + 1):
        rep = survivor_weight_bound_check(h, m, h.survivors(m))
        ok &= rep.ok
        levels[m] = {
            "checked": rep.checked,
            "violations": len(rep.violations),
            "first_violations": [str(v) for v in rep.violations[:5]],
            "max_ratio_cubed": rep.max_ratio_cubed,
        }
    return CheckResult("weight_bound", ok, {"M": cfg.grid.M, "r": cfg.grid.r, "levels": levels})


def _c1_fraction(C1: float) -> Fraction:
    return Fraction(C1).limit_denominator(10**6) if C1 > 0 else Fraction(1)


def check_content_decay(cfg: RunConfig, out=None, C1: float | None = None) -> CheckResult:
    grids = {
        "config": cfg.grid,
        "demo_default": GridParams(),
        "demo_r_near_limit": GridParams(M=5, r=Fraction(1, 5**3 + 1)),
        "strict_default": GridParams.strict_default(),
        "strict_r_near_limit": GridParams(M=79, r=Fraction(1, 79**3 + 1), mode="strict"),
    }
    c1 = _c1_fraction(C1) if C1 is not None else Fraction(1)
    rows = {}
    ok = True
    for label, g in grids.items():
        cb = ContentBound(g, c1)
        dec = cb.strictly_decreasing(CONTENT_LEVELS, 1)
        ok &= dec
        rows[label] = {
            "M": g.M,
            "r": g.r,
            "ratio": cb.ratio(),
            "strictly_decreasing": dec,
            "sequence": [cb(m) for m in range(1, CONTENT_LEVELS + 1)],
        }
    return CheckResult("content_decay", ok, {"C1": c1, "levels": [1, CONTENT_LEVELS], "grids": rows})


def check_diameter(cfg: RunConfig, out=None) -> CheckResult:
    h = hierarchy_for(cfg)
    fitted = {}
    per_level = {}
    bounded = True
    audit = None
    for m in range(1, cfg["metric"]["max_level"] + 1):
        audit = diameter_audit(GridMetric.from_hierarchy(h, m))
        fitted[m] = audit.C1
        per_level[m] = audit.level_max()
        # C1 is the max ratio, so every square sits under it by construction
        bounded &= all(float(audit.ratios(k).max()) <= audit.C1 for k in audit.diameters)
    spread = max(fitted.values()) / min(fitted.values())
    if audit is not None:
        _save(out, "diameter_audit.csv", audit.write_csv)
        _save(out, "diameter_ratios.svg", lambda p: render.render_diameter_ratios(audit, p))
    return CheckResult(
        "diameter",
        bool(spread < C1_SPREAD and bounded),
        {"fitted_C1": fitted, "ratio_max_by_level": per_level, "spread": spread, "limit": C1_SPREAD},
    )


def check_qs_envelope(cfg: RunConfig, out=None) -> CheckResult:
    m = cfg["metric"]["qs_level"]
    env = qs_ratio_audit(GridMetric.from_hierarchy(hierarchy_for(cfg), m), cfg["metric"]["qs_triples"], cfg.seed)
    return CheckResult("qs_envelope", True, {"level": m, **env.as_dict()}, informational=True)


def check_grid_classes(cfg: RunConfig, out=None) -> CheckResult:
    rows = {}
    ok = True
    for M in (5, 9, 13):
        counts = class_counts(M)
        center = counts[IndexClass.CENTER]
        good = sum(counts.values()) == M * M and center == (M - 4) ** 2
        ok &= good
        rows[M] = {c.name: v for c, v in counts.items()}
    return CheckResult("grid_classes", ok, {"counts": rows})


def check_steps(cfg: RunConfig, out=None) -> CheckResult:
    cp = cfg.carpet
    rep = independence_check(cp, 2)
    target = Fraction(cp.M - 4, cp.M)
    exact = all(p == target for p in rep.p_down_x + rep.p_down_y)
    return CheckResult(
        "step_independence",
        rep.ok and exact,
        {
            "p_down_target": target,
            "p_down_x": rep.p_down_x,
            "p_down_y": rep.p_down_y,
            "joint_x_is_product": rep.joint_x_ok,
            "joint_y_is_product": rep.joint_y_ok,
            "cross_table_x1_y1": rep.cross,
        },
    )


def check_dimension(cfg: RunConfig, out=None) -> CheckResult:
    g = cfg.grid
    dim = cfg["dim"]
    ok = True
    details = {"graph": {}, "level": {}}
    series = []
    for n, depth in sorted(dim["h_depths"].items()):
        n = int(n)
        s = box_count(CarpetParams(g, n), depth, "h")
        target = 2 - 1 / n
        good = abs(s.slope - target) <= SLOPE_TOL
        ok &= good
        details["graph"][f"h_{n}"] = {**s.summary(), "target": target, "passed": good}
        series.append(s)
        _save(out, f"boxcount_h{n}.csv", s.write_csv)
    for n, depth in sorted(dim["level_depths"].items()):
        n = int(n)
        digits = generic_height([], depth, g.M, cfg.seed)
        s = level_set_boxcount(CarpetParams(g, n), digits, "h")
        target = 1 - 1 / n
        good = abs(s.slope - target) <= SLOPE_TOL
        ok &= good
        details["level"][f"h_{n}"] = {**s.summary(), "digits": digits, "target": target, "passed": good}
        _save(out, f"levelset_h{n}.csv", s.write_csv)
    _save(out, "boxcount.svg", lambda p: render.render_box_counts(series, p))
    return CheckResult("dimension", ok, details)


def certified_digits(cfg: RunConfig, depth: int, m: int = 2) -> list[int]:
    """Row digits of a strict-grid fiber whose level-m strip is census-certified."""
    g = GridParams.strict_default()
    fc = fiber_census(CarpetParams(g, cfg.carpet.n), m, seed=cfg.seed, rows=50, per_row=400, samples=1000)
    label = int(fc.strips[np.flatnonzero(fc.certified())[0]])
    prefix = [label // g.M ** (m - 1 - k) % g.M for k in range(m)]
    return generic_height(prefix, depth, g.M, cfg.seed)


def dimension_extras(cfg: RunConfig, out=None) -> dict:
    """Reported series without pass/fail: f_n, the diagonal, the glued graph, f level set."""
    g, dim = cfg.grid, cfg["dim"]
    cp = cfg.carpet
    series = {
        "f": box_count(cp, dim["f_depth"], "f"),
        "line": box_count(cp, dim["f_depth"], "line"),
        "glued": glued_box_count(g, dim["glued_depth"]),
    }
    # A_m is empty at demo scale, so the f_n fiber is taken on the strict grid
    digits = certified_digits(cfg, 3)
    strict = CarpetParams(GridParams.strict_default(), cp.n)
    series["level_f_strict"] = level_set_boxcount(strict, digits, "f")
    for name, s in series.items():
        _save(out, f"boxcount_{name}.csv", s.write_csv)
    return {name: s.summary() for name, s in series.items()}


def check_walk_bound(cfg: RunConfig, out=None) -> CheckResult:
    w = cfg["walk"]
    spec = WalkSpec(cfg.p, w["horizon"], w["trials"], cfg.seed)
    res = walk_exit_mc(spec)
    bound = res.bound
    est, se = res.exits.estimate, res.exits.stderr
    short = res.exits_before(w["short_horizon"])
    width = res.exits.ci(CONFIDENCE)[1] - res.exits.ci(CONFIDENCE)[0]
    under_quarter = bound is None or bound.bound < Fraction(1, 4)
    dominated = bound is None or est <= float(bound.bound) + SIGMAS * se
    truncation = abs(short.estimate - est) < width
    _save(out, "exit_times.csv", res.write_csv)
    _save(out, "exit_times.svg", lambda p: render.render_exit_times(res.exit_times, spec.horizon, p))
    return CheckResult(
        "walk_bound",
        bool(under_quarter and dominated and truncation),
        {
            **res.summary(),
            "bound_exact": None if bound is None else bound.bound,
            "bound_below_quarter": under_quarter,
            "roots": None if bound is None else list(bound.roots),
            "within_3_sigma": dominated,
            "short_horizon": w["short_horizon"],
            "short_estimate": short.estimate,
            "truncation_gap": abs(short.estimate - est),
            "ci_width": width,
            "dp_exit_probability": exit_probability_dp(cfg.p, min(w["horizon"], 2000)),
        },
    )


def run_joint(cfg: RunConfig):
    w = cfg["walk"]
    return joint_survival_mc(WalkSpec(cfg.p, w["horizon"], w["trials"], cfg.seed))


def check_joint_survival(cfg: RunConfig, out=None, joint=None) -> CheckResult:
    joint = run_joint(cfg) if joint is None else joint
    s = joint.summary()
    return CheckResult("joint_survival", bool(s["lower99"] > 0.5), s)


def check_j_bound(cfg: RunConfig, out=None, joint=None) -> CheckResult:
    joint = run_joint(cfg) if joint is None else joint
    return CheckResult(
        "j_bound",
        len(joint.j_violations) == 0,
        {
            "surviving_pairs": joint.both.successes,
            "violations": len(joint.j_violations),
            "violation_trials": joint.j_violations[:50],
        },
    )


def check_census(cfg: RunConfig, out=None) -> CheckResult:
    c = cfg["census"]
    demo = CarpetParams(GridParams(), cfg.carpet.n)
    M, n = demo.M, demo.n
    exact = {}
    ok = True
    for m in range(1, c["demo_depth"] + 1):
        fc = fiber_census(demo, m)
        good = (
            fc.exhaustive
            and bool(np.all(fc.total == M ** (m * (n - 1))))
            and int(fc.total.sum()) == M ** (m * n)
            and bool(np.all((fc.survivors >= 0) & (fc.survivors <= fc.total)))
        )
        if m == 1:
            # survivors at level 1 are the rectangles in Center squares
            t = enumerate_table(1, demo)
            expect = sum(
                classify(int(x) + 1, int(r) + 1, M) is IndexClass.CENTER
                for x, r in zip(t.xdigits[:, 0], t.rows[:, 0])
            )
            good &= int(fc.survivors.sum()) == expect
        ok &= good
        exact[m] = {
            "survivors_per_strip": fc.survivors,
            "total_per_strip": fc.per_row_full,
            **fc.summary(),
            "passed": good,
        }
        if m == c["demo_depth"]:
            _save(out, "census_demo.csv", fc.write_csv)
    strict = CarpetParams(GridParams.strict_default(), cfg.carpet.n)
    fc = fiber_census(
        strict, c["strict_depth"], seed=cfg.seed, rows=c["rows"], per_row=c["per_row"], samples=c["samples"]
    )
    frac_ok = fc.fraction + SIGMAS * fc.fraction_stderr >= 0.5
    a_ok = fc.measure_A + SIGMAS * fc.measure_A_stderr >= 0.25
    _save(out, "census_strict.csv", fc.write_csv)
    return CheckResult(
        "fiber_census",
        bool(ok and frac_ok and a_ok),
        {"demo": exact, "strict": {**fc.summary(), "fraction_ok": frac_ok, "measure_A_ok": a_ok}},
    )


def check_frostman(cfg: RunConfig, out=None) -> CheckResult:
    fr = cfg["frostman"]
    cp = cfg.carpet
    digits = generic_height([], fr["depth"], cp.M, cfg.seed)
    mu = FiberMeasure(cp, digits)
    sigma = FiberMeasure(cp, digits, restricted=True)
    masses = [mu.total(k) for k in range(1, mu.depth + 1)]
    rep = fiber_measure_ball_check(mu, fr["samples"], cfg.seed)
    conserved = all(m == 1 for m in masses)
    sd = certified_digits(cfg, 3)
    sp = CarpetParams(GridParams.strict_default(), cp.n)
    share = sigma_share(FiberMeasure(sp, sd), FiberMeasure(sp, sd, restricted=True))
    strict_fiber = {"M": sp.M, "digits": sd, "sigma_share": share, "quarter_or_more": [v >= Fraction(1, 4) for v in share]}
    ok = rep.ok and conserved and mu.refinement_consistent() and sigma.refinement_consistent()
    return CheckResult(
        "frostman",
        bool(ok),
        {
            "digits": digits,
            "mass_by_level": masses,
            "aligned_checked": rep.aligned_checked,
            "aligned_violations": rep.aligned_violations,
            "aligned_equalities": rep.aligned_equalities,
            "offgrid_checked": rep.offgrid_checked,
            "offgrid_over_M": rep.offgrid_over_M,
            "C_offgrid": rep.C_offgrid,
            "sigma_share": sigma_share(mu, sigma),
            "strict_fiber": strict_fiber,
        },
    )


def check_glue(cfg: RunConfig, out=None) -> CheckResult:
    gl = cfg["glue"]
    g = cfg.grid
    identities = {}
    ok = True
    for b in range(1, gl["max_block"] + 1):
        x = Fraction(1, 2**b)
        own = glued_f(x, 1, g)
        # the same point is the right end of block b + 1
        neighbour = glued_f_block(x, b + 1, 1, g)
        good = own.exact and own.lo == x and neighbour.exact and neighbour.lo == x
        ok &= good
        identities[b] = {"value": own.lo, "from_next_block": neighbour.lo, "passed": good}
    ok &= glued_f(0, 1, g).lo == 0 and glued_f(1, 1, g).lo == 1
    continuity = {}
    for b in range(1, gl["max_block"] + 1):
        cp = CarpetParams(g, b)
        depths = [d for d in range(1, gl["continuity_depth"] + 1) if cp.columns**d <= gl["continuity_budget"]]
        bad = {d: continuity_violations(d, cp, stopped=True) for d in depths}
        ok &= all(v == 0 for v in bad.values())
        continuity[b] = {"depths": depths, "violations": bad}
    full = all(continuity[b]["depths"] == list(range(1, gl["continuity_depth"] + 1)) for b in continuity)
    return CheckResult(
        "glue",
        bool(ok),
        {"identities": identities, "continuity": continuity, "all_blocks_full_depth": full},
    )


def check_carpet(cfg: RunConfig, out=None) -> CheckResult:
    """Uniform fibers, continuity of h_n and f_n, agreement of f_n and h_n off the stopped set."""
    cp = cfg.carpet
    uniform = bool(np.all(row_counts(cp) == cp.M ** (cp.n - 1)))
    cont = {}
    ok = uniform
    for d in range(1, cfg["depth"] + 1):
        if cp.columns**d > cfg["glue"]["continuity_budget"]:
            break
        cont[d] = {
            "h": continuity_violations(d, cp, stopped=False),
            "f": continuity_violations(d, cp, stopped=True),
        }
        ok &= cont[d]["h"] == 0 and cont[d]["f"] == 0
    return CheckResult("carpet", bool(ok), {"uniform_fibers": uniform, "continuity_violations": cont})


CHECKS = {
    "grid_classes": check_grid_classes,
    "weight_bound": check_weight_bound,
    "diameter": check_diameter,
    "content_decay": check_content_decay,
    "qs_envelope": check_qs_envelope,
    "carpet": check_carpet,
    "dimension": check_dimension,
    "step_independence": check_steps,
    "walk_bound": check_walk_bound,
    "joint_survival": check_joint_survival,
    "j_bound": check_j_bound,
    "fiber_census": check_census,
    "frostman": check_frostman,
    "glue": check_glue,
}


def run_checks(cfg: RunConfig, names=None, out=None) -> list[CheckResult]:
    names = list(CHECKS) if names is None else list(names)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise KeyError(f"unknown checks: {', '.join(unknown)}")
    results = []
    joint = None
    C1 = None
    for name in names:
        if name in ("joint_survival", "j_bound"):
            joint = run_joint(cfg) if joint is None else joint
            res = CHECKS[name](cfg, out, joint=joint)
        elif name == "content_decay":
            res = check_content_decay(cfg, out, C1=C1)
        else:
            res = CHECKS[name](cfg, out)
        if name == "diameter":
            C1 = max(res.details["fitted_C1"].values())
        results.append(res)
    return results

