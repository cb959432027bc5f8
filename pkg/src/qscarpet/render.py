"""SVG figures of the patterns, the graph approximants and the walk region."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.collections import LineCollection, PatchCollection  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402

from .carpet import CarpetParams, enumerate_table, linear_row, sawtooth_row  # noqa: E402
from .stochastic import WalkSpec, trial_rng, up_times  # noqa: E402

RC = {
    "svg.hashsalt": "qscarpet",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.linewidth": 0.6,
}
FILL = "#4a6fa5"
STOPPED = "#d08c3a"
MAX_RECTANGLES = 400_000


def save_svg(fig, path) -> None:
    with plt.rc_context(RC):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _figure(w=6.0, h=4.0):
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(w, h))
    return fig, ax


def _cells(ax, cols, rows, W, H, color=FILL):
    rects = [Rectangle((c / W, r / H), 1 / W, 1 / H) for c, r in zip(cols, rows)]
    ax.add_collection(PatchCollection(rects, facecolor=color, edgecolor="none"))


def _grid(ax, W, H):
    lines = [[(i / W, 0), (i / W, 1)] for i in range(W + 1)]
    lines += [[(0, j / H), (1, j / H)] for j in range(H + 1)]
    ax.add_collection(LineCollection(lines, colors="0.7", linewidths=0.3))


def _frame(ax, title):
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.set_xticks([])
    ax.set_yticks([])
    ax.set_title(title)


def render_pattern(params: CarpetParams, path, kind: str = "sawtooth") -> None:
    """One subdivision step: the sawtooth on M**n by M cells, or the M by M diagonal."""
    M = params.M
    if kind == "sawtooth":
        W = params.columns
        rows = [sawtooth_row(c, False, M)[0] for c in range(W)]
        fig, ax = _figure(8, 8 * M / W + 0.8)
    elif kind == "linear":
        W = M
        rows = [linear_row(c, False, M)[0] for c in range(W)]
        fig, ax = _figure(4, 4)
    else:
        raise ValueError(f"unknown pattern {kind!r}")
    _cells(ax, range(W), rows, W, M)
    _grid(ax, W, M)
    _frame(ax, f"{kind} pattern, M={M}" + (f", n={params.n}" if kind == "sawtooth" else ""))
    ax.set_aspect("auto")
    save_svg(fig, path)


def render_graph(params: CarpetParams, depth: int, path, stopped: bool = False) -> None:
    """Depth-level rectangle cover of the graph of h_n (or f_n with ``stopped``).

    For f_n, each stopped rectangle is drawn once at its stopping level with
    the affine piece through it.
    """
    C, M = params.columns, params.M
    if C**depth > MAX_RECTANGLES:
        raise ValueError(f"depth {depth} needs {C ** depth} rectangles (cap {MAX_RECTANGLES})")
    table = enumerate_table(depth, params)
    fig, ax = _figure(6, 6)
    for k in range(1, depth):
        # outline of coarser levels
        sub = C ** (depth - k)  # rows are in lexicographic column order
        cidx = table.column_index()[::sub] // sub
        ridx = table.row_index(k)[::sub]
        rects = [Rectangle((c / C**k, r / M**k), 1 / C**k, 1 / M**k) for c, r in zip(cidx, ridx)]
        ax.add_collection(
            PatchCollection(rects, facecolor="none", edgecolor="0.6", linewidths=0.3)
        )
    keep = table.survivors() if stopped else np.ones(len(table), dtype=bool)
    _cells(ax, table.column_index()[keep], table.row_index()[keep], C**depth, M**depth)
    if stopped:
        segs = set()
        for s in range(1, depth + 1):
            hit = table.stop == s
            if not hit.any():
                continue
            span = C ** (depth - s)
            for c, r, d in zip(
                table.column_index()[hit] // span,
                table.row_index(s)[hit],
                table.descending[hit, s - 1],
            ):
                segs.add((int(c), int(r), bool(d), s))
        lines, boxes = [], []
        for c, r, d, s in sorted(segs):
            x0, y0, w, h = c / C**s, r / M**s, 1 / C**s, 1 / M**s
            boxes.append(Rectangle((x0, y0), w, h))
            lines.append([(x0, y0 + h), (x0 + w, y0)] if d else [(x0, y0), (x0 + w, y0 + h)])
        ax.add_collection(PatchCollection(boxes, facecolor=STOPPED, alpha=0.25, edgecolor="none"))
        ax.add_collection(LineCollection(lines, colors=STOPPED, linewidths=0.6))
    name = "f" if stopped else "h"
    _frame(ax, f"{name}_{params.n} cover, M={M}, depth {depth}")
    save_svg(fig, path)


def sample_walks(spec: WalkSpec, count: int) -> list[np.ndarray]:
    """Paths Z_0..Z_N of the first ``count`` trials of ``spec``."""
    q = float(1 - spec.p)
    paths = []
    for i in range(count):
        steps = -np.ones(spec.horizon, dtype=np.int64)
        ups = up_times(trial_rng(spec.seed, i), q, spec.horizon)
        steps[ups - 1] = 1
        paths.append(np.concatenate([[0], np.cumsum(steps)]))
    return paths


def render_walk_region(spec: WalkSpec, path, count: int = 12, length: int = 200) -> None:
    short = WalkSpec(spec.p, min(length, spec.horizon), spec.trials, spec.seed)
    fig, ax = _figure(6, 4)
    N = np.arange(short.horizon + 1)
    barrier = -0.6 * N
    ax.fill_between(N, barrier, -N, color="0.9", label="region Z_N <= -3N/5")
    ax.plot(N, barrier, color="0.3", lw=0.8)
    for z in sample_walks(short, count):
        inside = 5 * z <= -3 * N
        inside[0] = True
        out = np.flatnonzero(~inside)
        color = STOPPED if out.size else FILL
        ax.plot(N, z, lw=0.6, color=color)
    ax.set_xlabel("N")
    ax.set_ylabel("Z_N")
    ax.set_title(f"walks with p = {spec.p}")
    ax.legend(loc="lower left", frameon=False)
    save_svg(fig, path)


def render_box_counts(series, path) -> None:
    fig, ax = _figure(5, 4)
    for s in series:
        x = np.asarray(s.ks) * s.log_base
        y = np.log(np.asarray(s.counts, dtype=float))
        ax.plot(x, y, "o-", ms=3, lw=0.8, label=f"{s.label} slope {s.slope:.3f}")
    ax.set_xlabel("log 1/eps")
    ax.set_ylabel("log N(eps)")
    ax.legend(frameon=False, fontsize=7)
    save_svg(fig, path)


def render_exit_times(times, horizon: int, path) -> None:
    fig, ax = _figure(5, 3.5)
    t = np.asarray([v for v in times if v is not None], dtype=float)
    if t.size:
        bins = np.unique(np.geomspace(1, horizon, 40).astype(int))
        ax.hist(t, bins=bins, color=FILL)
        ax.set_xscale("log")
    ax.set_xlabel("exit time")
    ax.set_ylabel("trials")
    ax.set_title(f"{t.size} exits within {horizon} steps")
    save_svg(fig, path)


def render_diameter_ratios(audit, path) -> None:
    fig, ax = _figure(5, 3.5)
    levels = sorted(audit.diameters)
    data = [audit.ratios(k).ravel() for k in levels]
    ax.boxplot(data, positions=levels, widths=0.5)
    ax.set_yscale("log")
    ax.set_xlabel("level k")
    ax.set_ylabel("diam / (rho M^-k)")
    ax.set_title(f"metric level {audit.m}, max ratio {audit.C1:.4g}")
    save_svg(fig, path)

