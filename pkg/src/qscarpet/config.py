"""Experiment configuration: JSON document plus command-line overrides."""

from __future__ import annotations

import copy
import json
import os
from fractions import Fraction
from pathlib import Path

from .carpet import CarpetParams
from .grid import ConfigError, GridParams, as_fraction

ENV_OUT = "QSCARPET_OUT"
DEFAULT_OUT = "qscarpet-out"

DEFAULTS = {
    "grid": {"M": 5, "r": "1/126", "mode": "demo"},
    "carpet": {"n": 2},
    "seed": 0,
    "depth": 3,
    "weights": {"max_level": 4},
    "metric": {"max_level": 3, "qs_level": 2, "qs_triples": 20000},
    "dim": {"h_depths": {"2": 5, "4": 4}, "level_depths": {"2": 8, "4": 4}, "f_depth": 4, "glued_depth": 4},
    "walk": {"p": "74/78", "trials": 100000, "horizon": 10000, "short_horizon": 1000},
    "census": {"demo_depth": 3, "strict_depth": 4, "samples": 200000, "rows": 400, "per_row": 400},
    "frostman": {"depth": 5, "samples": 2000},
    "glue": {"max_block": 10, "continuity_depth": 3, "continuity_budget": 2000000},
    "inject_bad_weight": False,
}

_INT_KEYS = {
    ("seed",), ("depth",), ("carpet", "n"), ("grid", "M"),
    ("weights", "max_level"), ("metric", "max_level"), ("metric", "qs_level"),
    ("metric", "qs_triples"), ("dim", "f_depth"), ("dim", "glued_depth"),
    ("walk", "trials"), ("walk", "horizon"), ("walk", "short_horizon"),
    ("census", "demo_depth"), ("census", "strict_depth"), ("census", "samples"),
    ("census", "rows"), ("census", "per_row"), ("frostman", "depth"),
    ("frostman", "samples"), ("glue", "max_block"), ("glue", "continuity_depth"),
    ("glue", "continuity_budget"),
}


def _merge(base: dict, extra: dict, path=()) -> dict:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        if key not in base:
            raise ConfigError(f"unknown config key {'.'.join(path + (key,))!r}")
        if isinstance(base[key], dict) and key not in ("h_depths", "level_depths"):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {'.'.join(path + (key,))!r} must be an object")
            out[key] = _merge(base[key], value, path + (key,))
        else:
            out[key] = value
    return out


def _check_ints(cfg: dict) -> None:
    for path in _INT_KEYS:
        node = cfg
        for key in path:
            node = node[key]
        if isinstance(node, bool) or not isinstance(node, int):
            raise ConfigError(f"{'.'.join(path)} must be an integer, got {node!r}")
        if path != ("seed",) and node < 1:
            raise ConfigError(f"{'.'.join(path)} must be positive, got {node}")
    if cfg["seed"] < 0:
        raise ConfigError("seed must be nonnegative")
    for key in ("h_depths", "level_depths"):
        for n, depth in cfg["dim"][key].items():
            if not str(n).isdigit() or isinstance(depth, bool) or not isinstance(depth, int) or depth < 1:
                raise ConfigError(f"dim.{key} must map n to a positive depth")


class RunConfig:
    """Resolved configuration; ``data`` is the JSON-ready form echoed in manifests."""

    def __init__(self, data: dict):
        self.data = _merge(DEFAULTS, data)
        _check_ints(self.data)
        g = self.data["grid"]
        self.grid = GridParams(M=g["M"], r=as_fraction(g["r"]), mode=g["mode"])
        self.carpet = CarpetParams(self.grid, self.data["carpet"]["n"])
        p = as_fraction(self.data["walk"]["p"])
        if not 0 < p <= 1:
            raise ConfigError(f"walk.p must lie in (0, 1], got {p}")
        if self.grid.mode == "strict" and p < Fraction(74, 78):
            raise ConfigError(f"strict mode needs walk.p >= 74/78, got {p}")
        self.p = p
        # canonical spellings so equal configs serialize identically
        self.data["grid"]["r"] = str(self.grid.r)
        self.data["walk"]["p"] = str(p)
        if not isinstance(self.data["inject_bad_weight"], bool):
            raise ConfigError("inject_bad_weight must be true or false")

    def __getitem__(self, key):
        return self.data[key]

    @property
    def seed(self) -> int:
        return self.data["seed"]

    @classmethod
    def load(cls, path=None, overrides: dict | None = None) -> "RunConfig":
        data = {}
        if path is not None:
            try:
                data = json.loads(Path(path).read_text())
            except FileNotFoundError as exc:
                raise ConfigError(f"config file {path} not found") from exc
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
            if not isinstance(data, dict):
                raise ConfigError("config must be a JSON object")
        merged = _merge(DEFAULTS, data)
        for dotted, value in (overrides or {}).items():
            node = merged
            *parents, last = dotted.split(".")
            for key in parents:
                node = node[key]
            node[last] = value
        return cls(merged)


def output_root(flag=None) -> Path:
    if flag:
        return Path(flag)
    return Path(os.environ.get(ENV_OUT, DEFAULT_OUT))
