"""Run configuration: one YAML file, documented defaults, dotted-key overrides."""

from __future__ import annotations

import copy
from dataclasses import dataclass
from pathlib import Path

import yaml

from .errors import ConfigError
from .hull import HullPoint, embed, hull_identity, random_hull_point
from .lattice import Box
from .potential import ScaleHierarchy, tower_hierarchy

# Every knob the CLI reads, with its default.
DEFAULTS: dict = {
    "dimension": 1,
    "hierarchy": {
        "kind": "tower",  # tower | explicit
        "base": 2,
        "depth": 6,  # L, number of levels
        "levels": None,  # explicit: list of per-level period tuples
        "m": 1,
        "C": 1,
    },
    "level": 5,  # truncation level k used for potentials on boxes
    "epsilon": 0.01,
    "epsilon_list": [0.1, 0.03, 0.01, 0.003],
    "box": {"lo": None, "hi": None, "side": 256},  # lo/hi override side
    "boundary": "dirichlet",
    "hull": {"kind": "identity", "translate": None, "seed": 7, "count": 5},  # identity | translate | random
    "floor": 1e-14,
    "boundary_margin": None,  # None: box side / 16
    "distality": {"k_eval": 4, "k_max": 64},
    "dynamics": {"pairs": 200, "max_distance": 24, "seed": 0, "times": 100, "t_max": 1e4},
    "phase": {"level": 3, "epsilon": 0.05},
    "sweep": {"slope_window": [0.5, 1.5]},
    "output": "lploc-out",
    "formats": ["json", "csv", "plot"],  # plus optional: bin (eigenvectors), coo (matrix)
}


def _merge(base: dict, extra: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown configuration key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{where!r} must be a mapping")
            out[key] = _merge(base[key], value, where + ".")
        else:
            out[key] = value
    return out


def parse_override(item: str) -> dict:
    """``a.b=value`` into a nested dict; the value is parsed as YAML."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} must look like key.sub=value")
    key, raw = item.split("=", 1)
    value = yaml.safe_load(raw)
    doc: dict = {}
    cur = doc
    parts = key.strip().split(".")
    for p in parts[:-1]:
        cur = cur.setdefault(p, {})
    cur[parts[-1]] = value
    return doc


@dataclass(frozen=True)
class RunConfig:
    data: dict

    @classmethod
    def load(cls, path=None, overrides=()) -> "RunConfig":
        doc = copy.deepcopy(DEFAULTS)
        if path is not None:
            try:
                loaded = yaml.safe_load(Path(path).read_text()) or {}
            except (OSError, yaml.YAMLError) as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from exc
            if not isinstance(loaded, dict):
                raise ConfigError("config file must hold a mapping")
            doc = _merge(doc, loaded)
        for item in overrides:
            doc = _merge(doc, item if isinstance(item, dict) else parse_override(item))
        cfg = cls(doc)
        cfg.validate()
        return cfg

    def __getitem__(self, key):
        return self.data[key]

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)

    def validate(self) -> None:
        d = self.data
        if not isinstance(d["dimension"], int) or d["dimension"] < 1:
            raise ConfigError("dimension must be a positive integer")
        hier = self.hierarchy()
        if not 0 <= d["level"] <= hier.L:
            raise ConfigError(f"level {d['level']} exceeds hierarchy depth {hier.L}")
        if d["epsilon"] < 0 or any(e < 0 for e in d["epsilon_list"]):
            raise ConfigError("couplings must be non-negative")
        if d["boundary"] not in ("dirichlet", "periodic"):
            raise ConfigError("boundary must be dirichlet or periodic")
        if d["hull"]["kind"] not in ("identity", "translate", "random"):
            raise ConfigError("hull.kind must be identity, translate or random")
        if d["floor"] <= 0:
            raise ConfigError("floor must be positive")
        self.box()

    def hierarchy(self) -> ScaleHierarchy:
        h = self.data["hierarchy"]
        dim = self.data["dimension"]
        try:
            if h["kind"] == "tower":
                return tower_hierarchy(dim, int(h["base"]), int(h["depth"]))
            if h["kind"] == "explicit":
                if not h["levels"]:
                    raise ConfigError("explicit hierarchy needs levels")
                levels = tuple(tuple(lev) if isinstance(lev, (list, tuple)) else (lev,) * dim for lev in h["levels"])
                hier = ScaleHierarchy(levels, m=int(h["m"]), C=int(h["C"]))
                if hier.d != dim:
                    raise ConfigError(f"hierarchy dimension {hier.d} does not match dimension {dim}")
                return hier
        except ValueError as exc:
            raise ConfigError(f"invalid hierarchy: {exc}") from exc
        raise ConfigError(f"unknown hierarchy kind {h['kind']!r}")

    def box(self) -> Box:
        b = self.data["box"]
        dim = self.data["dimension"]
        try:
            if b["lo"] is not None or b["hi"] is not None:
                lo = b["lo"] if isinstance(b["lo"], list) else [b["lo"]] * dim
                hi = b["hi"] if isinstance(b["hi"], list) else [b["hi"]] * dim
                box = Box(tuple(lo), tuple(hi))
            else:
                box = Box.cube(dim, int(b["side"]))
        except (TypeError, ValueError, OverflowError) as exc:
            raise ConfigError(f"invalid box: {exc}") from exc
        if box.dim != dim:
            raise ConfigError(f"box dimension {box.dim} does not match dimension {dim}")
        return box

    def hull_points(self, depth: int | None = None) -> list[tuple[str, HullPoint]]:
        hier = self.hierarchy()
        depth = self.data["level"] if depth is None else depth
        h = self.data["hull"]
        if h["kind"] == "identity":
            return [("identity", hull_identity(hier, depth))]
        if h["kind"] == "translate":
            t = h["translate"]
            t = tuple(t) if isinstance(t, list) else (int(t),) * hier.d
            return [(f"translate={list(t)}", embed(hier, t, depth))]
        seed, count = int(h["seed"]), int(h["count"])
        # one derived seed per point keeps each point reproducible on its own
        return [(f"seed={seed + i}", random_hull_point(seed + i, hier, depth)) for i in range(count)]

    def seeds(self) -> dict:
        return {"hull": self.data["hull"]["seed"], "dynamics": self.data["dynamics"]["seed"]}
