"""The hull of V as an inverse limit of finite quotients of Z^d.

A point of the hull is a compatible tower of residue vectors
``r_v in prod_i Z / n_v^(i) Z`` (``r_{v+1} = r_v mod n_v``).  The identity is the
all-zero tower, the translation ``T^n`` adds ``n`` at every level, and the
potential seen from ``omega`` is ``V_omega(n) = sum_v sum_i a_v^(i)(n_i + r_v^(i)) / W_v``.
Compatibility collapses the level-k truncation of that sum to ``V_k(n + r_k)``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DepthExhausted
from .lattice import Box
from .potential import (
    CertifiedValue,
    ScaleHierarchy,
    certified_level,
    coordinate_profile,
    numerators_to_float,
    tail_bound,
    truncated_numerator,
    truncated_values,
)


@dataclass(frozen=True)
class HullPoint:
    hierarchy: ScaleHierarchy
    residues: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        res = tuple(tuple(int(r) for r in lev) for lev in self.residues)
        object.__setattr__(self, "residues", res)
        hier = self.hierarchy
        if len(res) > hier.L:
            raise DepthExhausted(f"hull point depth {len(res)} exceeds hierarchy depth {hier.L}")
        for v, lev in enumerate(res, start=1):
            n = hier.n(v)
            if len(lev) != hier.d or any(not 0 <= r < m for r, m in zip(lev, n)):
                raise ValueError(f"level-{v} residues {lev} not in range of periods {n}")
        for v in range(1, len(res)):
            if any(b % m != a for a, b, m in zip(res[v - 1], res[v], hier.n(v))):
                raise ValueError(f"residues at levels {v} and {v + 1} are not compatible")

    @property
    def depth(self) -> int:
        return len(self.residues)

    @property
    def top(self) -> tuple[int, ...]:
        return self.residues[-1] if self.residues else (0,) * self.hierarchy.d

    def to_dict(self) -> dict:
        return {
            "levels": [list(self.hierarchy.n(v)) for v in range(1, self.depth + 1)],
            "residues": [list(r) for r in self.residues],
        }

    @classmethod
    def from_dict(cls, hier: ScaleHierarchy, doc: dict) -> "HullPoint":
        levels = [tuple(x) for x in doc["levels"]]
        if levels != [hier.n(v) for v in range(1, len(levels) + 1)]:
            raise ValueError("serialized levels do not match the hierarchy")
        return cls(hier, tuple(tuple(r) for r in doc["residues"]))

    def __str__(self) -> str:
        return " | ".join(",".join(map(str, r)) for r in self.residues)


def hull_identity(hier: ScaleHierarchy, depth: int) -> HullPoint:
    if not 0 <= depth <= hier.L:
        raise DepthExhausted(f"depth {depth} exceeds hierarchy depth {hier.L}")
    return HullPoint(hier, tuple((0,) * hier.d for _ in range(depth)))


def _check_same(a: HullPoint, b: HullPoint) -> None:
    if a.hierarchy != b.hierarchy or a.depth != b.depth:
        raise ValueError("hull points must share hierarchy and depth")


def hull_add(a: HullPoint, b: HullPoint) -> HullPoint:
    _check_same(a, b)
    hier = a.hierarchy
    return HullPoint(
        hier,
        tuple(
            tuple((x + y) % n for x, y, n in zip(ra, rb, hier.n(v)))
            for v, (ra, rb) in enumerate(zip(a.residues, b.residues), start=1)
        ),
    )


def hull_neg(a: HullPoint) -> HullPoint:
    hier = a.hierarchy
    return HullPoint(
        hier, tuple(tuple((-x) % n for x, n in zip(r, hier.n(v))) for v, r in enumerate(a.residues, start=1))
    )


def hull_translate(omega: HullPoint, n) -> HullPoint:
    """``T^n omega``: add the lattice vector ``n`` at every level."""
    hier = omega.hierarchy
    if len(n) != hier.d:
        raise ValueError(f"translation {tuple(n)} has wrong dimension for d={hier.d}")
    return HullPoint(
        hier,
        tuple(
            tuple((x + int(s)) % m for x, s, m in zip(r, n, hier.n(v)))
            for v, r in enumerate(omega.residues, start=1)
        ),
    )


def embed(hier: ScaleHierarchy, n, depth: int) -> HullPoint:
    """The orbit point ``T^n omega_e``."""
    return hull_translate(hull_identity(hier, depth), n)


def orbit_witness(omega: HullPoint) -> tuple[int, ...]:
    """A lattice vector t with ``T^t omega_e`` equal to ``omega`` through its depth."""
    return omega.top


def _level_shift(omega: HullPoint, k: int) -> tuple[int, ...]:
    if k > omega.depth:
        raise DepthExhausted(f"level {k} requested from a hull point of depth {omega.depth}")
    return omega.residues[k - 1] if k else (0,) * omega.hierarchy.d


def evaluate(omega: HullPoint, n, k: int) -> Fraction:
    """Exact level-k truncation of ``V_omega(n)``."""
    shift = _level_shift(omega, k)
    hier = omega.hierarchy
    t = tuple(int(a) + b for a, b in zip(n, shift, strict=True))
    return Fraction(truncated_numerator(hier, t, k), hier.denominator(k) if k else 1)


def sample_at_level(omega: HullPoint, n, k: int) -> CertifiedValue:
    return CertifiedValue(evaluate(omega, n, k), tail_bound(omega.hierarchy, k))


def sample_potential(omega: HullPoint, n, target_radius) -> CertifiedValue:
    k = certified_level(omega.hierarchy, target_radius)
    if k > omega.depth:
        raise DepthExhausted(f"radius {target_radius} needs level {k}, hull point has depth {omega.depth}")
    return sample_at_level(omega, n, k)


def potential_on_box(omega: HullPoint, box: Box, k: int) -> tuple[np.ndarray, Fraction]:
    """Float values of the level-k truncation on ``box`` (canonical order) and its tail radius."""
    hier = omega.hierarchy
    shift = np.asarray(_level_shift(omega, k), dtype=np.int64)
    num = truncated_values(hier, box.coords() + shift, k)
    return numerators_to_float(num, hier.denominator(k) if k else 1), tail_bound(hier, k)


def hull_distance(a: HullPoint, b: HullPoint, k: int) -> CertifiedValue:
    """Enclosure of ``sup_n |V_a(n) - V_b(n)|``.

    The level-k difference is a sum of one-variable functions, each periodic
    with period ``n_k^(i)``, so its sup over Z^d is attained on one period and
    splits coordinate-wise; the radius covers both tails.
    """
    if a.hierarchy != b.hierarchy:
        raise ValueError("hull points must share a hierarchy")
    hier = a.hierarchy
    ra, rb = _level_shift(a, k), _level_shift(b, k)
    radius = 2 * tail_bound(hier, k)
    if k == 0:
        return CertifiedValue(Fraction(0), radius)
    hi = lo = 0
    for i, n in enumerate(hier.n(k)):
        x = np.arange(n, dtype=np.int64)
        f = coordinate_profile(hier, i, x + ra[i], k) - coordinate_profile(hier, i, x + rb[i], k)
        hi += int(f.max())
        lo += int(f.min())
    return CertifiedValue(Fraction(max(hi, -lo), hier.denominator(k)), radius)


@dataclass(frozen=True)
class SamplingFunction:
    """A continuous function on the hull.

    ``kind`` is ``evaluation_at_zero`` (uses ``target_radius``),
    ``periodic_level`` or ``distance_to_identity`` (both use ``level``).
    """

    kind: str
    level: int | None = None
    target_radius: Fraction | None = None

    def __post_init__(self):
        if self.kind not in ("evaluation_at_zero", "periodic_level", "distance_to_identity"):
            raise ValueError(f"unknown sampling function kind {self.kind!r}")
        if self.kind == "evaluation_at_zero" and self.target_radius is None:
            raise ValueError("evaluation_at_zero needs target_radius")
        if self.kind != "evaluation_at_zero" and self.level is None:
            raise ValueError(f"{self.kind} needs level")


def apply_sampling(f: SamplingFunction, omega: HullPoint) -> CertifiedValue:
    zero = (0,) * omega.hierarchy.d
    if f.kind == "evaluation_at_zero":
        return sample_potential(omega, zero, f.target_radius)
    if f.kind == "periodic_level":
        # exact value of the periodic sampling function, no enclosure needed
        return CertifiedValue(evaluate(omega, zero, f.level), Fraction(0))
    return hull_distance(hull_identity(omega.hierarchy, omega.depth), omega, f.level)


def random_hull_point(seed: int, hier: ScaleHierarchy, depth: int) -> HullPoint:
    """Haar-uniform point truncated at ``depth``; deterministic in ``seed``."""
    if not 0 <= depth <= hier.L:
        raise DepthExhausted(f"depth {depth} exceeds hierarchy depth {hier.L}")
    rng = random.Random(seed)
    residues = []
    prev = (0,) * hier.d
    for v in range(1, depth + 1):
        lower, upper = hier.n(v - 1), hier.n(v)
        cur = tuple(r + m * rng.randrange(n // m) for r, m, n in zip(prev, lower, upper))
        residues.append(cur)
        prev = cur
    return HullPoint(hier, tuple(residues))
