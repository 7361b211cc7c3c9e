"""Integer lattice points, rectangular boxes and the two lattice norms.

Points are plain tuples of ints. A :class:`Box` fixes the canonical
(lexicographic) ordering used as the matrix basis everywhere else.
"""

from __future__ import annotations

import itertools
import sys
from dataclasses import dataclass
from math import prod

import numpy as np

Point = tuple[int, ...]


def sup_norm(p) -> int:
    return max((abs(int(x)) for x in p), default=0)


def l1_norm(p) -> int:
    return sum(abs(int(x)) for x in p)


def neighbors(p) -> list[Point]:
    """The 2d nearest neighbours of ``p``; coordinate-major, minus before plus."""
    out = []
    for i in range(len(p)):
        for step in (-1, 1):
            q = list(p)
            q[i] += step
            out.append(tuple(q))
    return out


def add(p, q) -> Point:
    return tuple(int(a) + int(b) for a, b in zip(p, q, strict=True))


def sub(p, q) -> Point:
    return tuple(int(a) - int(b) for a, b in zip(p, q, strict=True))


@dataclass(frozen=True)
class Box:
    """Inclusive box ``lo <= x <= hi`` in Z^d."""

    lo: Point
    hi: Point

    def __post_init__(self):
        lo = tuple(int(x) for x in self.lo)
        hi = tuple(int(x) for x in self.hi)
        if len(lo) != len(hi) or not lo:
            raise ValueError(f"box corners must have equal positive length, got {lo}, {hi}")
        if any(a > b for a, b in zip(lo, hi)):
            raise ValueError(f"empty box: lo={lo} hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if prod(self.shape) > sys.maxsize:
            raise OverflowError(f"box {lo}..{hi} has too many sites")

    @classmethod
    def cube(cls, d: int, side: int, origin: int = 0) -> "Box":
        return cls((origin,) * d, (origin + side - 1,) * d)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(b - a + 1 for a, b in zip(self.lo, self.hi))

    @property
    def size(self) -> int:
        return prod(self.shape)

    def __contains__(self, p) -> bool:
        return len(p) == self.dim and all(a <= x <= b for x, a, b in zip(p, self.lo, self.hi))

    def sites(self) -> list[Point]:
        return list(itertools.product(*(range(a, b + 1) for a, b in zip(self.lo, self.hi))))

    def index(self, p) -> int:
        if p not in self:
            raise IndexError(f"site {tuple(p)} outside box {self.lo}..{self.hi}")
        return int(np.ravel_multi_index(tuple(x - a for x, a in zip(p, self.lo)), self.shape))

    def site(self, idx: int) -> Point:
        rel = np.unravel_index(int(idx), self.shape)
        return tuple(int(r) + a for r, a in zip(rel, self.lo))

    def coords(self) -> np.ndarray:
        """Array of shape (size, d): row j holds the coordinates of site j."""
        grids = np.meshgrid(*(np.arange(a, b + 1) for a, b in zip(self.lo, self.hi)), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def distance_matrix(self, periodic: bool = False) -> np.ndarray:
        """Pairwise sup-norm distances between sites (minimal image on the torus)."""
        c = self.coords()
        out = np.zeros((self.size, self.size), dtype=np.int64)
        for i, side in enumerate(self.shape):
            diff = np.abs(c[:, None, i] - c[None, :, i])
            if periodic:
                diff = np.minimum(diff, side - diff)
            np.maximum(out, diff, out=out)
        return out

    def boundary_distance(self, p) -> int:
        return min(min(x - a, b - x) for x, a, b in zip(p, self.lo, self.hi))

    def to_dict(self) -> dict:
        return {"lo": list(self.lo), "hi": list(self.hi)}
