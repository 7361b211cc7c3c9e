"""Matrices stored by diagonals, and finite-volume Schrödinger operators.

A :class:`BandMatrix` on a box keeps, for each offset ``k``, the sequence
``A_k(i) = A(i, i+k)`` as an array shaped like the box.  Entries whose column
``i+k`` falls outside the box are zero.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import PreconditionError
from .lattice import Box, sup_norm
from .potential import ScaleHierarchy, certified_level

log = logging.getLogger(__name__)

MAX_ASSEMBLY_SITES = 16384


def _slices(shape, l):
    dst, src = [], []
    for s, step in zip(shape, l):
        if step >= 0:
            dst.append(slice(0, max(s - step, 0)))
            src.append(slice(min(step, s), s))
        else:
            dst.append(slice(min(-step, s), s))
            src.append(slice(0, max(s + step, 0)))
    return tuple(dst), tuple(src)


def shift_sequence(seq: np.ndarray, l) -> np.ndarray:
    """``T^l seq``: ``out(n) = seq(n + l)``, zero where ``n + l`` leaves the box."""
    out = np.zeros_like(seq)
    dst, src = _slices(seq.shape, l)
    out[dst] = seq[src]
    return out


def valid_mask(box: Box, k) -> np.ndarray:
    """True at sites i of the box with ``i + k`` also in the box."""
    mask = np.zeros(box.shape, dtype=bool)
    dst, _ = _slices(box.shape, k)
    mask[dst] = True
    return mask


@dataclass(frozen=True)
class BandMatrix:
    box: Box
    diagonals: dict = field(default_factory=dict)

    def __post_init__(self):
        diags = {}
        for k, seq in self.diagonals.items():
            k = tuple(int(x) for x in k)
            if len(k) != self.box.dim:
                raise ValueError(f"offset {k} has wrong dimension")
            arr = np.asarray(seq, dtype=np.float64).reshape(self.box.shape)
            arr = np.where(valid_mask(self.box, k), arr, 0.0)
            diags[k] = arr
        object.__setattr__(self, "diagonals", diags)

    @classmethod
    def identity(cls, box: Box) -> "BandMatrix":
        return cls(box, {(0,) * box.dim: np.ones(box.shape)})

    @classmethod
    def from_dense(cls, box: Box, M: np.ndarray) -> "BandMatrix":
        M = np.asarray(M, dtype=np.float64)
        if M.shape != (box.size, box.size):
            raise ValueError(f"dense matrix shape {M.shape} does not match box of {box.size} sites")
        coords = box.coords()
        lo = np.asarray(box.lo)
        diags: dict = {}
        rows, cols = np.nonzero(M)
        for r, c in zip(rows, cols):
            k = tuple(int(x) for x in coords[c] - coords[r])
            seq = diags.setdefault(k, np.zeros(box.shape))
            seq[tuple(coords[r] - lo)] = M[r, c]
        return cls(box, diags)

    def to_dense(self) -> np.ndarray:
        N = self.box.size
        out = np.zeros((N, N))
        idx = np.arange(N).reshape(self.box.shape)
        for k, seq in self.diagonals.items():
            dst, src = _slices(self.box.shape, k)
            out[idx[dst].ravel(), idx[src].ravel()] = seq[dst].ravel()
        return out

    @property
    def offsets(self) -> list[tuple[int, ...]]:
        return sorted(self.diagonals)

    def is_hermitian(self, atol: float = 0.0) -> bool:
        """``A_k(i) == A_{-k}(i + k)`` for every stored offset."""
        zero = np.zeros(self.box.shape)
        for k, seq in self.diagonals.items():
            neg = tuple(-x for x in k)
            partner = shift_sequence(self.diagonals.get(neg, zero), k)
            if np.max(np.abs(seq - partner), initial=0.0) > atol:
                return False
        return True


def diagonal_product(A: BandMatrix, B: BandMatrix) -> BandMatrix:
    """Diagonals of ``Z = AB`` via ``Z_k = sum_l A_l * T^l(B_{k-l})``."""
    if A.box != B.box:
        raise ValueError(f"box mismatch: {A.box} vs {B.box}")
    out: dict = {}
    for l, a in A.diagonals.items():
        for j, b in B.diagonals.items():
            k = tuple(x + y for x, y in zip(l, j))
            term = a * shift_sequence(b, l)
            if k in out:
                out[k] += term
            else:
                out[k] = term
    return BandMatrix(A.box, out)


def banach_norm(A: BandMatrix, s: float) -> float:
    """``sup_k ||A_k||_inf e^{|k| s}`` with the sup norm on offsets."""
    if s < 0:
        raise ValueError("s must be non-negative")
    return max(
        (float(np.max(np.abs(seq), initial=0.0)) * math.exp(sup_norm(k) * s) for k, seq in A.diagonals.items()),
        default=0.0,
    )


@dataclass(frozen=True)
class FiniteOperator:
    """``H = epsilon * (adjacency) + diag(potential)`` on a box."""

    box: Box
    boundary: str
    epsilon: float
    potential: np.ndarray
    potential_radius: Fraction = Fraction(0)

    def __post_init__(self):
        if self.boundary not in ("dirichlet", "periodic"):
            raise ValueError(f"boundary must be 'dirichlet' or 'periodic', got {self.boundary!r}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        pot = np.asarray(self.potential, dtype=np.float64).ravel()
        if pot.shape != (self.box.size,):
            raise ValueError(f"potential has {pot.size} values for a box of {self.box.size} sites")
        object.__setattr__(self, "potential", pot)

    @property
    def periodic(self) -> bool:
        return self.boundary == "periodic"

    def adjacency(self) -> np.ndarray:
        """Nearest-neighbour adjacency; coincident bonds on small tori add up."""
        N = self.box.size
        adj = np.zeros((N, N))
        idx = np.arange(N).reshape(self.box.shape)
        for axis, side in enumerate(self.box.shape):
            if self.periodic:
                a, b = idx, np.roll(idx, -1, axis=axis)
            else:
                a = idx.take(range(side - 1), axis=axis)
                b = idx.take(range(1, side), axis=axis)
            np.add.at(adj, (a.ravel(), b.ravel()), 1.0)
            np.add.at(adj, (b.ravel(), a.ravel()), 1.0)
        return adj

    def dense(self) -> np.ndarray:
        H = self.epsilon * self.adjacency()
        H[np.diag_indices_from(H)] += self.potential
        return H

    def bands(self) -> BandMatrix:
        return BandMatrix.from_dense(self.box, self.dense())


def _potential_values(source, box: Box, level, target_radius):
    from .hull import HullPoint, hull_identity, potential_on_box

    if isinstance(source, ScaleHierarchy):
        source = hull_identity(source, source.L)
    if isinstance(source, HullPoint):
        hier = source.hierarchy
        if level is None:
            if target_radius is None:
                raise PreconditionError("hull-point potentials need a truncation level or a target radius")
            level = certified_level(hier, target_radius)
        values, radius = potential_on_box(source, box, level)
        return values, radius
    if callable(source):
        return np.array([float(source(p)) for p in box.sites()]), Fraction(0)
    return np.asarray(source, dtype=np.float64).ravel(), Fraction(0)


def assemble(
    source,
    box: Box,
    epsilon: float,
    boundary: str = "dirichlet",
    *,
    level: int | None = None,
    target_radius=None,
) -> FiniteOperator:
    """Build the finite-volume operator for a potential source.

    ``source`` may be a :class:`~lploc.hull.HullPoint`, a hierarchy (its
    identity point), explicit values in box order, or a callable on sites.
    Certified potentials are collapsed to floats; the enclosure radius is
    kept on the operator and logged.
    """
    if box.size > MAX_ASSEMBLY_SITES:
        raise PreconditionError(f"box has {box.size} sites, assembly limit is {MAX_ASSEMBLY_SITES}")
    values, radius = _potential_values(source, box, level, target_radius)
    if radius:
        log.info("potential collapsed to floats; enclosure radius %.3e", float(radius))
    return FiniteOperator(box, boundary, float(epsilon), values, radius)


@dataclass(frozen=True)
class ScalingReport:
    epsilon: float
    max_deviation: float
    tolerance: float
    identical_matrices: bool | None

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tolerance


def scaling_equivalence_check(potential, box: Box, epsilon: float, boundary: str = "dirichlet", rtol: float = 1e-10):
    """Compare unit hopping with potential V/eps against (eps hopping + V) / eps."""
    if epsilon <= 0:
        raise PreconditionError("scaling check needs epsilon > 0")
    canonical = assemble(potential, box, epsilon, boundary)
    unit = FiniteOperator(box, boundary, 1.0, canonical.potential / epsilon)
    lam_c = np.linalg.eigvalsh(canonical.dense()) / epsilon
    lam_u = np.linalg.eigvalsh(unit.dense())
    dev = float(np.max(np.abs(lam_c - lam_u)))
    tol = rtol * max(1.0, float(np.max(np.abs(lam_u))))
    same = bool(np.array_equal(canonical.dense(), unit.dense())) if epsilon == 1 else None
    return ScalingReport(float(epsilon), dev, tol, same)


def write_coo(path, M: np.ndarray) -> None:
    """Nonzero entries as ``row col value`` lines, 17 significant digits."""
    rows, cols = np.nonzero(M)
    with open(path, "w") as fh:
        for r, c in zip(rows, cols):
            fh.write(f"{r} {c} {M[r, c]:.17g}\n")


def read_coo(path, n: int) -> np.ndarray:
    M = np.zeros((n, n))
    with open(path) as fh:
        for line in fh:
            r, c, v = line.split()
            M[int(r), int(c)] = float(v)
    return M
