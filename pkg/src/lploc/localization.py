"""Uniform localization diagnostics for finite-volume eigensystems.

Decay is always measured in the sup norm (minimal image on a torus).  Entries
below ``floor`` are treated as numerically zero: they take part in the
exhaustive bound checks only through ``max(C e^{-r dist}, floor)``.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field

import numpy as np

from .bands import assemble
from .errors import PreconditionError
from .hull import HullPoint, embed, potential_on_box
from .lattice import Box
from .potential import ScaleHierarchy
from .spectral import EigenSystem, eig_sym, evolution_amplitude, kernel_matrix

DEFAULT_FLOOR = 1e-14
R_CAP = 50.0
# relative slack for re-evaluating C e^{-r d} in floating point
_ROUNDING = 1e-12


def localization_center(u, box: Box):
    a = np.abs(np.asarray(u).ravel())
    if not np.any(a):
        raise ValueError("zero vector has no localization center")
    return box.site(int(np.argmax(a)))  # first maximum = lexicographically smallest site


@dataclass(frozen=True)
class DecayFit:
    rate: float
    prefactor: float
    n_points: int
    capped: bool


def _fit_line(dist: np.ndarray, logs: np.ndarray):
    slope, intercept = np.polyfit(dist.astype(np.float64), logs, 1)
    return float(slope), float(intercept)


def fit_decay(
    u, center, floor: float = DEFAULT_FLOOR, *, box: Box, periodic: bool = False, r_cap: float = R_CAP
) -> DecayFit:
    """Least-squares fit of ``log|u(k)|`` against ``|k - center|`` over entries above ``floor``.

    Returns the rate ``-slope`` and prefactor ``exp(intercept)``; with fewer
    than three usable points (or a single distance) the rate is capped.
    """
    if floor <= 0:
        raise ValueError("floor must be positive")
    a = np.abs(np.asarray(u, dtype=np.float64).ravel())
    dist = _distances_from(box, center, periodic)
    keep = a > floor
    if keep.sum() < 3 or np.unique(dist[keep]).size < 2:
        return DecayFit(r_cap, float(a.max()), int(keep.sum()), True)
    slope, intercept = _fit_line(dist[keep], np.log(a[keep]))
    return DecayFit(-slope, math.exp(intercept), int(keep.sum()), False)


def _distances_from(box: Box, center, periodic: bool) -> np.ndarray:
    diff = np.abs(box.coords() - np.asarray(center))
    if periodic:
        diff = np.minimum(diff, np.asarray(box.shape) - diff)
    return diff.max(axis=1)


def _center_distances(E: EigenSystem, centers: np.ndarray) -> np.ndarray:
    """D[k, j] = distance from site k to the center of vector j."""
    box = E.box
    coords = box.coords()
    D = np.zeros((box.size, len(centers)), dtype=np.int64)
    for axis, side in enumerate(box.shape):
        diff = np.abs(coords[:, None, axis] - coords[centers][None, :, axis])
        if E.periodic:
            diff = np.minimum(diff, side - diff)
        np.maximum(D, diff, out=D)
    return D


def bound_prefactor(A: np.ndarray, D: np.ndarray, rate: float, floor: float) -> float:
    """Smallest C with ``A <= C e^{-rate D}`` on every entry above ``floor``."""
    keep = A > floor
    if not keep.any():
        return 0.0
    return math.exp(float(np.max(np.log(A[keep]) + rate * D[keep])))


def count_violations(A: np.ndarray, D: np.ndarray, C: float, rate: float, floor: float) -> int:
    with np.errstate(under="ignore"):
        bound = np.maximum(C * np.exp(-rate * D), floor) * (1 + _ROUNDING)
    return int(np.count_nonzero(A > bound))


@dataclass(frozen=True)
class VectorFit:
    index: int
    center: tuple[int, ...]
    rate: float
    prefactor: float
    boundary: bool
    capped: bool
    gap: float

    def to_row(self) -> dict:
        return {
            "index": self.index,
            "center": " ".join(map(str, self.center)),
            "fitted_rate": repr(self.rate),
            "fitted_prefactor": repr(self.prefactor),
            "boundary_flag": int(self.boundary),
            "capped": int(self.capped),
            "gap": repr(self.gap),
        }


@dataclass(frozen=True)
class UleReport:
    per_vector: list[VectorFit] = field(repr=False)
    uniform_rate: float
    uniform_prefactor: float
    boundary_margin: int
    floor: float
    r_cap: float
    violations: int
    n_checked: int

    @property
    def localized(self) -> bool:
        return self.uniform_rate > 0

    @property
    def n_boundary(self) -> int:
        return sum(v.boundary for v in self.per_vector)

    def to_dict(self) -> dict:
        return {
            "uniform_rate": self.uniform_rate,
            "uniform_prefactor": self.uniform_prefactor,
            "boundary_margin": self.boundary_margin,
            "floor": self.floor,
            "r_cap": self.r_cap,
            "localized": self.localized,
            "violations": self.violations,
            "n_checked": self.n_checked,
            "n_vectors": len(self.per_vector),
            "n_boundary": self.n_boundary,
            "min_gap": min((v.gap for v in self.per_vector), default=math.inf),
        }


def default_margin(box: Box) -> int:
    return max(box.shape) // 16


def uniform_fit(
    E: EigenSystem, boundary_margin: int | None = None, floor: float = DEFAULT_FLOOR, r_cap: float = R_CAP
) -> UleReport:
    """One pair (C, r) bounding every eigenvector.

    ``r`` is the smallest fitted rate among vectors centred more than
    ``boundary_margin`` sites from the box boundary; ``C`` is then the
    exhaustive maximum over all vectors, so the bound holds by construction.
    On a torus no vector is a boundary vector.
    """
    box = E.box
    w = default_margin(box) if boundary_margin is None else int(boundary_margin)
    A = np.abs(E.eigenvectors)
    centers = np.argmax(A, axis=0)
    D = _center_distances(E, centers)
    lam = E.eigenvalues
    gaps = np.full(len(lam), math.inf)
    if len(lam) > 1:
        d = np.diff(lam)
        gaps[:-1] = d
        gaps[1:] = np.minimum(gaps[1:], d)

    fits = []
    for j in range(len(lam)):
        center = box.site(int(centers[j]))
        a = A[:, j]
        keep = a > floor
        dist = D[:, j]
        if keep.sum() < 3 or np.unique(dist[keep]).size < 2:
            rate, pref, capped = r_cap, float(a.max()), True
        else:
            slope, intercept = _fit_line(dist[keep], np.log(a[keep]))
            rate, pref, capped = -slope, math.exp(intercept), False
        boundary = (not E.periodic) and box.boundary_distance(center) <= w
        fits.append(VectorFit(j, center, rate, pref, boundary, capped, float(gaps[j])))

    interior = [f.rate for f in fits if not f.boundary]
    if not interior:
        raise PreconditionError(f"every eigenvector is within {w} sites of the boundary; enlarge the box or lower the margin")
    r = min(min(interior), r_cap)
    C = bound_prefactor(A, D, r, floor)
    return UleReport(fits, r, C, w, floor, r_cap, count_violations(A, D, C, r, floor), A.size)


def verify_bound(E: EigenSystem, C: float, rate: float, floor: float = DEFAULT_FLOOR) -> int:
    """Exhaustive count of entries violating ``|u_j(k)| <= max(C e^{-r|k-m_j|}, floor)``."""
    A = np.abs(E.eigenvectors)
    D = _center_distances(E, np.argmax(A, axis=0))
    return count_violations(A, D, C, rate, floor)


@dataclass(frozen=True)
class RateTable:
    rows: list[dict]
    slope: float

    @property
    def increasing(self) -> bool:
        r = [row["r"] for row in self.rows]
        return all(b > a for a, b in zip(r, r[1:]))

    def to_dict(self) -> dict:
        return {"rows": self.rows, "slope": self.slope, "strictly_increasing": self.increasing}


def rate_vs_epsilon(
    source,
    box: Box,
    eps_list,
    *,
    boundary: str = "dirichlet",
    level: int | None = None,
    target_radius=None,
    boundary_margin: int | None = None,
    floor: float = DEFAULT_FLOOR,
) -> RateTable:
    """Uniform rate at each coupling, and the slope of r against log(1/eps)."""
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise PreconditionError("eps_list must be strictly descending")
    if any(e <= 0 for e in eps_list):
        raise PreconditionError("couplings must be positive for the log(1/eps) fit")
    rows = []
    for eps in eps_list:
        H = assemble(source, box, eps, boundary, level=level, target_radius=target_radius)
        rep = uniform_fit(eig_sym(H), boundary_margin, floor)
        rows.append({"epsilon": eps, "log_inv_epsilon": math.log(1 / eps), "r": rep.uniform_rate, "C": rep.uniform_prefactor})
    if len(rows) >= 2:
        slope, _ = _fit_line(np.array([r["log_inv_epsilon"] for r in rows]), np.array([r["r"] for r in rows]))
    else:
        slope = math.nan
    return RateTable(rows, slope)


def interior_pairs(box: Box, count: int, margin: int, max_distance: int, seed: int = 0) -> list[tuple]:
    """Seeded site pairs inside the box shrunk by ``margin``, at sup distance <= ``max_distance``."""
    lo = np.asarray(box.lo) + margin
    hi = np.asarray(box.hi) - margin
    if np.any(lo > hi):
        raise PreconditionError(f"margin {margin} leaves no interior in box {box.lo}..{box.hi}")
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(count):
        n = rng.integers(lo, hi + 1)
        m = np.clip(n + rng.integers(-max_distance, max_distance + 1, size=box.dim), lo, hi)
        pairs.append((tuple(int(x) for x in n), tuple(int(x) for x in m)))
    return pairs


@dataclass(frozen=True)
class DynamicalFit:
    C_dyn: float
    r_dyn: float
    distances: np.ndarray = field(repr=False)
    kernel: np.ndarray = field(repr=False)
    bound_violations: int
    amplitude_violations: int
    n_amplitude_checks: int
    diag_error: float

    def to_dict(self) -> dict:
        return {
            "C_dyn": self.C_dyn,
            "r_dyn": self.r_dyn,
            "n_pairs": int(len(self.kernel)),
            "bound_violations": self.bound_violations,
            "amplitude_violations": self.amplitude_violations,
            "n_amplitude_checks": self.n_amplitude_checks,
            "kernel_diag_max_error": self.diag_error,
        }


def dynamical_decay(
    E: EigenSystem,
    pairs,
    floor: float = DEFAULT_FLOOR,
    *,
    n_times: int = 100,
    t_max: float = 1e4,
    seed: int = 0,
    r_cap: float = R_CAP,
) -> DynamicalFit:
    """Exponential fit of the time-uniform kernel ``K(n, m)`` over the given pairs.

    ``C_dyn`` is the exhaustive maximum making ``K <= C_dyn e^{-r_dyn |n-m|}``
    hold on every pair above ``floor``.  Each pair also gets ``n_times`` random
    times at which ``|<delta_n, e^{-itH} delta_m>| <= K(n, m)`` is checked.
    """
    box = E.box
    K = kernel_matrix(E)
    idx = np.array([[box.index(n), box.index(m)] for n, m in pairs])
    kv = K[idx[:, 0], idx[:, 1]]
    dist = np.array([_distances_from(box, n, E.periodic)[box.index(m)] for n, m in pairs])
    keep = kv > floor
    if keep.sum() >= 2 and np.unique(dist[keep]).size >= 2:
        slope, _ = _fit_line(dist[keep], np.log(kv[keep]))
        r = min(-slope, r_cap)
    else:
        r = r_cap
    C = bound_prefactor(kv, dist, r, floor)
    violations = count_violations(kv, dist, C, r, floor)

    rng = np.random.default_rng(seed)
    amp_bad = 0
    for (n, m), k in zip(pairs, kv):
        amp = np.abs(evolution_amplitude(E, n, m, rng.uniform(0.0, t_max, n_times)))
        amp_bad += int(np.count_nonzero(amp > k + 1e-12))
    diag_err = float(np.max(np.abs(np.diag(K) - 1.0)))
    return DynamicalFit(C, r, dist, kv, violations, amp_bad, n_times * len(pairs), diag_err)


@dataclass(frozen=True)
class PhaseStabilityReport:
    hull_points: list[dict]
    spectra_deviation: float
    ule_table: list[dict]
    translation_exactness: float | None
    pooled_C: float
    pooled_r: float
    pooled_violations: int
    rate_spread: float
    min_gap: float

    def to_dict(self) -> dict:
        return {
            "hull_points": self.hull_points,
            "spectra_deviation": self.spectra_deviation,
            "ule_table": self.ule_table,
            "translation_exactness": self.translation_exactness,
            "pooled_C": self.pooled_C,
            "pooled_r": self.pooled_r,
            "pooled_violations": self.pooled_violations,
            "rate_spread": self.rate_spread,
            "min_gap": self.min_gap,
        }


def _pooled(systems, reports, floor):
    C = max(r.uniform_prefactor for r in reports)
    rate = min(r.uniform_rate for r in reports)
    violations = sum(verify_bound(E, C, rate, floor) for E in systems)
    rates = [r.uniform_rate for r in reports]
    med = statistics.median(rates)
    spread = max(abs(x - med) for x in rates) / med if med else math.inf
    return C, rate, violations, spread


def _spectral_spread(systems) -> float:
    lam = np.stack([E.eigenvalues for E in systems])
    return float(np.max(lam.max(axis=0) - lam.min(axis=0)))


def _min_gap(systems) -> float:
    return float(min((np.min(np.diff(E.eigenvalues)) for E in systems if len(E) > 1), default=math.inf))


def phase_stability(
    hier: ScaleHierarchy, k: int, translates, epsilon: float, floor: float = DEFAULT_FLOOR
) -> PhaseStabilityReport:
    """Translates of the level-k periodic approximant on its period torus.

    Translates are unitarily equivalent by a cyclic shift, so the sorted
    spectra must coincide and the kernels must satisfy
    ``K_t(n, m) = K_0(n + t, m + t)``.
    """
    if not 1 <= k <= hier.L:
        raise PreconditionError(f"level {k} outside hierarchy depth {hier.L}")
    translates = [tuple(int(x) for x in t) for t in translates]
    if not translates or any(len(t) != hier.d for t in translates):
        raise PreconditionError("need at least one translate of the right dimension")
    periods = hier.n(k)
    box = Box((0,) * hier.d, tuple(n - 1 for n in periods))
    coords = box.coords()
    systems, reports, table, points = [], [], [], []
    for t in translates:
        omega = embed(hier, t, k)
        values, _ = potential_on_box(omega, box, k)
        E = eig_sym(assemble(values, box, epsilon, "periodic"))
        rep = uniform_fit(E, 0, floor)
        systems.append(E)
        reports.append(rep)
        points.append({"translate": list(t), "point": omega.to_dict()})
        table.append({"label": f"t={t}", "C": rep.uniform_prefactor, "r": rep.uniform_rate})

    K0 = kernel_matrix(systems[0])
    t0 = np.asarray(translates[0])
    exactness = 0.0
    for t, E in zip(translates, systems):
        shifted = np.mod(coords + (np.asarray(t) - t0), periods)
        perm = np.ravel_multi_index(tuple(shifted.T), box.shape)
        exactness = max(exactness, float(np.max(np.abs(kernel_matrix(E) - K0[np.ix_(perm, perm)]))))

    C, rate, violations, spread = _pooled(systems, reports, floor)
    return PhaseStabilityReport(
        points, _spectral_spread(systems), table, exactness, C, rate, violations, spread, _min_gap(systems)
    )


def hull_ule_survey(
    hier: ScaleHierarchy,
    hull_points,
    box: Box,
    epsilon: float,
    level: int,
    *,
    labels=None,
    boundary_margin: int | None = None,
    floor: float = DEFAULT_FLOOR,
) -> PhaseStabilityReport:
    """Uniform fits for several hull points on one Dirichlet box, and their pooled pair.

    The pooled pair (max C, min r) bounds every sampled point; it is checked
    exhaustively against every eigenvector of every system.
    """
    hull_points = list(hull_points)
    if not hull_points:
        raise PreconditionError("survey needs at least one hull point")
    labels = [str(i) for i in range(len(hull_points))] if labels is None else [str(x) for x in labels]
    systems, reports, table, points = [], [], [], []
    for label, omega in zip(labels, hull_points):
        if not isinstance(omega, HullPoint) or omega.hierarchy != hier:
            raise PreconditionError("hull points must belong to the given hierarchy")
        E = eig_sym(assemble(omega, box, epsilon, "dirichlet", level=level))
        rep = uniform_fit(E, boundary_margin, floor)
        systems.append(E)
        reports.append(rep)
        points.append({"label": label, "point": omega.to_dict()})
        table.append({"label": label, "C": rep.uniform_prefactor, "r": rep.uniform_rate})
    C, rate, violations, spread = _pooled(systems, reports, floor)
    return PhaseStabilityReport(
        points, _spectral_spread(systems), table, None, C, rate, violations, spread, _min_gap(systems)
    )
