"""The distal limit-periodic potential built from a scale hierarchy.

For a hierarchy of periods ``n_v = (n_v^(1), ..., n_v^(d))`` the potential is

    V(t) = sum_i sum_v a_v^(i)(t_i) / W_v,    W_v = prod_i (n_{v-1}^(i))^2 n_v^(i),

with ``a_v^(i)(p) = p mod n_v^(i)`` and ``n_0 = 1``.  Every truncation ``V_k`` is
evaluated exactly; the remainder ``V - V_k`` is controlled by :func:`tail_bound`.

Because ``W_v`` divides ``W_k`` for ``v <= k``, ``W_k * V_k`` is an integer.  The
vectorised scans below work on those integer numerators and only convert to
:class:`~fractions.Fraction` at the end.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np

from .errors import DepthExhausted, PreconditionError
from .lattice import sup_norm

_INT64_SAFE = 2**62


@dataclass(frozen=True)
class ScaleHierarchy:
    """Nested periods ``levels[v-1] = (n_v^(1), ..., n_v^(d))`` for v = 1..L.

    ``m`` and ``C`` are the growth exponent and the cross-dimension
    comparability constant; construction fails if any constraint is violated.
    """

    levels: tuple[tuple[int, ...], ...]
    m: int = 1
    C: int = 1

    def __post_init__(self):
        levels = tuple(tuple(int(n) for n in lev) for lev in self.levels)
        object.__setattr__(self, "levels", levels)
        if not levels:
            raise ValueError("hierarchy needs at least one level")
        d = len(levels[0])
        if d < 1 or any(len(lev) != d for lev in levels):
            raise ValueError("all levels must have the same positive dimension")
        if self.m < 1 or self.C < 1:
            raise ValueError(f"m and C must be positive integers, got m={self.m}, C={self.C}")
        if any(n < 2 for n in levels[0]):
            raise ValueError(f"first-level periods must be >= 2, got {levels[0]}")
        for v, (cur, nxt) in enumerate(zip(levels, levels[1:]), start=1):
            for i, (a, b) in enumerate(zip(cur, nxt)):
                if not a * a <= b <= a ** (2 * self.m):
                    raise ValueError(
                        f"growth violated at level {v}, coordinate {i}: need {a}^2 <= {b} <= {a}^{2 * self.m}"
                    )
                if b % a:
                    raise ValueError(f"divisibility violated at level {v}, coordinate {i}: {a} does not divide {b}")
        for v, lev in enumerate(levels, start=1):
            if max(lev) > self.C * min(lev):
                raise ValueError(f"comparability violated at level {v}: {lev} with C={self.C}")

    @property
    def d(self) -> int:
        return len(self.levels[0])

    @property
    def L(self) -> int:
        return len(self.levels)

    def n(self, v: int) -> tuple[int, ...]:
        """Periods at level v; level 0 is all ones."""
        if v == 0:
            return (1,) * self.d
        if not 1 <= v <= self.L:
            raise DepthExhausted(f"level {v} not available (hierarchy depth {self.L})")
        return self.levels[v - 1]

    def denominator(self, v: int) -> int:
        """W_v, the reciprocal of the level-v weight."""
        return math.prod(a * a * b for a, b in zip(self.n(v - 1), self.n(v)))

    @cached_property
    def _denominators(self) -> tuple[int, ...]:
        return (1,) + tuple(self.denominator(v) for v in range(1, self.L + 1))

    def to_dict(self) -> dict:
        return {"levels": [list(lev) for lev in self.levels], "m": self.m, "C": self.C}


def tower_hierarchy(d: int, base: int, L: int) -> ScaleHierarchy:
    """Repeated squaring ``n_v = base^(2^(v-1))`` in every direction (m = C = 1)."""
    if d < 1 or base < 2 or L < 1:
        raise ValueError(f"need d >= 1, base >= 2, L >= 1 (got {d}, {base}, {L})")
    levels = []
    n = base
    for _ in range(L):
        levels.append((n,) * d)
        n = n * n
    return ScaleHierarchy(tuple(levels), m=1, C=1)


def residue(p: int, n: int) -> int:
    if n < 1:
        raise ValueError(f"modulus must be positive, got {n}")
    return int(p) % int(n)


def level_weight(hier: ScaleHierarchy, v: int) -> Fraction:
    if not 1 <= v <= hier.L:
        raise DepthExhausted(f"level {v} not available (hierarchy depth {hier.L})")
    return Fraction(1, hier._denominators[v])


def _check_level(hier: ScaleHierarchy, k: int) -> None:
    if not 0 <= k <= hier.L:
        raise DepthExhausted(f"truncation level {k} exceeds hierarchy depth {hier.L}")


def truncated_numerator(hier: ScaleHierarchy, t, k: int) -> int:
    """Integer ``W_k * V_k(t)``."""
    _check_level(hier, k)
    if len(t) != hier.d:
        raise ValueError(f"point {tuple(t)} has wrong dimension for d={hier.d}")
    if k == 0:
        return 0
    Wk = hier._denominators[k]
    total = 0
    for v in range(1, k + 1):
        scale = Wk // hier._denominators[v]
        total += scale * sum(int(x) % n for x, n in zip(t, hier.n(v)))
    return total


def eval_truncated(hier: ScaleHierarchy, t, k: int) -> Fraction:
    return Fraction(truncated_numerator(hier, t, k), hier._denominators[k] if k else 1)


def _profile_dtype(hier: ScaleHierarchy, k: int):
    Wk = hier._denominators[k] if k else 1
    bound = hier.d * sum(max(hier.n(v)) * (Wk // hier._denominators[v]) for v in range(1, k + 1))
    return np.int64 if bound < _INT64_SAFE else object


def coordinate_profile(hier: ScaleHierarchy, i: int, x, k: int) -> np.ndarray:
    """``W_k * sum_{v<=k} a_v^(i)(x) / W_v`` for an integer array ``x``.

    ``V_k(t)`` is the sum of these profiles over the coordinates of ``t``.
    """
    _check_level(hier, k)
    dtype = _profile_dtype(hier, k)
    x = np.asarray(x, dtype=dtype) if dtype is object else np.asarray(x, dtype=np.int64)
    out = np.zeros(x.shape, dtype=dtype)
    if k == 0:
        return out
    Wk = hier._denominators[k]
    for v in range(1, k + 1):
        n = hier.n(v)[i]
        scale = Wk // hier._denominators[v]
        if dtype is object:
            out = out + np.array([(int(xx) % n) * scale for xx in x.ravel()], dtype=object).reshape(x.shape)
        else:
            out += np.mod(x, n) * scale
    return out


def truncated_values(hier: ScaleHierarchy, coords: np.ndarray, k: int) -> np.ndarray:
    """Integer numerators ``W_k * V_k`` at each row of ``coords`` (shape (N, d))."""
    coords = np.asarray(coords)
    total = None
    for i in range(hier.d):
        prof = coordinate_profile(hier, i, coords[:, i], k)
        total = prof if total is None else total + prof
    return total


def numerators_to_float(num: np.ndarray, denom: int) -> np.ndarray:
    """Correctly rounded ``num / denom`` as float64."""
    if num.dtype != object and denom < 2**53 and np.max(np.abs(num), initial=0) < 2**53:
        return num.astype(np.float64) / float(denom)
    return np.array([int(a) / denom for a in num.ravel()], dtype=np.float64).reshape(num.shape)


def level_term(hier: ScaleHierarchy, v: int) -> Fraction:
    """Per-level majorant ``d * max_i n_v^(i) / W_v`` of ``|V_v - V_{v-1}|``."""
    return Fraction(hier.d * max(hier.n(v)), hier._denominators[v])


def tail_bound(hier: ScaleHierarchy, k: int) -> Fraction:
    """Rigorous upper bound on ``sup_t |V(t) - V_k(t)|``.

    Sums the per-level majorants for levels k+1..L and closes the infinite
    remainder with one extra copy of the level-L term: consecutive majorants
    shrink by at least ``1/max_i n_v^(i) <= 1/2`` under the growth constraint.
    """
    if not 0 <= k < hier.L:
        raise DepthExhausted(f"tail bound at level {k} needs hierarchy depth > {k}, have {hier.L}")
    terms = [level_term(hier, v) for v in range(k + 1, hier.L + 1)]
    return sum(terms, Fraction(0)) + terms[-1]


@dataclass(frozen=True)
class CertifiedValue:
    """Enclosure ``[center - radius, center + radius]`` with exact endpoints."""

    center: Fraction
    radius: Fraction

    def __post_init__(self):
        object.__setattr__(self, "center", Fraction(self.center))
        object.__setattr__(self, "radius", Fraction(self.radius))
        if self.radius < 0:
            raise ValueError("radius must be non-negative")

    @property
    def lo(self) -> Fraction:
        return self.center - self.radius

    @property
    def hi(self) -> Fraction:
        return self.center + self.radius

    def __contains__(self, x) -> bool:
        return self.lo <= Fraction(x) <= self.hi

    def __float__(self) -> float:
        return float(self.center)

    def to_dict(self) -> dict:
        return {"center": rational_dict(self.center), "radius": rational_dict(self.radius)}


def rational_dict(x: Fraction) -> dict:
    x = Fraction(x)
    return {"exact": f"{x.numerator}/{x.denominator}", "decimal": float(x)}


def certified_level(hier: ScaleHierarchy, target_radius) -> int:
    """Smallest level k whose tail bound is within ``target_radius``."""
    target = Fraction(target_radius)
    for k in range(hier.L):
        if tail_bound(hier, k) <= target:
            return k
    raise DepthExhausted(
        f"hierarchy of depth {hier.L} cannot reach radius {target_radius}; "
        f"best available is {float(tail_bound(hier, hier.L - 1)):.3e}"
    )


def eval_certified(hier: ScaleHierarchy, t, target_radius) -> CertifiedValue:
    k = certified_level(hier, target_radius)
    return CertifiedValue(eval_truncated(hier, t, k), tail_bound(hier, k))


@dataclass(frozen=True)
class ApproxFunction:
    """``Q(x) = K * max(M, x)^P``: a plateau below ``M`` and a power law above."""

    K: Fraction
    P: int
    M: int

    def __call__(self, x):
        if isinstance(x, (int, Fraction, np.integer)):
            x = Fraction(int(x)) if isinstance(x, np.integer) else Fraction(x)
            if x < 0:
                raise ValueError("Q is defined on [0, inf)")
            return self.K * max(Fraction(self.M), x) ** self.P
        x = float(x)
        if x < 0:
            raise ValueError("Q is defined on [0, inf)")
        return math.exp(self.log(x))

    def log(self, x: float) -> float:
        return math.log(self.K) + self.P * math.log(max(float(self.M), float(x)))


def approx_Q(hier: ScaleHierarchy) -> ApproxFunction:
    P = 2 * hier.d + 2 * hier.d * hier.m
    return ApproxFunction(K=Fraction(2 * hier.C**P), P=P, M=max(hier.n(1)))


def _as_Q(obj) -> ApproxFunction:
    return obj if isinstance(obj, ApproxFunction) else approx_Q(obj)


def log_small_divisor_q(Q, t: float) -> float:
    """``log q(t)`` with ``q(t) = t^-4 sup_{x>=0} Q(x) e^{-tx}``, in closed form.

    On the plateau the supremum sits at x = 0. On ``[M, inf)`` the map
    ``x -> K x^P e^{-tx}`` peaks at ``x = P/t`` when that point lies in range,
    and at ``x = M`` otherwise, where it is dominated by the plateau value.
    """
    Q = _as_Q(Q)
    t = float(t)
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    logK = math.log(Q.K)
    plateau = logK + Q.P * math.log(Q.M)
    xstar = Q.P / t
    power = logK + Q.P * math.log(xstar) - Q.P if xstar >= Q.M else plateau - t * Q.M
    return -4.0 * math.log(t) + max(plateau, power)


def small_divisor_q(Q, t: float) -> float:
    return math.exp(log_small_divisor_q(Q, t))


def kam_h_upper(Q, t: float, rtol: float = 1e-12, max_terms: int = 1000) -> float:
    """Upper bound on ``h(t)`` from the schedule ``t_i = t 2^-(i+1)``, i >= 0.

    The schedule is admissible (non-increasing, ``t_0 <= t``, sum ``t``), so the
    weighted product along it bounds the infimum from above.
    """
    return math.exp(kam_log_product(Q, [t * 2.0 ** -(i + 1) for i in range(max_terms)], rtol=rtol))


def kam_log_product(Q, schedule, rtol: float = 1e-12) -> float:
    """``sum_i 2^-(i+1) log q(t_i)`` along a schedule, stopped once negligible.

    Truncation stops when the next two contributions are both below ``rtol``
    (relative change of the product); the terms decay like ``i 2^-i``.
    """
    Q = _as_Q(Q)
    total = 0.0
    small = 0
    for i, ti in enumerate(schedule):
        if ti <= 0:
            break
        term = 2.0 ** -(i + 1) * log_small_divisor_q(Q, ti)
        total += term
        small = small + 1 if abs(term) < rtol else 0
        if small >= 2 and i > 4:
            break
    return total


@dataclass(frozen=True)
class ShiftMargin:
    shift: tuple[int, ...]
    certified_min: Fraction
    required: Fraction
    argmin: tuple[int, ...]

    @property
    def margin(self) -> Fraction:
        return self.certified_min - self.required

    @property
    def passed(self) -> bool:
        return self.margin >= 0

    def to_dict(self) -> dict:
        return {
            "shift": list(self.shift),
            "certified_min": rational_dict(self.certified_min),
            "required": rational_dict(self.required),
            "margin": rational_dict(self.margin),
            "argmin": list(self.argmin),
            "passed": self.passed,
        }


@dataclass(frozen=True)
class DistalityCertificate:
    hierarchy: ScaleHierarchy
    k_eval: int
    K_max: int
    tail: Fraction
    shifts: tuple[ShiftMargin, ...] = field(repr=False)

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.shifts)

    @property
    def failures(self) -> list[ShiftMargin]:
        return [s for s in self.shifts if not s.passed]

    @property
    def min_margin(self) -> Fraction:
        return min(s.margin for s in self.shifts)

    def to_dict(self) -> dict:
        return {
            "hierarchy": self.hierarchy.to_dict(),
            "k_eval": self.k_eval,
            "K_max": self.K_max,
            "tail_bound": rational_dict(self.tail),
            "passed": self.passed,
            "n_shifts": len(self.shifts),
            "n_failures": len(self.failures),
            "min_margin": rational_dict(self.min_margin),
            "shifts": [s.to_dict() for s in self.shifts],
        }


def certify_distality(hier: ScaleHierarchy, k_eval: int, K_max: int) -> DistalityCertificate:
    """Check ``|V(i) - V(i+s)| >= 1/Q(|s|)`` for all ``0 < |s| <= K_max``.

    ``V_{k_eval}`` is periodic with period ``n_{k_eval}``, so its infimum over
    Z^d is a minimum over one fundamental domain; the remainder contributes at
    most ``2 * tail_bound(k_eval)`` to any difference.  Shifts that fail are
    reported with their margin and offending site rather than raised.
    """
    if K_max < 1:
        raise PreconditionError("K_max must be >= 1 (the zero shift is excluded)")
    if not 1 <= k_eval < hier.L:
        raise PreconditionError(f"k_eval must lie in [1, {hier.L - 1}] so a tail bound exists, got {k_eval}")
    periods = hier.n(k_eval)
    if any(n <= 2 * K_max for n in periods):
        raise PreconditionError(f"periods {periods} at level {k_eval} must exceed 2*K_max = {2 * K_max}")

    Q = approx_Q(hier)
    tail = tail_bound(hier, k_eval)
    W = hier.denominator(k_eval)
    profiles = [coordinate_profile(hier, i, np.arange(n), k_eval) for i, n in enumerate(periods)]

    results = []
    for s in itertools.product(range(-K_max, K_max + 1), repeat=hier.d):
        if not any(s):
            continue
        diff = None
        for i, (prof, n) in enumerate(zip(profiles, periods)):
            f = prof - np.roll(prof, -s[i])  # f(x) = g(x) - g((x + s_i) mod n)
            f = f.reshape((1,) * i + (n,) + (1,) * (hier.d - i - 1))
            diff = f if diff is None else diff + f
        absdiff = np.abs(diff)
        flat = int(np.argmin(absdiff))
        site = tuple(int(c) for c in np.unravel_index(flat, absdiff.shape))
        results.append(
            ShiftMargin(
                shift=s,
                certified_min=Fraction(int(absdiff.flat[flat]), W) - 2 * tail,
                required=1 / Q(sup_norm(s)),
                argmin=site,
            )
        )
    return DistalityCertificate(hier, k_eval, K_max, tail, tuple(results))
