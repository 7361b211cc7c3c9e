"""Dense symmetric eigensolves on boxes, and the propagator built from them."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .bands import FiniteOperator
from .errors import PreconditionError, SolverError
from .lattice import Box

MAX_DENSE_SITES = 4096
SIGN_THRESHOLD = 1e-12


@dataclass(frozen=True)
class EigenSystem:
    """Eigenpairs of a finite operator; column j of ``eigenvectors`` pairs with ``eigenvalues[j]``."""

    operator: FiniteOperator = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)
    residual_tol: float
    residual: float
    gram_error: float

    @property
    def box(self) -> Box:
        return self.operator.box

    @property
    def epsilon(self) -> float:
        return self.operator.epsilon

    @property
    def periodic(self) -> bool:
        return self.operator.periodic

    def __len__(self) -> int:
        return len(self.eigenvalues)


def _fix_signs(U: np.ndarray) -> np.ndarray:
    first = np.argmax(np.abs(U) > SIGN_THRESHOLD, axis=0)
    signs = np.sign(U[first, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs


def eig_sym(H: FiniteOperator, tol: float = 1e-10) -> EigenSystem:
    """Ascending eigenvalues and orthonormal eigenvectors, first significant component positive.

    Raises :class:`SolverError` if LAPACK fails or the residual/orthonormality
    invariants are not met at ``tol``.
    """
    N = H.box.size
    if N > MAX_DENSE_SITES:
        raise PreconditionError(f"box has {N} sites, dense solve budget is {MAX_DENSE_SITES}")
    M = H.dense()
    try:
        lam, U = np.linalg.eigh(M)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"dense eigensolver did not converge on {N} sites: {exc}") from exc
    U = _fix_signs(U)
    norm = float(np.max(np.abs(lam), initial=0.0))
    residual = float(np.max(np.linalg.norm(M @ U - U * lam, axis=0), initial=0.0))
    gram = float(np.max(np.abs(U.T @ U - np.eye(N)), initial=0.0))
    if residual > tol * (1.0 + norm) or gram > tol:
        raise SolverError(f"eigenpairs fail invariants: residual {residual:.2e}, gram error {gram:.2e}, tol {tol:.1e}")
    return EigenSystem(H, lam, U, tol, residual, gram)


@dataclass(frozen=True)
class MatchReport:
    max_deviation: float
    bound: float
    worst_index: int

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.bound

    def to_dict(self) -> dict:
        return {
            "max_deviation": self.max_deviation,
            "bound": self.bound,
            "worst_index": self.worst_index,
            "passed": self.passed,
        }


def match_eigenvalues(E: EigenSystem, potential=None, epsilon: float | None = None) -> MatchReport:
    """Sorted matching of eigenvalues to potential values, against the ``2 d eps`` bound.

    The hopping term has norm at most ``2 d eps``, so Weyl's inequality bounds
    the deviation of the j-th eigenvalue from the j-th smallest potential value.
    """
    V = np.sort(np.asarray(E.operator.potential if potential is None else potential, dtype=np.float64).ravel())
    eps = E.epsilon if epsilon is None else epsilon
    dev = np.abs(E.eigenvalues - V)
    j = int(np.argmax(dev))
    return MatchReport(float(dev[j]), 2 * E.box.dim * eps, j)


def _index(E: EigenSystem, p) -> int:
    try:
        return E.box.index(tuple(p))
    except IndexError as exc:
        raise PreconditionError(str(exc)) from None


def evolution_amplitude(E: EigenSystem, n, m, t):
    """``<delta_n, exp(-itH) delta_m>``; ``t`` may be an array of times."""
    i, j = _index(E, n), _index(E, m)
    w = E.eigenvectors[i] * E.eigenvectors[j]
    t = np.asarray(t, dtype=np.float64)
    amp = np.exp(-1j * np.multiply.outer(t, E.eigenvalues)) @ w
    return complex(amp) if amp.ndim == 0 else amp


def dynamical_kernel(E: EigenSystem, n, m) -> float:
    """``sum_j |u_j(n)| |u_j(m)|``, a time-uniform bound on the amplitude."""
    i, j = _index(E, n), _index(E, m)
    return float(np.abs(E.eigenvectors[i]) @ np.abs(E.eigenvectors[j]))


def kernel_matrix(E: EigenSystem) -> np.ndarray:
    A = np.abs(E.eigenvectors)
    return A @ A.T


def write_eigenvalues_csv(path, E: EigenSystem) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "eigenvalue"])
        for j, lam in enumerate(E.eigenvalues):
            w.writerow([j, repr(float(lam))])


def read_eigenvalues_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return np.array([float(r["eigenvalue"]) for r in rows])


_MAGIC = b"LPLOC-EIGVEC\n"


def write_eigenvectors(path, E: EigenSystem) -> None:
    """Binary dump: magic line, one JSON header line, then float64 little-endian site-major data."""
    header = {
        "box": E.box.to_dict(),
        "n_sites": E.box.size,
        "n_vectors": len(E),
        "dtype": "<f8",
        "layout": "site-major; row = site in lexicographic box order, column = eigenvalue index ascending",
        "epsilon": E.epsilon,
        "boundary": E.operator.boundary,
    }
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(np.ascontiguousarray(E.eigenvectors, dtype="<f8").tobytes())


def read_eigenvectors(path) -> tuple[dict, np.ndarray]:
    with open(path, "rb") as fh:
        if fh.readline() != _MAGIC:
            raise ValueError(f"{path} is not an eigenvector dump")
        header = json.loads(fh.readline())
        data = np.frombuffer(fh.read(), dtype=header["dtype"])
    return header, data.reshape(header["n_sites"], header["n_vectors"])
