"""Dense Hermitian linear algebra.

Operators are plain complex ``numpy`` arrays. The constructors
:func:`hermitian` and :func:`density_matrix` validate an array and return the
symmetrized copy that every other function in the package assumes.
All logarithms are base 2.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ratelab.config import DEFAULT_TOLERANCES as TOL
from ratelab.errors import (
    DegenerateInputError,
    DimensionMismatchError,
    NotHermitianError,
    SolverError,
)


def _square(m) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise DimensionMismatchError(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NotHermitianError("matrix has non-finite entries")
    return a


def hermitian(m, tol: float = TOL.hermitian_rel) -> np.ndarray:
    """Validate ``m`` as Hermitian and return ``(m + m^dagger) / 2``."""
    a = _square(m)
    scale = 1.0 + np.max(np.abs(a))
    err = np.max(np.abs(a - a.conj().T))
    if err > tol * scale:
        raise NotHermitianError(f"max|M - M^dagger| = {err:.3e} exceeds {tol * scale:.3e}")
    return 0.5 * (a + a.conj().T)


def density_matrix(m, eig_tol: float = TOL.density_eig,
                   trace_tol: float = TOL.density_trace) -> np.ndarray:
    """Validate ``m`` as a density matrix (Hermitian, PSD, unit trace)."""
    a = hermitian(m)
    tr = np.trace(a).real
    if abs(tr - 1.0) > trace_tol:
        raise DegenerateInputError(f"trace {tr!r} differs from 1")
    lo = np.linalg.eigvalsh(a)[0]
    if lo < -eig_tol:
        raise DegenerateInputError(f"negative eigenvalue {lo:.3e}")
    return a


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray  # ascending
    eigenvectors: np.ndarray  # columns

    def reconstruct(self, fn=None) -> np.ndarray:
        """Return ``U f(Lambda) U^dagger`` (``f`` defaults to identity)."""
        w = self.eigenvalues if fn is None else fn(self.eigenvalues)
        u = self.eigenvectors
        return (u * w) @ u.conj().T


def eigendecompose(m) -> Spectrum:
    a = hermitian(m)
    try:
        w, u = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise SolverError("eigensolver did not converge",
                          residual=float(np.linalg.norm(a - a.conj().T))) from exc
    scale = max(np.max(np.abs(w)), 1.0)
    residual = np.linalg.norm((u * w) @ u.conj().T - a, 2)
    if residual > TOL.reconstruction * scale:
        raise SolverError("eigendecomposition failed reconstruction check",
                          residual=float(residual))
    return Spectrum(w, u)


def trace_norm(m) -> float:
    return float(np.sum(np.abs(np.linalg.eigvalsh(hermitian(m)))))


def operator_norm(m) -> float:
    return float(np.max(np.abs(np.linalg.eigvalsh(hermitian(m)))))


class SupportedLog(NamedTuple):
    """Base-2 logarithm of a PSD operator restricted to its support."""

    op: np.ndarray
    support: np.ndarray  # projector onto eigenvalues > cutoff
    rank: int
    full_rank: bool


def matrix_log2(rho, rank_cutoff: float = TOL.rank_cutoff) -> SupportedLog:
    """``log2`` of ``rho`` on its support; kernel directions map to zero."""
    if rank_cutoff <= 0:
        raise ValueError("rank_cutoff must be positive")
    spec = eigendecompose(rho)
    keep = spec.eigenvalues > rank_cutoff
    rank = int(np.count_nonzero(keep))
    if rank == 0:
        raise DegenerateInputError("all eigenvalues are below the rank cutoff")
    u = spec.eigenvectors[:, keep]
    logs = np.log2(spec.eigenvalues[keep])
    op = (u * logs) @ u.conj().T
    support = u @ u.conj().T
    return SupportedLog(op, support, rank, rank == len(keep))


def matrix_sqrt(rho) -> np.ndarray:
    """PSD square root; tiny negative eigenvalues are clipped to zero."""
    return eigendecompose(rho).reconstruct(lambda w: np.sqrt(np.clip(w, 0.0, None)))


def inverse_sqrt_on_support(rho, rank_cutoff: float = TOL.rank_cutoff) -> np.ndarray:
    """Moore-Penrose inverse of ``rho^(1/2)``."""
    spec = eigendecompose(rho)
    w = spec.eigenvalues
    inv = np.zeros_like(w)
    keep = w > rank_cutoff
    inv[keep] = 1.0 / np.sqrt(w[keep])
    return spec.reconstruct(lambda _: inv)


def commutator(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"shapes {a.shape} and {b.shape} differ")
    return a @ b - b @ a


def _keep_index(keep) -> int:
    if keep in (0, "first", "A"):
        return 0
    if keep in (1, "second", "B"):
        return 1
    raise ValueError(f"keep must be 'first' or 'second', got {keep!r}")


def partial_trace(m, dims, keep="first") -> np.ndarray:
    """Trace out one factor of an operator on ``C^dA (x) C^dB``."""
    da, db = (int(d) for d in dims)
    a = np.asarray(m, dtype=complex)
    if a.shape != (da * db, da * db):
        raise DimensionMismatchError(f"dims {da}x{db} do not factor shape {a.shape}")
    t = a.reshape(da, db, da, db)
    if _keep_index(keep) == 0:
        return np.einsum("ijkj->ik", t)
    return np.einsum("ijil->jl", t)


def optimal_hamiltonian(x) -> tuple[np.ndarray, float]:
    """Maximize ``Tr(H x)`` over ``||H|| = 1``.

    The maximizer is ``sign(x)``, with the kernel of ``x`` assigned +1, and the
    maximum is the trace norm of ``x``.
    """
    spec = eigendecompose(x)
    w = spec.eigenvalues
    value = float(np.sum(np.abs(w)))
    if value == 0.0:
        return np.eye(len(w), dtype=complex), 0.0
    cut = TOL.rank_cutoff * np.max(np.abs(w))
    signs = np.where(w < -cut, -1.0, 1.0)
    return spec.reconstruct(lambda _: signs), value


def unitary(h, t: float) -> np.ndarray:
    """``exp(i h t)`` for Hermitian ``h``."""
    spec = eigendecompose(h)
    return spec.reconstruct(lambda w: np.exp(1j * w * t))


def entropy(rho, cutoff: float = 0.0) -> float:
    """Von Neumann entropy in bits."""
    w = np.linalg.eigvalsh(hermitian(rho))
    w = w[w > cutoff]
    return float(-np.sum(w * np.log2(w)))


def shannon_entropy(probs) -> float:
    p = np.asarray(probs, dtype=float)
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def binary_entropy(p: float) -> float:
    """``h2(p) = -p log2 p - (1-p) log2 (1-p)``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability {p!r} outside [0, 1]")
    return shannon_entropy([p, 1.0 - p])
