"""Random instance generators used by the verification suites and tests.

Every function takes an explicit ``numpy.random.Generator``.
"""

from __future__ import annotations

import numpy as np


def ginibre(rng: np.random.Generator, rows: int, cols: int | None = None) -> np.ndarray:
    cols = rows if cols is None else cols
    return rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))


def unitary(rng: np.random.Generator, dim: int) -> np.ndarray:
    """Haar-random unitary (QR of a Ginibre matrix with phase fix)."""
    q, r = np.linalg.qr(ginibre(rng, dim))
    d = np.diag(r)
    return q * (d / np.abs(d))


def hermitian(rng: np.random.Generator, dim: int, norm: float | None = None) -> np.ndarray:
    g = ginibre(rng, dim)
    h = 0.5 * (g + g.conj().T)
    if norm is not None:
        h *= norm / np.max(np.abs(np.linalg.eigvalsh(h)))
    return h


def unit_norm_hermitian(rng: np.random.Generator, dim: int) -> np.ndarray:
    return hermitian(rng, dim, norm=1.0)


def density(rng: np.random.Generator, dim: int, rank: int | None = None) -> np.ndarray:
    """Random density matrix of the given rank (Hilbert-Schmidt measure)."""
    g = ginibre(rng, dim, dim if rank is None else rank)
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def pure_state(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def projector(rng: np.random.Generator, dim: int, rank: int) -> np.ndarray:
    q, _ = np.linalg.qr(ginibre(rng, dim, rank))
    return q @ q.conj().T


def contraction(rng: np.random.Generator, dim: int) -> np.ndarray:
    """Random Hermitian ``Pi`` with ``0 <= Pi <= I``."""
    w = rng.uniform(0.0, 1.0, dim)
    u = unitary(rng, dim)
    return (u * w) @ u.conj().T


def binary_density(rng: np.random.Generator, dim: int, m: int | None = None,
                   ratio: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Density matrix with two distinct eigenvalues in a random basis.

    Returns ``(rho, R)`` with ``R`` the projector onto the larger eigenvalue.
    ``ratio`` is ``lambda1 / lambda2`` (log-uniform in ``[1.01, 1e4]`` if omitted).
    """
    if m is None:
        m = int(rng.integers(1, dim))
    if ratio is None:
        ratio = float(10 ** rng.uniform(np.log10(1.01), 4.0))
    lam2 = 1.0 / (m * ratio + (dim - m))
    lam1 = ratio * lam2
    w = np.array([lam1] * m + [lam2] * (dim - m))
    u = unitary(rng, dim)
    rho = (u * w) @ u.conj().T
    r = u[:, :m] @ u[:, :m].conj().T
    return rho, r
