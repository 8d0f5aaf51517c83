"""Two-state ensembles and their mixing rate.

An ensemble ``(1-p) rho0 + p rho1`` in which only ``rho1`` evolves under
``exp(iHt)`` changes its entropy at the mixing rate. Most functions work on
the canonical triple ``(p, rho, Pi)`` with ``rho`` the average state and
``Pi = p rho^(-1/2) rho1 rho^(-1/2)``.

Rank-deficient average states are handled on their support: ``rho^(-1/2)``
is a pseudo-inverse, ``log rho`` is zero on the kernel, and the resulting
triple carries ``support_restricted=True``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ratelab import linalg
from ratelab.config import DEFAULT_TOLERANCES as TOL
from ratelab.entangling import BipartitePureState, entangling_rate
from ratelab.errors import (
    DimensionMismatchError,
    DomainError,
    InadmissibleError,
    NotBinaryError,
    RatelabError,
)


@dataclass(frozen=True)
class Ensemble:
    p: float  # weight of rho1
    rho0: np.ndarray
    rho1: np.ndarray

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise InadmissibleError(f"p = {self.p} outside [0, 1]")
        r0 = linalg.density_matrix(self.rho0)
        r1 = linalg.density_matrix(self.rho1)
        if r0.shape != r1.shape:
            raise DimensionMismatchError(f"rho0 {r0.shape} and rho1 {r1.shape} differ")
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "rho0", r0)
        object.__setattr__(self, "rho1", r1)

    @property
    def average(self) -> np.ndarray:
        return (1.0 - self.p) * self.rho0 + self.p * self.rho1

    def transpose(self) -> "Ensemble":
        """Swap the roles of the two states."""
        return Ensemble(1.0 - self.p, self.rho1, self.rho0)

    def evolved_average(self, h, t: float) -> np.ndarray:
        u = linalg.unitary(h, t)
        return (1.0 - self.p) * self.rho0 + self.p * (u @ self.rho1 @ u.conj().T)


@dataclass(frozen=True)
class EnsembleTriple:
    """Canonical data ``(p, rho, Pi)``; admissible iff ``0 <= Pi <= I`` and
    ``Tr(Pi rho) = p``."""

    p: float
    rho: np.ndarray
    Pi: np.ndarray
    support_restricted: bool = False

    def __post_init__(self):
        rho = linalg.density_matrix(self.rho)
        pi = linalg.hermitian(self.Pi, tol=1e-9)
        if rho.shape != pi.shape:
            raise DimensionMismatchError(f"rho {rho.shape} and Pi {pi.shape} differ")
        w = np.linalg.eigvalsh(pi)
        if w[0] < -TOL.admissible_eig or w[-1] > 1.0 + TOL.admissible_eig:
            raise InadmissibleError(f"Pi eigenvalues span [{w[0]:.3e}, {w[-1]:.3e}], not in [0, 1]")
        tr = np.trace(pi @ rho).real
        if abs(tr - self.p) > TOL.admissible_trace:
            raise InadmissibleError(f"Tr(Pi rho) = {tr!r} differs from p = {self.p!r}")
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "Pi", pi)

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    def transpose(self) -> "EnsembleTriple":
        return EnsembleTriple(1.0 - self.p, self.rho, np.eye(self.dim) - self.Pi,
                              self.support_restricted)


def ensemble_to_triple(e: Ensemble) -> EnsembleTriple:
    rho = e.average
    spec = linalg.eigendecompose(rho)
    keep = spec.eigenvalues > TOL.rank_cutoff
    restricted = not bool(np.all(keep))
    if restricted:
        # rho1 must live inside supp(rho); otherwise no triple exists
        kernel = spec.eigenvectors[:, ~keep]
        leak = np.linalg.norm(kernel.conj().T @ (e.p * e.rho1) @ kernel, 2)
        if leak > TOL.inadmissible_eig:
            raise InadmissibleError(f"rho1 has weight {leak:.3e} outside the support of rho")
    inv_sqrt = linalg.inverse_sqrt_on_support(rho)
    pi = e.p * inv_sqrt @ e.rho1 @ inv_sqrt
    return EnsembleTriple(e.p, rho, 0.5 * (pi + pi.conj().T), restricted)


def triple_to_ensemble(t: EnsembleTriple) -> Ensemble:
    if not 0.0 < t.p < 1.0:
        raise InadmissibleError(f"p = {t.p} must lie strictly inside (0, 1)")
    sq = linalg.matrix_sqrt(t.rho)
    rho1 = sq @ t.Pi @ sq / t.p
    rho0 = (t.rho - t.p * rho1) / (1.0 - t.p)
    rho0 = 0.5 * (rho0 + rho0.conj().T)
    lo = np.linalg.eigvalsh(rho0)[0]
    if lo < -TOL.inadmissible_eig:
        raise InadmissibleError(f"recovered rho0 has eigenvalue {lo:.3e}")
    return Ensemble(t.p, rho0, 0.5 * (rho1 + rho1.conj().T))


def sandwich(t: EnsembleTriple) -> np.ndarray:
    """``rho^(1/2) [Pi, log rho] rho^(1/2)`` (anti-Hermitian)."""
    sq = linalg.matrix_sqrt(t.rho)
    log = linalg.matrix_log2(t.rho).op
    return sq @ linalg.commutator(t.Pi, log) @ sq


def rate_operator(t: EnsembleTriple) -> np.ndarray:
    """Hermitian ``X`` with ``mixing_rate(t, H) = Tr(H X)``."""
    return linalg.hermitian(-1j * sandwich(t), tol=1e-9)


def mixing_rate(t: EnsembleTriple, h) -> float:
    """``-i Tr(H rho^(1/2) [Pi, log rho] rho^(1/2))``."""
    h = linalg.hermitian(h)
    if h.shape != t.rho.shape:
        raise DimensionMismatchError(f"H {h.shape} does not match rho {t.rho.shape}")
    return float(np.trace(h @ rate_operator(t)).real)


def ensemble_mixing_rate(e: Ensemble, h) -> float:
    """``-i p Tr(H [rho1, log rho])`` directly from the ensemble."""
    h = linalg.hermitian(h)
    log = linalg.matrix_log2(e.average).op
    return float((-1j * e.p * np.trace(h @ linalg.commutator(e.rho1, log))).real)


def max_mixing_rate(t: EnsembleTriple) -> tuple[float, np.ndarray]:
    """Maximum over ``||H|| = 1``: the trace norm of the sandwich."""
    h_opt, value = linalg.optimal_hamiltonian(rate_operator(t))
    return value, h_opt


def binary_split(rho, gap: float = TOL.cluster_gap,
                 spread: float = TOL.cluster_spread) -> tuple[float, float, np.ndarray]:
    """Split a binary spectrum into ``(lambda1, lambda2, R)``.

    ``R`` projects onto the ``lambda1`` eigenspace (``lambda1 > lambda2``).
    """
    spec = linalg.eigendecompose(rho)
    w = spec.eigenvalues
    jumps = np.diff(w)
    big = np.flatnonzero(jumps > gap)
    if len(big) != 1:
        raise NotBinaryError(f"found {len(big) + 1} eigenvalue clusters, expected 2")
    k = int(big[0]) + 1
    low, high = w[:k], w[k:]
    if np.ptp(low) > spread or np.ptp(high) > spread:
        raise NotBinaryError("eigenvalue cluster spread exceeds tolerance")
    u = spec.eigenvectors[:, k:]
    return float(high.mean()), float(low.mean()), u @ u.conj().T


def binary_sandwich_identity(t: EnsembleTriple) -> tuple[np.ndarray, np.ndarray]:
    """Both sides of ``rho^(1/2)[Pi, log rho]rho^(1/2)
    = log(l1/l2) sqrt(l1 l2) [Pi, R]`` for a binary-spectrum ``rho``."""
    lam1, lam2, r = binary_split(t.rho)
    rhs = math.log2(lam1 / lam2) * math.sqrt(lam1 * lam2) * linalg.commutator(t.Pi, r)
    return sandwich(t), rhs


def holder_commutator_bound(pi, r) -> tuple[float, float]:
    """``(||[Pi, R]||_1, 2 sqrt(Tr(Pi R) Tr(Pi R_perp)))``."""
    pi = linalg.hermitian(pi)
    r = linalg.hermitian(r)
    lhs = linalg.trace_norm(1j * linalg.commutator(pi, r))
    a = max(np.trace(pi @ r).real, 0.0)
    b = max(np.trace(pi @ (np.eye(len(r)) - r)).real, 0.0)
    return lhs, 2.0 * math.sqrt(a * b)


def _reduce_projector(p: np.ndarray, r_basis: np.ndarray, rp_basis: np.ndarray,
                      cut: float) -> np.ndarray:
    # Block C = R P R_perp. Its column space is the A' block and the column
    # space of C^dagger the B' block; the rest of P (A'' and B'') only has
    # eigenvalues 0 and 1 and commutes with R.
    c = r_basis.conj().T @ p @ rp_basis
    u, s, vh = np.linalg.svd(c)
    k = int(np.count_nonzero(s > cut))
    if k == 0:
        return np.zeros_like(p)
    a_prime = r_basis @ u[:, :k]
    b_prime = rp_basis @ vh[:k].conj().T
    q = a_prime @ a_prime.conj().T + b_prime @ b_prime.conj().T
    return q @ p @ q


def canonical_reduce(pi, r, cut: float = TOL.block_split) -> np.ndarray:
    """Return ``Pi'`` with ``0 <= Pi' <= Pi``, ``[Pi, R] = [Pi', R]`` and
    ``Tr Pi' <= rank R``.

    ``Pi`` is split into spectral layers ``sum_k (mu_k - mu_{k+1}) P_k`` with
    ``P_k`` the projector onto the top ``k`` eigenvectors; each layer is reduced
    separately and the results are recombined with the same weights.
    """
    pi = linalg.hermitian(pi)
    r = linalg.hermitian(r)
    spec_r = linalg.eigendecompose(r)
    is_one = spec_r.eigenvalues > 0.5
    r_basis = spec_r.eigenvectors[:, is_one]
    rp_basis = spec_r.eigenvectors[:, ~is_one]
    if r_basis.shape[1] == 0 or rp_basis.shape[1] == 0:
        # R is 0 or I: everything commutes, Pi' = 0 works
        return np.zeros_like(pi)
    spec = linalg.eigendecompose(pi)
    mu = np.clip(spec.eigenvalues[::-1], 0.0, 1.0)  # descending
    vecs = spec.eigenvectors[:, ::-1]
    weights = mu - np.append(mu[1:], 0.0)
    out = np.zeros_like(pi)
    for k, w in enumerate(weights, start=1):
        if w <= 0.0:
            continue
        layer = vecs[:, :k] @ vecs[:, :k].conj().T
        out += w * _reduce_projector(layer, r_basis, rp_basis, cut)
    return 0.5 * (out + out.conj().T)


def g_function(x1: float, x2: float, q: float) -> float:
    """``2 log2(x1/x2) sqrt(x1 x2 (q - x2)(x1 - q)) / (x1 - x2)``.

    Domain ``0 <= x2 <= q <= x1 <= 1`` with ``q <= 1/2``. At ``x2 = 0`` the
    value is the limit 0. ``x1 = x2`` forces ``x1 = x2 = q`` where 0 is returned.
    """
    if not (0.0 <= x2 <= q <= x1 <= 1.0 and q <= 0.5):
        raise DomainError(f"need 0 <= x2 <= q <= x1 <= 1, q <= 1/2; got {x1}, {x2}, {q}")
    if x1 == x2 or x2 == 0.0 or x1 == q or x2 == q:
        return 0.0
    root = math.sqrt(x1 * x2 * (q - x2) * (x1 - q)) / (x1 - x2)
    return 2.0 * math.log2(x1 / x2) * root


def g_function_grid(x1, x2, q: float) -> np.ndarray:
    """Vectorized :func:`g_function` over broadcastable arrays (no domain check)."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        root = np.sqrt(np.clip(x1 * x2 * (q - x2) * (x1 - q), 0.0, None)) / (x1 - x2)
        val = 2.0 * np.log2(x1 / x2) * root
    return np.where((x1 > x2) & (x2 > 0) & (x1 > q) & (x2 < q), val, 0.0)


def sim_binary_bound(t: EnsembleTriple) -> tuple[float, float]:
    """``(Lambda(E), 6 h2(p))`` for a binary-spectrum average state.

    For ``p > 1/2`` the transposed ensemble is used; it has the same
    maximal rate and the same entropy bound.
    """
    binary_split(t.rho)
    if t.p > 0.5:
        t = t.transpose()
    lam, _ = max_mixing_rate(t)
    return lam, 6.0 * linalg.binary_entropy(t.p)


@dataclass(frozen=True)
class SieReduction:
    triple: EnsembleTriple
    mu: np.ndarray
    tau: np.ndarray
    mu_min_eig: float


def sie_reduction(rho_ab, dims) -> SieReduction:
    """Write ``rho_A (x) I/B = B^-2 rho_AB + (1 - B^-2) mu_AB`` and return the
    ensemble ``(p = B^-2, rho = rho_A (x) I/B, rho1 = rho_AB)``."""
    da, db = (int(d) for d in dims)
    if db < 2:
        raise DimensionMismatchError("B must be at least 2")
    rho_ab = linalg.density_matrix(rho_ab)
    rho_a = linalg.partial_trace(rho_ab, (da, db), keep="first")
    tau = np.kron(rho_a, np.eye(db) / db)
    p = 1.0 / db**2
    mu = (tau - p * rho_ab) / (1.0 - p)
    mu = 0.5 * (mu + mu.conj().T)
    lo = float(np.linalg.eigvalsh(mu)[0])
    if lo < -1e-6:
        raise RatelabError(f"mu_AB has eigenvalue {lo:.3e}; decomposition lemma violated")
    inv_sqrt = linalg.inverse_sqrt_on_support(tau)
    pi = p * inv_sqrt @ rho_ab @ inv_sqrt
    restricted = bool(np.linalg.eigvalsh(tau)[0] <= TOL.rank_cutoff)
    triple = EnsembleTriple(p, tau, 0.5 * (pi + pi.conj().T), restricted)
    return SieReduction(triple, mu, tau, lo)


def sie_gamma_expression(rho_ab, tau, h) -> float:
    """``-i Tr(H [rho_AB, log tau_AB])``."""
    log = linalg.matrix_log2(tau).op
    return float((-1j * np.trace(linalg.hermitian(h) @ linalg.commutator(rho_ab, log))).real)


def purification(rho) -> np.ndarray:
    """``(rho^(1/2) (x) I)|I>`` as a ``D x D`` amplitude matrix."""
    return linalg.matrix_sqrt(rho)


def ensemble_to_entangling_embedding(e: Ensemble, h) -> tuple[BipartitePureState, np.ndarray]:
    """State on ``A (x) B (x) b`` (``A = b = D``, ``B = 2``) and ``H~ = H (x) |1><1|``
    whose entangling rate equals the mixing rate of ``(e, H)``."""
    h = linalg.hermitian(h)
    dim = e.rho0.shape[0]
    if h.shape != (dim, dim):
        raise DimensionMismatchError(f"H {h.shape} does not match ensemble dimension {dim}")
    amps = np.zeros((dim, 2, dim), dtype=complex)
    amps[:, 0, :] = math.sqrt(1.0 - e.p) * purification(e.rho0)
    amps[:, 1, :] = math.sqrt(e.p) * purification(e.rho1)
    one = np.diag([0.0, 1.0])
    state = BipartitePureState(amps.ravel(), (1, dim, 2, dim))
    return state, np.kron(h, one)


def embedding_rate(e: Ensemble, h) -> float:
    state, h_tilde = ensemble_to_entangling_embedding(e, h)
    return entangling_rate(state, h_tilde)
