"""Entangling rate of pure bipartite states.

A state of ``a (x) A (x) B (x) b`` evolves under ``I_a (x) exp(iHt) (x) I_b``
and the entangling rate is the time derivative of the entropy across the
``aA | Bb`` cut at ``t = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import brentq

from ratelab import linalg
from ratelab.config import DEFAULT_TOLERANCES as TOL
from ratelab.errors import DimensionMismatchError, DomainError
from ratelab.optimize import golden_section

GAMMA = 1.0 / math.log(2.0)


@dataclass(frozen=True)
class BipartitePureState:
    """Unit vector on ``A (x) B`` or on ``a (x) A (x) B (x) b``.

    ``dims`` is ``(A, B)`` or ``(a, A, B, b)``; amplitudes are stored in
    row-major order over those factors.
    """

    amplitudes: np.ndarray
    dims: tuple[int, ...]

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).ravel()
        dims = tuple(int(d) for d in self.dims)
        if len(dims) not in (2, 4) or min(dims) < 1:
            raise DimensionMismatchError(f"dims must be (A, B) or (a, A, B, b), got {dims}")
        if amps.size != math.prod(dims):
            raise DimensionMismatchError(f"{amps.size} amplitudes do not match dims {dims}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > TOL.state_norm:
            raise DomainError(f"state norm {norm!r} differs from 1")
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "dims", dims)

    @property
    def full_dims(self) -> tuple[int, int, int, int]:
        if len(self.dims) == 2:
            return (1, self.dims[0], self.dims[1], 1)
        return self.dims  # type: ignore[return-value]

    @property
    def cut(self) -> tuple[int, int]:
        """Dimensions of the ``aA`` and ``Bb`` halves."""
        a, A, B, b = self.full_dims
        return a * A, B * b

    def matrix(self) -> np.ndarray:
        """Amplitudes as an ``aA x Bb`` matrix."""
        return self.amplitudes.reshape(self.cut)

    @classmethod
    def from_matrix(cls, m, dims=None) -> "BipartitePureState":
        m = np.asarray(m, dtype=complex)
        return cls(m.ravel(), m.shape if dims is None else dims)


@dataclass(frozen=True)
class SchmidtDecomposition:
    coefficients: np.ndarray  # p_j, nonincreasing, summing to 1
    left: np.ndarray  # columns: orthonormal vectors on aA
    right: np.ndarray  # columns: orthonormal vectors on Bb

    def reconstruct(self) -> np.ndarray:
        return (self.left * np.sqrt(self.coefficients)) @ self.right.T


def schmidt_decompose(state: BipartitePureState,
                      cutoff: float = TOL.schmidt_cutoff) -> SchmidtDecomposition:
    u, s, vh = np.linalg.svd(state.matrix(), full_matrices=False)
    p = s**2
    keep = p > cutoff
    p = p[keep]
    return SchmidtDecomposition(p / p.sum(), u[:, keep], vh[keep].T)


def entanglement_entropy(state: BipartitePureState) -> float:
    return linalg.shannon_entropy(schmidt_decompose(state).coefficients)


def _middle_apply(state: BipartitePureState, h: np.ndarray) -> np.ndarray:
    """``(I_a (x) h (x) I_b) psi`` as a flat vector."""
    a, A, B, b = state.full_dims
    if h.shape != (A * B, A * B):
        raise DimensionMismatchError(f"Hamiltonian shape {h.shape} does not act on A(x)B = {A}x{B}")
    t = state.amplitudes.reshape(a, A * B, b)
    return np.einsum("ij,ajb->aib", h, t).ravel()


def _log_cut_apply(state: BipartitePureState) -> np.ndarray:
    """``(log2 rho_aA (x) I_Bb) psi``; the log is taken on the support."""
    m = state.matrix()
    rho = m @ m.conj().T
    return (linalg.matrix_log2(rho).op @ m).ravel()


def entangling_rate(state: BipartitePureState, h) -> float:
    """Entangling rate ``-i Tr((I_a (x) H) [rho_aAB, log rho_aA (x) I_B])``.

    Evaluated as ``2 Im <L psi | H psi>``; kernel directions of ``rho_aA``
    contribute nothing to the derivative and are dropped.
    """
    h = linalg.hermitian(h)
    lpsi = _log_cut_apply(state)
    hpsi = _middle_apply(state, h)
    return float(2.0 * np.vdot(lpsi, hpsi).imag)


def rate_operator(state: BipartitePureState) -> np.ndarray:
    """Hermitian ``X`` on ``A (x) B`` with ``entangling_rate(state, H) = Tr(H X)``."""
    a, A, B, b = state.full_dims
    psi = state.amplitudes
    lpsi = _log_cut_apply(state)
    # X = Tr_ab( i (|L psi><psi| - |psi><L psi|) )
    t_l = lpsi.reshape(a, A * B, b)
    t_p = psi.reshape(a, A * B, b)
    cross = np.einsum("aib,ajb->ij", t_l, t_p.conj())
    return linalg.hermitian(1j * (cross - cross.conj().T), tol=1e-9)


def evolved_entropy(state: BipartitePureState, h, t: float) -> float:
    """Entanglement entropy after evolving for time ``t`` under ``h``."""
    u = linalg.unitary(h, t)
    moved = BipartitePureState(_middle_apply(state, u), state.dims)
    return entanglement_entropy(moved)


def f_of_p(p) -> float:
    """Variance of ``log2 p`` under ``p``: ``sum p log^2 p - (sum p log p)^2``."""
    p = np.asarray(p, dtype=float)
    p = p[p > TOL.schmidt_cutoff]
    logs = np.log2(p)
    mean = np.dot(p, logs)
    return float(max(np.dot(p, logs**2) - mean**2, 0.0))


def gamma_from_schmidt(p) -> float:
    return 2.0 * math.sqrt(f_of_p(p))


def gamma_no_ancilla_max(state: BipartitePureState) -> tuple[float, np.ndarray]:
    """Maximal entangling rate over ``||H|| = 1`` for a state without ancillas.

    Returns ``(2 sqrt(F(p)), H_opt)``. For a product state the rate is zero
    and ``H_opt`` is the identity.
    """
    if len(state.dims) != 2 and state.full_dims[0] * state.full_dims[3] != 1:
        raise DimensionMismatchError("gamma_no_ancilla_max requires a = b = 1")
    sd = schmidt_decompose(state)
    A, B = state.cut
    if len(sd.coefficients) == 1:
        return 0.0, np.eye(A * B, dtype=complex)
    h_opt, _ = linalg.optimal_hamiltonian(rate_operator(state))
    return gamma_from_schmidt(sd.coefficients), h_opt


def binary_spectrum(lam: float, d: int) -> np.ndarray:
    """``(lam, (1-lam)/(d-1), ..., (1-lam)/(d-1))``."""
    if d < 2:
        raise DomainError(f"d must be at least 2, got {d}")
    if not 0.0 <= lam <= 1.0:
        raise DomainError(f"lambda must lie in [0, 1], got {lam}")
    return np.array([lam] + [(1.0 - lam) / (d - 1)] * (d - 1))


def psi_lambda(lam: float, d: int) -> BipartitePureState:
    """``sum_j sqrt(p_j) |j>|j>`` with the binary spectrum of ``lam``."""
    amps = np.diag(np.sqrt(binary_spectrum(lam, d))).astype(complex)
    return BipartitePureState.from_matrix(amps)


def _check_lambda(lam: float, d: int) -> None:
    if d < 2:
        raise DomainError(f"d must be at least 2, got {d}")
    if not 0.5 <= lam <= 1.0:
        raise DomainError(f"lambda must lie in [1/2, 1], got {lam}")


def gamma_lambda(lam: float, d: int) -> float:
    """``2 sqrt(lam (1-lam)) log2(lam (d-1) / (1-lam))``; zero at ``lam = 1``."""
    _check_lambda(lam, d)
    if lam == 1.0:
        return 0.0
    return 2.0 * math.sqrt(lam * (1.0 - lam)) * math.log2(lam * (d - 1) / (1.0 - lam))


def _stationarity(lam: float, d: int) -> float:
    # d/dlam gamma_lambda vanishes iff (2 lam - 1) ln(lam (d-1)/(1-lam)) = 2
    return (2.0 * lam - 1.0) * math.log(lam * (d - 1) / (1.0 - lam)) - 2.0


class LambdaOptimum(NamedTuple):
    lam: float
    gamma: float


def optimize_lambda(d: int, grid: int = 1000, tol: float = 1e-12) -> LambdaOptimum:
    """Maximize :func:`gamma_lambda` over ``1/2 <= lam <= 1``.

    A uniform grid brackets the maximum, golden-section search refines it
    and a bracketed root of the stationarity condition polishes the last digits.
    """
    _check_lambda(0.5, d)
    xs = np.linspace(0.5, 1.0, grid + 1)
    vals = np.array([gamma_lambda(x, d) for x in xs])
    i = int(np.argmax(vals))
    lo, hi = xs[max(i - 1, 0)], xs[min(i + 1, grid)]
    lam, _ = golden_section(lambda x: -gamma_lambda(x, d), lo, min(hi, 1.0 - 1e-15), tol=tol)
    hi_s = min(hi, 1.0 - 1e-15)
    if _stationarity(lo, d) < 0.0 < _stationarity(hi_s, d):
        lam = brentq(lambda x: _stationarity(x, d), lo, hi_s, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return LambdaOptimum(lam, gamma_lambda(lam, d))


def extremal_residual(p) -> float:
    """Largest violation of the stationarity equations of ``F`` on the simplex.

    At a critical point every ``log2 p_j`` is a root of
    ``x^2 + 2(gamma + S) x + 2 S gamma - (F - S^2) = 0``, i.e.
    ``log2 p_j = -(gamma + S) +/- sqrt(gamma^2 + F)`` with ``S`` the entropy
    and ``gamma = 1/ln 2``. Returns the distance of each ``log2 p_j`` to the
    nearer root, maximized over ``j``.
    """
    p = np.asarray(p, dtype=float)
    logs = np.log2(p)
    s = -float(np.dot(p, logs))
    disc = math.sqrt(GAMMA**2 + f_of_p(p))
    roots = np.array([-(GAMMA + s) + disc, -(GAMMA + s) - disc])
    return float(np.max(np.min(np.abs(logs[:, None] - roots[None, :]), axis=1)))


def optimal_pair_large_d(d: int) -> tuple[BipartitePureState, np.ndarray]:
    """Asymptotically optimal state and Hamiltonian on ``C^d (x) C^d``.

    State: ``(|1,1> + |Phi+>)/sqrt 2`` with ``|Phi+>`` maximally entangled on
    levels ``2..d``. Hamiltonian: ``-i(|Phi+><1,1| - |1,1><Phi+|)``.
    """
    if d < 2:
        raise DomainError(f"d must be at least 2, got {d}")
    p, h_sub = optimal_pair_schmidt_form(d)
    amps = np.diag(np.sqrt(p)).astype(complex)
    idx = np.arange(d) * (d + 1)  # positions of |j,j>
    h = np.zeros((d * d, d * d), dtype=complex)
    h[np.ix_(idx, idx)] = h_sub
    return BipartitePureState.from_matrix(amps), h


def optimal_pair_schmidt_form(d: int) -> tuple[np.ndarray, np.ndarray]:
    """The large-``d`` pair restricted to ``span{|j,j>}``.

    Returns the Schmidt coefficients and the ``d x d`` block of the
    Hamiltonian in the basis ``|1,1>, ..., |d,d>`` (it vanishes elsewhere).
    """
    p = binary_spectrum(0.5, d)
    phi = np.zeros(d, dtype=complex)
    phi[1:] = 1.0 / math.sqrt(d - 1)
    e1 = np.zeros(d, dtype=complex)
    e1[0] = 1.0
    h_sub = -1j * (np.outer(phi, e1.conj()) - np.outer(e1, phi.conj()))
    return p, h_sub


def schmidt_subspace_rate(p, h_sub) -> float:
    """Entangling rate of ``sum sqrt(p_j)|j,j>`` under a Hamiltonian supported
    on ``span{|j,j>}`` and given there by ``h_sub``.

    Exact, and linear in ``d`` memory instead of ``d^4``.
    """
    p = np.asarray(p, dtype=float)
    h_sub = linalg.hermitian(h_sub)
    if h_sub.shape != (len(p), len(p)):
        raise DimensionMismatchError("h_sub must be len(p) x len(p)")
    psi = np.sqrt(p).astype(complex)
    logs = np.where(p > TOL.rank_cutoff, np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return float(2.0 * np.vdot(logs * psi, h_sub @ psi).imag)


class Fig2Row(NamedTuple):
    d: int
    log2d: float
    lambda_opt: float
    gamma_d: float
    entropy_bits: float


FIG2_HEADER = ("d", "log2d", "lambda_opt", "gamma_d", "entropy_bits")


def figure2_scan(d_values: Sequence[int]) -> list[Fig2Row]:
    rows = []
    for d in d_values:
        opt = optimize_lambda(int(d))
        s = linalg.shannon_entropy(binary_spectrum(opt.lam, int(d)))
        rows.append(Fig2Row(int(d), math.log2(d), opt.lam, opt.gamma, s))
    return rows
