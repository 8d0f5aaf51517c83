"""Numerical tolerances shared by all modules."""

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    # construction-time checks
    hermitian_rel: float = 1e-12
    density_eig: float = 1e-10
    density_trace: float = 1e-10
    state_norm: float = 1e-10
    # matrix functions
    rank_cutoff: float = 1e-12
    schmidt_cutoff: float = 1e-12
    # spectral checks
    reconstruction: float = 1e-9
    # ensemble admissibility
    admissible_eig: float = 1e-10
    admissible_trace: float = 1e-9
    inadmissible_eig: float = 1e-8
    # binary-spectrum clustering
    cluster_gap: float = 1e-6
    cluster_spread: float = 1e-9
    # canonical reduction: singular values of the off-diagonal block below
    # this (relative to 1) are treated as zero
    block_split: float = 1e-9
    # solver
    duality_gap: float = 1e-6
    constraint: float = 1e-8


DEFAULT_TOLERANCES = Tolerances()
