"""Alternating maximization of the mixing rate for a fixed average state.

With ``H = 2K - I`` the mixing rate becomes

    F(K, Pi) = 2i Tr(Pi rho^(1/2) [K, log rho] rho^(1/2)),

to be maximized over ``0 <= K <= I`` and ``0 <= Pi <= I`` with
``Tr(Pi rho) = p``. For fixed ``Pi`` the best ``K`` is a spectral projector.
For fixed ``K`` the problem over ``Pi`` is solved through its one-parameter
dual ``min_l l (p - 1/2) + ||X - l rho||_1 / 2``.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import brentq

from ratelab import linalg
from ratelab.config import DEFAULT_TOLERANCES as TOL
from ratelab.errors import DomainError, RatelabError, SolverError
from ratelab.optimize import golden_section


@dataclass(frozen=True)
class SimProblem:
    rho: np.ndarray
    p: float

    def __post_init__(self):
        rho = linalg.density_matrix(self.rho)
        if not 0.0 < self.p <= 0.5:
            raise DomainError(f"p = {self.p} must lie in (0, 1/2]")
        if np.linalg.eigvalsh(rho)[0] <= TOL.rank_cutoff:
            raise DomainError("average state must have full rank")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "p", float(self.p))


@dataclass(frozen=True)
class SolverConfig:
    iterations: int = 32
    restarts: int = 128
    master_seed: int = 0
    lambda_tolerance: float = 1e-9
    zero_eigenspace_tolerance: float = 1e-8
    dual_method: str = "kinks"
    workers: int = 1

    def __post_init__(self):
        if self.iterations < 1 or self.restarts < 1:
            raise ValueError("iterations and restarts must be at least 1")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")
        if self.dual_method not in ("kinks", "golden"):
            raise ValueError(f"dual_method must be 'kinks' or 'golden', got {self.dual_method!r}")


class _Prepared(NamedTuple):
    rho: np.ndarray
    sqrt: np.ndarray
    log: np.ndarray
    inv_sqrt: np.ndarray
    p: float


def _prepare(rho, p: float) -> _Prepared:
    rho = linalg.hermitian(rho)
    return _Prepared(rho, linalg.matrix_sqrt(rho), linalg.matrix_log2(rho).op,
                     linalg.inverse_sqrt_on_support(rho), float(p))


def _commutator_sandwich(prep: _Prepared, a: np.ndarray) -> np.ndarray:
    c = a @ prep.log - prep.log @ a
    return prep.sqrt @ c @ prep.sqrt


def _herm(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def _check_contraction(m: np.ndarray, name: str, tol: float = TOL.constraint) -> None:
    w = np.linalg.eigvalsh(m)
    if w[0] < -tol or w[-1] > 1.0 + tol:
        raise DomainError(f"{name} must satisfy 0 <= {name} <= I; eigenvalues in [{w[0]:.3e}, {w[-1]:.3e}]")


def objective(k, pi, rho) -> float:
    """``F(K, Pi) = 2i Tr(Pi rho^(1/2) [K, log rho] rho^(1/2))``."""
    k = linalg.hermitian(k)
    pi = linalg.hermitian(pi)
    _check_contraction(k, "K")
    _check_contraction(pi, "Pi")
    prep = _prepare(linalg.density_matrix(rho), 0.0)
    x = 2j * _commutator_sandwich(prep, k)
    return float(np.trace(pi @ x).real)


class KStep(NamedTuple):
    K: np.ndarray
    value: float


def _k_step(prep: _Prepared, pi: np.ndarray) -> KStep:
    z = _herm(-2j * _commutator_sandwich(prep, pi))
    tr = np.trace(z).real
    if abs(tr) > 1e-9 * max(1.0, np.abs(z).max()):
        raise SolverError("Z is not traceless", trace=float(tr))
    w, u = np.linalg.eigh(z)
    pos = w > 0.0
    up = u[:, pos]
    return KStep(up @ up.conj().T, float(np.sum(w[pos])))


def maximize_over_K(pi, rho) -> KStep:
    """Best ``0 <= K <= I`` for fixed ``Pi``: the projector onto the positive
    eigenspace of ``Z = -2i rho^(1/2) [Pi, log rho] rho^(1/2)``; the value is
    ``||Z||_1 / 2``."""
    pi = linalg.hermitian(pi)
    _check_contraction(pi, "Pi")
    return _k_step(_prepare(linalg.density_matrix(rho), 0.0), pi)


@dataclass(frozen=True)
class PiStep:
    Pi: np.ndarray
    value: float  # Tr(X Pi)
    lambda0: float  # minimizer of the dual function
    dual_value: float  # dual function at lambda0
    gap: float
    slack_upper: float  # Tr((I - Pi) A)
    slack_lower: float  # Tr(Pi B)
    constraint_residual: float  # |Tr(Pi rho) - p|


def dual_function(x: np.ndarray, rho: np.ndarray, p: float, lam: float) -> float:
    """``lam (p - 1/2) + ||X - lam rho||_1 / 2``."""
    w = np.linalg.eigvalsh(x - lam * rho)
    return lam * (p - 0.5) + 0.5 * float(np.sum(np.abs(w)))


def _positive_weight(x, rho, lam) -> float:
    """``Tr(rho P+(lam))``; ``p`` minus this is a subgradient of the dual."""
    w, u = np.linalg.eigh(x - lam * rho)
    up = u[:, w > 0.0]
    return float(np.einsum("ij,ik,kj->", up.conj(), rho, up).real)


def dual_bracket(x, rho, p, center: float = 0.0, step: float | None = None,
                 max_doublings: int = 200) -> tuple[float, float]:
    """Interval around the dual minimizer.

    Steps outward from ``center`` with doubling step sizes until the
    subgradient ``p - Tr(rho P+)`` is <= 0 on the left and >= 0 on the right.
    """
    if step is None:
        step = max(float(np.max(np.abs(np.linalg.eigvalsh(x)))), 1e-300)
    lo, s = center - step, step
    for _ in range(max_doublings):
        if p - _positive_weight(x, rho, lo) <= 0.0:
            break
        s *= 2.0
        lo -= s
    else:
        raise SolverError("could not bracket dual minimum from the left", lo=lo)
    hi, s = center + step, step
    for _ in range(max_doublings):
        if p - _positive_weight(x, rho, hi) >= 0.0:
            break
        s *= 2.0
        hi += s
    else:
        raise SolverError("could not bracket dual minimum from the right", hi=hi)
    return lo, hi


def _refine_lambda(x, rho, p, lam, tol) -> tuple[float, float]:
    # bracket [lo, hi] with Tr(rho P+) >= p at lo and <= p at hi, then bisect
    step = max(tol, 1e-15 * max(1.0, abs(lam)))
    lo, hi = lam - step, lam + step
    for _ in range(200):
        if _positive_weight(x, rho, lo) >= p:
            break
        lo -= (step := 2.0 * step)
    for _ in range(200):
        if _positive_weight(x, rho, hi) <= p:
            break
        hi += (step := 2.0 * step)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if _positive_weight(x, rho, mid) >= p:
            lo = mid
        else:
            hi = mid
    return lo, hi


def _split_at(x, rho, lam, n_zero: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Eigen-split ``X - lam rho`` with the ``n_zero`` eigenvalues nearest 0
    treated as its kernel. Returns ``(w, u, plus_mask, zero_mask)``."""
    w, u = np.linalg.eigh(x - lam * rho)
    zero = np.zeros(len(w), dtype=bool)
    if n_zero:
        zero[np.argsort(np.abs(w))[:n_zero]] = True
    return w, u, (w > 0.0) & ~zero, zero


def _weight(u, rho, mask) -> float:
    v = u[:, mask]
    return float(np.einsum("ij,ik,kj->", v.conj(), rho, v).real)


def _dual_by_kinks(x, rho, inv_sqrt, p):
    """Exact dual minimizer using the kinks of the dual function.

    ``X - lam rho`` is singular exactly at the eigenvalues ``mu`` of
    ``rho^(-1/2) X rho^(-1/2)``. ``Tr(rho P+(lam))`` is nonincreasing, drops at
    each ``mu`` and is continuous in between, so the minimizer is either a
    kink (``P0`` nonempty) or a root of ``Tr(rho P+(lam)) = p`` inside one
    smooth stretch.
    """
    mu = np.linalg.eigvalsh(_herm(inv_sqrt @ x @ inv_sqrt))
    scale = max(1.0, float(np.max(np.abs(mu))))
    kinks, mult = [], []
    for v in mu:
        if kinks and abs(v - kinks[-1]) <= 1e-10 * scale:
            mult[-1] += 1
        else:
            kinks.append(float(v))
            mult.append(1)
    cache = {}

    def at_kink(j):
        if j not in cache:
            w, u, plus, zero = _split_at(x, rho, kinks[j], mult[j])
            right = _weight(u, rho, plus)
            cache[j] = (right, right + _weight(u, rho, zero), w, u, plus, zero)
        return cache[j]

    # smallest j whose right limit is <= p
    lo, hi = 0, len(kinks)
    while lo < hi:
        mid = (lo + hi) // 2
        if at_kink(mid)[0] <= p:
            hi = mid
        else:
            lo = mid + 1
    j = lo
    if j < len(kinks) and at_kink(j)[1] >= p:
        return kinks[j], at_kink(j)[2:]

    # smooth stretch between kinks j-1 and j (open ends extend to +-inf)
    def g(lam):
        w, u = np.linalg.eigh(x - lam * rho)
        return _weight(u, rho, w > 0.0) - p

    span = 1.0 + (kinks[-1] - kinks[0])
    a = kinks[j - 1] if j > 0 else kinks[0] - span
    b = kinks[j] if j < len(kinks) else kinks[-1] + span
    ga = at_kink(j - 1)[0] - p if j > 0 else g(a)
    while j == 0 and ga <= 0.0:
        a -= (span := 2.0 * span)
        ga = g(a)
    gb = at_kink(j)[1] - p if j < len(kinks) else g(b)
    while j == len(kinks) and gb >= 0.0:
        b += (span := 2.0 * span)
        gb = g(b)
    if ga * gb < 0.0:
        # endpoint values are the one-sided limits at the kinks
        lam = brentq(lambda t: ga if t == a else gb if t == b else g(t), a, b,
                     xtol=1e-15 * scale, rtol=4 * np.finfo(float).eps, maxiter=200)
        a = b = lam
    lam = 0.5 * (a + b)
    w, u, plus, zero = _split_at(x, rho, lam, 0)
    return lam, (w, u, plus, zero)


def _dual_by_golden(x, rho, p, lambda_tolerance, zero_tolerance, hint, hint_step):
    if hint is None:
        lo, hi = dual_bracket(x, rho, p)
    else:
        lo, hi = dual_bracket(x, rho, p, center=hint,
                              step=max(hint_step, 1e-9 * max(1.0, abs(hint))))
    tol = lambda_tolerance * max(1.0, hi - lo)
    lam, _ = golden_section(lambda t: dual_function(x, rho, p, t), lo, hi, tol=tol)

    def split(t):
        w, u = np.linalg.eigh(x - t * rho)
        cut = zero_tolerance * max(float(np.max(np.abs(w))), 1e-300)
        zero = np.abs(w) <= cut
        return w, u, (w > cut), zero

    parts = split(lam)
    w, u, plus, zero = parts
    if not zero.any() and abs(_weight(u, rho, plus) - p) > 1e-12:
        # the minimum sits on a smooth stretch, or the crossing eigenvalue is
        # not yet below the zero tolerance: bisect lam -> Tr(rho P+(lam))
        a, b = _refine_lambda(x, rho, p, lam, tol)
        best = None
        for t in (a, b, 0.5 * (a + b)):
            cand = split(t)
            if not cand[3].any():
                # nearest eigenvalue to zero is the crossing one
                cand = _split_at(x, rho, t, 1)
            pi = _pi_from_split(cand, rho, p)
            res = abs(np.trace(pi @ rho).real - p)
            if best is None or res < best[0]:
                best = (res, t, cand)
        _, lam, parts = best
    return lam, parts


def _pi_from_split(parts, rho, p) -> np.ndarray:
    w, u, plus, zero = parts
    up = u[:, plus]
    pi = up @ up.conj().T
    if zero.any():
        uz = u[:, zero]
        p0 = uz @ uz.conj().T
        denom = np.trace(p0 @ rho).real
        xcoef = min(max((p - np.trace(pi @ rho).real) / denom, 0.0), 1.0)
        pi = pi + xcoef * p0
    return pi


def solve_pi_step(x, rho, p: float, lambda_tolerance: float = 1e-9,
                  zero_tolerance: float = 1e-8, hint: float | None = None,
                  hint_step: float = 1e-6, method: str = "kinks",
                  inv_sqrt: np.ndarray | None = None) -> PiStep:
    """Maximize ``Tr(X Pi)`` over ``0 <= Pi <= I``, ``Tr(Pi rho) = p``.

    The dual minimizer is found either exactly from the kinks of the dual
    function (``method="kinks"``) or by bracketing plus golden-section search
    (``method="golden"``; ``hint``/``hint_step`` seed its bracket). Either way
    ``Pi = P+ + x P0`` for the spectral projectors of ``X - lambda0 rho``.
    """
    x = _herm(np.asarray(x, dtype=complex))
    rho = np.asarray(rho, dtype=complex)
    if method == "kinks":
        if inv_sqrt is None:
            inv_sqrt = linalg.inverse_sqrt_on_support(rho)
        lam, parts = _dual_by_kinks(x, rho, inv_sqrt, p)
    elif method == "golden":
        if not np.any(x):
            lam, parts = 0.0, _split_at(x, rho, 0.0, len(rho))
        else:
            lam, parts = _dual_by_golden(x, rho, p, lambda_tolerance, zero_tolerance,
                                         hint, hint_step)
    else:
        raise ValueError(f"unknown dual method {method!r}")
    w, u, plus, zero = parts
    pi = _pi_from_split(parts, rho, p)
    residual = abs(np.trace(pi @ rho).real - p)
    value = float(np.trace(x @ pi).real)
    dual_value = dual_function(x, rho, p, lam)
    a_part = (u * np.clip(w, 0.0, None)) @ u.conj().T
    b_part = (u * np.clip(-w, 0.0, None)) @ u.conj().T
    eye = np.eye(len(rho))
    return PiStep(
        Pi=pi,
        value=value,
        lambda0=float(lam),
        dual_value=dual_value,
        gap=abs(value - dual_value),
        slack_upper=float(np.trace((eye - pi) @ a_part).real),
        slack_lower=float(np.trace(pi @ b_part).real),
        constraint_residual=float(residual),
    )


def maximize_over_Pi(k, problem: SimProblem, config: SolverConfig | None = None) -> PiStep:
    """Best admissible ``Pi`` for fixed ``K`` via the one-dimensional dual."""
    config = config or SolverConfig()
    k = linalg.hermitian(k)
    _check_contraction(k, "K")
    prep = _prepare(problem.rho, problem.p)
    x = _herm(2j * _commutator_sandwich(prep, k))
    step = solve_pi_step(x, prep.rho, prep.p, config.lambda_tolerance,
                         config.zero_eigenspace_tolerance, method=config.dual_method,
                         inv_sqrt=prep.inv_sqrt)
    if step.gap > TOL.duality_gap:
        raise SolverError("duality gap above tolerance", gap=step.gap, lambda0=step.lambda0)
    return step


@dataclass
class RestartOutcome:
    index: int
    value: float
    K: np.ndarray | None
    Pi: np.ndarray | None
    trace: list[float] = field(default_factory=list)
    max_gap: float = 0.0
    max_slack: float = 0.0
    max_constraint: float = 0.0
    error: str | None = None


def restart_rng(master_seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), int(index)]))


def random_projector(rng: np.random.Generator, dim: int) -> np.ndarray:
    rank = int(rng.integers(1, dim + 1))
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    q, _ = np.linalg.qr(g)
    return q @ q.conj().T


def run_restart(problem: SimProblem, config: SolverConfig, index: int) -> RestartOutcome:
    """One round: random projector ``K``, then alternating ``Pi``/``K`` steps."""
    prep = _prepare(problem.rho, problem.p)
    rng = restart_rng(config.master_seed, index)
    k = random_projector(rng, len(prep.rho))
    out = RestartOutcome(index, -math.inf, None, None)
    hint, hint_step = None, 1e-6
    try:
        for _ in range(config.iterations):
            x = _herm(2j * _commutator_sandwich(prep, k))
            step = solve_pi_step(x, prep.rho, prep.p, config.lambda_tolerance,
                                 config.zero_eigenspace_tolerance, hint, hint_step,
                                 method=config.dual_method, inv_sqrt=prep.inv_sqrt)
            if hint is not None:
                hint_step = 2.0 * abs(step.lambda0 - hint)
            hint = step.lambda0
            out.max_gap = max(out.max_gap, step.gap)
            out.max_slack = max(out.max_slack, abs(step.slack_upper), abs(step.slack_lower))
            out.max_constraint = max(out.max_constraint, step.constraint_residual)
            out.trace.append(step.value)
            k, kval = _k_step(prep, step.Pi)
            out.trace.append(kval)
            out.K, out.Pi, out.value = k, step.Pi, kval
    except RatelabError as exc:
        out.error = f"{type(exc).__name__}: {exc}"
    return out


@dataclass
class SolveResult:
    F_max: float
    K_opt: np.ndarray
    Pi_opt: np.ndarray
    per_restart_values: list[float]
    duality_gap: float
    estimated_precision: float
    max_slackness: float = 0.0
    max_constraint_residual: float = 0.0
    best_restart: int = 0
    traces: list[list[float]] = field(default_factory=list, repr=False)
    failures: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        from ratelab.io import matrix_to_dict

        d = asdict(self)
        d["K_opt"] = matrix_to_dict(self.K_opt)
        d["Pi_opt"] = matrix_to_dict(self.Pi_opt)
        d.pop("traces")
        return d


def estimated_precision(values: Sequence[float]) -> float:
    """Spread (max - min) of the top decile of restart values."""
    v = np.sort(np.asarray(values, dtype=float))[::-1]
    if len(v) == 0:
        return math.nan
    top = v[: max(1, math.ceil(len(v) / 10))]
    return float(top[0] - top[-1])


def _run_indexed(args):
    problem, config, index = args
    return run_restart(problem, config, index)


def alternate_solve(problem: SimProblem, config: SolverConfig | None = None) -> SolveResult:
    """Best value of ``F`` over ``config.restarts`` independent rounds."""
    config = config or SolverConfig()
    jobs = [(problem, config, i) for i in range(config.restarts)]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(_run_indexed, jobs))
    else:
        outcomes = [_run_indexed(j) for j in jobs]
    outcomes.sort(key=lambda o: o.index)
    good = [o for o in outcomes if o.error is None]
    failures = [{"restart": o.index, "error": o.error} for o in outcomes if o.error is not None]
    if not good:
        raise SolverError("every restart failed", failures=failures)
    best = max(good, key=lambda o: (o.value, -o.index))
    values = [o.value for o in good]
    return SolveResult(
        F_max=best.value,
        K_opt=best.K,
        Pi_opt=best.Pi,
        per_restart_values=values,
        duality_gap=max(o.max_gap for o in good),
        estimated_precision=estimated_precision(values),
        max_slackness=max(o.max_slack for o in good),
        max_constraint_residual=max(o.max_constraint for o in good),
        best_restart=best.index,
        traces=[o.trace for o in good],
        failures=failures,
    )


def embezzling_state(D: int) -> np.ndarray:
    """``diag(1, 1/2, ..., 1/D) / Z`` with ``Z`` the harmonic number."""
    if D < 2:
        raise DomainError(f"D must be at least 2, got {D}")
    w = 1.0 / np.arange(1, D + 1)
    return np.diag(w / w.sum()).astype(complex)


def lift_triple(rho, pi, D: int) -> tuple[np.ndarray, np.ndarray]:
    """``(rho^(D) (x) rho, I (x) Pi)``."""
    return np.kron(embezzling_state(D), rho), np.kron(np.eye(D), pi)


def tensor_stability_check(problem: SimProblem, D: int, config: SolverConfig | None = None,
                           pi=None, h=None) -> tuple[float, float]:
    """Mixing rate of ``(p, rho, Pi)`` under ``H`` and of the lifted ensemble
    ``(p, rho^(D) (x) rho, I (x) Pi)`` under ``I (x) H``.

    Without explicit ``pi``/``h`` a solver round on the base problem supplies them.
    """
    from ratelab.mixing import EnsembleTriple, mixing_rate

    dim = len(problem.rho)
    if dim * D > 64:
        raise DomainError("tensor_stability_check is limited to dim(rho) * D <= 64")
    if pi is None or h is None:
        config = config or SolverConfig(restarts=1)
        res = alternate_solve(problem, config)
        pi = res.Pi_opt if pi is None else pi
        h = 2.0 * res.K_opt - np.eye(dim) if h is None else h
    base = mixing_rate(EnsembleTriple(problem.p, problem.rho, pi), h)
    rho_l, pi_l = lift_triple(problem.rho, pi, D)
    lifted = mixing_rate(EnsembleTriple(problem.p, rho_l, pi_l), np.kron(np.eye(D), h))
    return base, lifted


def default_p_grid(D: int, count: int = 20) -> list[float]:
    """``count`` evenly spaced points in ``(lambda_min(rho^(D)), 1/2]``."""
    lam_min = float(np.real(embezzling_state(D)[-1, -1]))
    return [float(v) for v in np.linspace(lam_min, 0.5, count + 1)[1:]]


class Fig3Row(NamedTuple):
    D: int
    p: float
    F_max: float
    entropy_bits: float
    precision: float


FIG3_HEADER = ("D", "p", "F_max", "entropy_bits", "precision")


@dataclass
class Fig3Scan:
    rows: list[Fig3Row]
    results: list[SolveResult]
    p_grids: dict[int, list[float]]
    errors: list[dict] = field(default_factory=list)


def figure3_scan(D_values: Sequence[int], p_grid: Sequence[float] | int | None = None,
                 config: SolverConfig | None = None) -> Fig3Scan:
    """Solve the maximization for ``rho = rho^(D)`` on a grid of ``p``.

    ``p_grid`` may be an explicit list (shared by every ``D``) or a count for
    :func:`default_p_grid`.
    """
    config = config or SolverConfig()
    rows, results, grids, errors = [], [], {}, []
    for D in D_values:
        grid = default_p_grid(D, p_grid if isinstance(p_grid, int) else 20) \
            if p_grid is None or isinstance(p_grid, int) else list(p_grid)
        grids[int(D)] = grid
        rho = embezzling_state(int(D))
        for p in grid:
            try:
                res = alternate_solve(SimProblem(rho, p), config)
            except RatelabError as exc:
                errors.append({"D": int(D), "p": p, "error": str(exc)})
                continue
            results.append(res)
            rows.append(Fig3Row(int(D), p, res.F_max, linalg.binary_entropy(p),
                                res.estimated_precision))
    return Fig3Scan(rows, results, grids, errors)
