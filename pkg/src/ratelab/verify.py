"""Randomized verification suites.

Each suite draws ``instances`` random problems from a seeded generator and
checks identities or inequalities at fixed tolerances. A failure records the
inputs, the expected bound and the observed value; out-of-domain instances
(e.g. a rank-deficient average state where a full-rank one is required) are
recorded as skips.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from ratelab import entangling as ent
from ratelab import linalg, mixing, sampling, solver
from ratelab.errors import DegenerateInputError, RatelabError

SUITES = ("identities", "lemmas", "bounds", "duality")
FD_STEP = 1e-5


@dataclass
class Failure:
    check: str
    instance: int
    inputs: dict
    expected: str
    observed: float


@dataclass
class VerificationReport:
    suite: str
    instances: int
    checks: dict = field(default_factory=dict)  # check name -> count
    failures: list[Failure] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ok"] = self.ok
        return d

    def merge(self, other: "VerificationReport") -> None:
        for k, v in other.checks.items():
            self.checks[k] = self.checks.get(k, 0) + v
        self.failures.extend(other.failures)
        self.skipped.extend(other.skipped)


class _Recorder:
    def __init__(self, report: VerificationReport):
        self.report = report

    def check(self, name: str, index: int, ok: bool, observed: float, expected: str,
              **inputs) -> None:
        self.report.checks[name] = self.report.checks.get(name, 0) + 1
        if not ok:
            self.report.failures.append(Failure(name, index, _summarize(inputs), expected,
                                                float(observed)))

    def skip(self, name: str, index: int, reason: str) -> None:
        self.report.skipped.append(f"{name}[{index}]: {reason}")


def _summarize(inputs: dict) -> dict:
    out = {}
    for k, v in inputs.items():
        if isinstance(v, np.ndarray):
            out[k] = {"shape": list(v.shape), "re": np.round(v.real, 12).tolist(),
                      "im": np.round(v.imag, 12).tolist()}
        else:
            out[k] = v
    return out


def instance_rng(seed: int, suite: str, index: int) -> np.random.Generator:
    tag = SUITES.index(suite) if suite in SUITES else 99
    return np.random.default_rng(np.random.SeedSequence([int(seed), tag, int(index)]))


# ---------------------------------------------------------------------------
# instance generators


def random_entangling_instance(rng) -> tuple[ent.BipartitePureState, np.ndarray]:
    A, B = (int(v) for v in rng.integers(2, 5, size=2))
    psi = sampling.pure_state(rng, A * B)
    return ent.BipartitePureState(psi, (A, B)), sampling.hermitian(rng, A * B)


def random_ensemble(rng, dim: int | None = None) -> mixing.Ensemble:
    dim = int(rng.integers(2, 7)) if dim is None else dim
    return mixing.Ensemble(float(rng.uniform(0.02, 0.98)), sampling.density(rng, dim),
                           sampling.density(rng, dim))


def random_binary_triple(rng, max_dim: int = 12) -> tuple[mixing.EnsembleTriple, np.ndarray]:
    dim = int(rng.integers(2, max_dim + 1))
    rho, r = sampling.binary_density(rng, dim)
    pi = sampling.contraction(rng, dim) * float(rng.uniform(0.0, 1.0)) ** 2
    p = float(np.trace(pi @ rho).real)
    if p > 0.5:
        pi, p = np.eye(dim) - pi, 1.0 - p
    return mixing.EnsembleTriple(p, rho, pi), r


# ---------------------------------------------------------------------------
# checks


def fd_entangling(rec: _Recorder, i: int, state, h, dt: float = FD_STEP) -> None:
    rate = ent.entangling_rate(state, h)
    fd = (ent.evolved_entropy(state, h, dt) - ent.evolved_entropy(state, h, -dt)) / (2 * dt)
    rec.check("entangling_rate_vs_fd", i, abs(rate - fd) <= 1e3 * dt, abs(rate - fd),
              f"|rate - fd| <= {1e3 * dt:g}", dims=list(state.dims))


def fd_mixing(rec: _Recorder, i: int, e: mixing.Ensemble, h, dt: float = FD_STEP) -> None:
    if np.linalg.eigvalsh(e.average)[0] <= 1e-10:
        rec.skip("mixing_rate_vs_fd", i, "average state is rank deficient")
        return
    rate = mixing.mixing_rate(mixing.ensemble_to_triple(e), h)
    fd = (linalg.entropy(e.evolved_average(h, dt)) - linalg.entropy(e.evolved_average(h, -dt))) / (2 * dt)
    rec.check("mixing_rate_vs_fd", i, abs(rate - fd) <= 1e3 * dt, abs(rate - fd),
              f"|rate - fd| <= {1e3 * dt:g}", p=e.p, dim=len(h))


def rank_one_identity(psi, phi, real_overlap: bool = True) -> tuple[float, float]:
    """Both sides of ``|| |phi><psi| - |psi><phi| ||_1 = 2 sqrt(|psi|^2 |phi|^2 - c^2)``.

    ``c`` is ``Re<psi|phi>``, which is correct for arbitrary vectors. With
    ``real_overlap=False`` it is ``|<psi|phi>|``; the two agree only when the
    overlap is real.
    """
    lhs = linalg.trace_norm(1j * (np.outer(phi, psi.conj()) - np.outer(psi, phi.conj())))
    # |psi|^2 |phi|^2 - |<psi|phi>|^2 via the Lagrange identity, free of cancellation
    w = np.outer(psi, phi) - np.outer(phi, psi)
    gram = 0.5 * float(np.sum(np.abs(w) ** 2))
    if real_overlap:
        gram += np.vdot(psi, phi).imag ** 2
    return lhs, 2.0 * math.sqrt(gram)


def suite_identities(rec: _Recorder, i: int, rng, extra=None) -> None:
    state, h = random_entangling_instance(rng)
    fd_entangling(rec, i, state, h)
    h2 = sampling.hermitian(rng, len(h))
    alpha, beta = rng.standard_normal(2)
    lin = ent.entangling_rate(state, alpha * h + beta * h2)
    parts = alpha * ent.entangling_rate(state, h) + beta * ent.entangling_rate(state, h2)
    rec.check("entangling_rate_linearity", i, abs(lin - parts) <= 1e-10 * max(1.0, abs(lin)),
              abs(lin - parts), "<= 1e-10")

    e = extra if extra is not None else random_ensemble(rng)
    hm = sampling.hermitian(rng, e.rho0.shape[0])
    fd_mixing(rec, i, e, hm)
    try:
        t = mixing.ensemble_to_triple(e)
    except RatelabError as exc:
        rec.skip("triple", i, str(exc))
        return
    if t.support_restricted:
        rec.skip("mixing_identities", i, "average state is rank deficient")
        return
    a = mixing.mixing_rate(t, hm)
    b = mixing.mixing_rate(t.transpose(), -hm)
    rec.check("transpose_symmetry", i, abs(a - b) <= 1e-10, abs(a - b), "<= 1e-10")
    c = mixing.ensemble_mixing_rate(e, hm)
    rec.check("triple_vs_ensemble_rate", i, abs(a - c) <= 1e-9, abs(a - c), "<= 1e-9")
    if 0.0 < e.p < 1.0:
        back = mixing.triple_to_ensemble(t)
        err = float(np.max(np.abs(back.rho1 - e.rho1)))
        rec.check("triple_round_trip", i, err <= 1e-9, err, "<= 1e-9")
    emb = mixing.embedding_rate(e, hm)
    rec.check("embedding_identity", i, abs(emb - a) <= 1e-8, abs(emb - a), "<= 1e-8")

    dim = int(rng.integers(2, 17))
    psi, phi = sampling.ginibre(rng, dim, 1)[:, 0], sampling.ginibre(rng, dim, 1)[:, 0]
    lhs, rhs = rank_one_identity(psi, phi)
    rec.check("rank_one_identity", i, abs(lhs - rhs) <= 1e-9 * max(1.0, rhs), abs(lhs - rhs), "<= 1e-9")
    # with a Hermitian generator the overlap is real and |<psi|phi>|^2 may be used
    herm = sampling.hermitian(rng, dim)
    lhs, rhs = rank_one_identity(psi, herm @ psi, real_overlap=False)
    rec.check("rank_one_identity_hermitian", i, abs(lhs - rhs) <= 1e-9 * max(1.0, rhs), abs(lhs - rhs),
              "<= 1e-9")

    t2, _ = random_binary_triple(rng)
    lhs_m, rhs_m = mixing.binary_sandwich_identity(t2)
    err = float(np.max(np.abs(lhs_m - rhs_m)))
    rec.check("binary_sandwich_identity", i, err <= 1e-9, err, "<= 1e-9")


def suite_lemmas(rec: _Recorder, i: int, rng, extra=None) -> None:
    dim = int(rng.integers(2, 13))
    pi = sampling.contraction(rng, dim) if rng.uniform() < 0.5 else \
        sampling.projector(rng, dim, int(rng.integers(1, max(2, dim // 2 + 1))))
    r = sampling.projector(rng, dim, int(rng.integers(1, dim)))
    lhs, rhs = mixing.holder_commutator_bound(pi, r)
    rec.check("holder_bound", i, lhs <= rhs + 1e-9, lhs - rhs, "lhs <= rhs + 1e-9", dim=dim)

    pp = mixing.canonical_reduce(pi, r)
    m = int(round(np.trace(r).real))
    lo = float(np.linalg.eigvalsh(pp)[0])
    diff = float(np.linalg.eigvalsh(pi - pp)[0])
    comm = float(np.max(np.abs(linalg.commutator(pi, r) - linalg.commutator(pp, r))))
    tr = float(np.trace(pp).real)
    rec.check("canonical_i_lower", i, lo >= -1e-8, lo, "Pi' >= -1e-8")
    rec.check("canonical_i_upper", i, diff >= -1e-8, diff, "Pi - Pi' >= -1e-8")
    rec.check("canonical_ii", i, comm <= 1e-8, comm, "|[Pi,R] - [Pi',R]| <= 1e-8")
    rec.check("canonical_iii", i, tr <= m + 1e-8, tr - m, "Tr Pi' <= m + 1e-8")

    da, db = (int(v) for v in rng.integers(2, 4, size=2))
    rank = int(rng.integers(1, da * db + 1))
    rho_ab = sampling.density(rng, da * db, rank)
    red = mixing.sie_reduction(rho_ab, (da, db))
    rec.check("mu_psd", i, red.mu_min_eig >= -1e-9, red.mu_min_eig, "lambda_min(mu) >= -1e-9",
              dims=[da, db], rank=rank)
    h = sampling.hermitian(rng, da * db)
    lhs_r = mixing.mixing_rate(red.triple, h)
    rhs_r = mixing.sie_gamma_expression(rho_ab, red.tau, h) / db**2
    rec.check("mu_rate_identity", i, abs(lhs_r - rhs_r) <= 1e-9, abs(lhs_r - rhs_r), "<= 1e-9")

    t, _ = random_binary_triple(rng)
    lhs_m, rhs_m = mixing.binary_sandwich_identity(t)
    err = float(np.max(np.abs(lhs_m - rhs_m)))
    rec.check("binary_sandwich_identity", i, err <= 1e-9, err, "<= 1e-9")

    q = float(rng.uniform(1e-4, 0.5))
    x2 = float(rng.uniform(0.0, q))
    x1 = float(rng.uniform(q, 1.0))
    g = mixing.g_function(x1, x2, q)
    bound = 6.0 * q * abs(math.log2(q))
    rec.check("g_lemma_sample", i, g <= bound + 1e-12, g - bound, "g <= 6 q |log q|", q=q, x1=x1, x2=x2)


def g_lemma_grid(q: float, n: int = 1000) -> tuple[float, float]:
    """Maximum of ``g`` over an ``n x n`` grid on ``[q, 1] x [0, q]`` and the bound."""
    x1 = np.linspace(q, 1.0, n)[:, None]
    x2 = np.linspace(0.0, q, n)[None, :]
    return float(np.max(mixing.g_function_grid(x1, x2, q))), 6.0 * q * abs(math.log2(q))


def entropy_bound_grid(n: int = 10_000) -> float:
    """Largest value of ``h2(x) - 2 x |log2 x|`` on ``(0, 1/2]``."""
    x = np.linspace(0.5 / n, 0.5, n)
    h = -x * np.log2(x) - (1 - x) * np.log2(1 - x)
    return float(np.max(h - 2 * x * np.abs(np.log2(x))))


def suite_bounds(rec: _Recorder, i: int, rng, extra=None) -> None:
    e = random_ensemble(rng)
    h = sampling.hermitian(rng, e.rho0.shape[0])
    t = mixing.ensemble_to_triple(e)
    ratio = mixing.mixing_rate(t, h) / linalg.operator_norm(h)
    rec.check("universal_bound", i, ratio <= 2.0, ratio, "Lambda(E,H)/||H|| <= 2")
    lam_max, _ = mixing.max_mixing_rate(t)
    rec.check("universal_bound_max", i, lam_max <= 2.0, lam_max, "Lambda(E) <= 2")

    tb, _ = random_binary_triple(rng)
    lam, bound = mixing.sim_binary_bound(tb)
    rec.check("sim_binary", i, lam <= bound + 1e-12, lam - bound, "Lambda <= 6 h2(p)", p=tb.p)
    rec.check("sim_binary_universal", i, lam <= 2.0, lam, "Lambda <= 2")

    # small p: p below the smallest eigenvalue of rho
    dim = int(rng.integers(2, 7))
    rho = sampling.density(rng, dim)
    lmin = float(np.linalg.eigvalsh(rho)[0])
    pi = sampling.contraction(rng, dim)
    p_target = float(rng.uniform(0.05, 0.95)) * min(lmin, 0.5)
    pi = pi * (p_target / np.trace(pi @ rho).real)
    if np.linalg.eigvalsh(pi)[-1] <= 1.0:
        ts = mixing.EnsembleTriple(p_target, rho, pi)
        lam_s, _ = mixing.max_mixing_rate(ts)
        b = 2.0 * p_target * abs(math.log2(p_target))
        rec.check("small_p_bound", i, lam_s <= b + 1e-12, lam_s - b, "Lambda <= 2 p |log p|")
    else:
        rec.skip("small_p_bound", i, "scaled Pi exceeds I")

    # small total mixing along the trajectory
    tt = float(rng.uniform(-3.0, 3.0))
    s_t = linalg.entropy(e.evolved_average(h, tt))
    s_bar = (1 - e.p) * linalg.entropy(e.rho0) + e.p * linalg.entropy(e.rho1)
    hp = linalg.binary_entropy(e.p)
    rec.check("small_total_mixing_lower", i, s_t >= s_bar - 1e-9, s_bar - s_t, "S(t) >= S_bar")
    rec.check("small_total_mixing_upper", i, s_t <= s_bar + hp + 1e-9, s_t - s_bar - hp,
              "S(t) <= S_bar + h2(p)")

    # SIE without ancillas: Gamma <= 2 log2 d, d = min(A, B)
    state, hh = random_entangling_instance(rng)
    g, h_opt = ent.gamma_no_ancilla_max(state)
    d = min(state.cut)
    rec.check("sie_no_ancilla", i, g <= 2 * math.log2(d), g, "Gamma <= 2 log2 d", dims=list(state.dims))
    rate = ent.entangling_rate(state, hh) / linalg.operator_norm(hh)
    rec.check("no_ancilla_maximality", i, rate <= g + 1e-9, rate - g, "rate <= Gamma(psi)")
    got = ent.entangling_rate(state, h_opt)
    rec.check("no_ancilla_optimal_h", i, abs(got - g) <= 1e-8, abs(got - g), "|rate(H_opt) - Gamma| <= 1e-8")


def suite_duality(rec: _Recorder, i: int, rng, extra=None) -> None:
    dim = int(rng.integers(2, 7))
    rho = sampling.density(rng, dim)
    lmin = float(np.linalg.eigvalsh(rho)[0])
    p = float(rng.uniform(min(lmin, 0.5) * 0.5, 0.5))
    problem = solver.SimProblem(rho, p)
    k = sampling.projector(rng, dim, int(rng.integers(1, dim + 1)))
    step = solver.maximize_over_Pi(k, problem)
    check_pi_step(rec, i, step, rho, p)
    x = 2j * solver._commutator_sandwich(solver._prepare(rho, p), k)
    x = 0.5 * (x + x.conj().T)
    # convexity and asymptotic slopes of the dual function
    lo, hi = solver.dual_bracket(x, rho, p)
    span = max(hi - lo, 1.0)
    grid = np.linspace(lo - span, hi + span, 81)
    f = np.array([solver.dual_function(x, rho, p, t) for t in grid])
    second = f[2:] - 2 * f[1:-1] + f[:-2]
    rec.check("dual_convexity", i, second.min() >= -1e-8, float(second.min()), "second differences >= -1e-8")
    far = 1e3 * (1.0 + float(np.max(np.abs(np.linalg.eigvalsh(x)))) / lmin)
    left = (solver.dual_function(x, rho, p, -far) - solver.dual_function(x, rho, p, -2 * far)) / far
    right = (solver.dual_function(x, rho, p, 2 * far) - solver.dual_function(x, rho, p, far)) / far
    rec.check("dual_slope_left", i, abs(left + (1 - p)) <= 1e-8, left, "slope -> -(1-p)")
    rec.check("dual_slope_right", i, abs(right - p) <= 1e-8, right, "slope -> p")
    if i % 10 == 0:
        res = solver.alternate_solve(problem, solver.SolverConfig(iterations=8, restarts=4,
                                                                   master_seed=int(rng.integers(2**32))))
        rec.check("solver_duality_gap", i, res.duality_gap <= 1e-6, res.duality_gap, "<= 1e-6")
        rec.check("solver_slackness", i, res.max_slackness <= 1e-6, res.max_slackness, "<= 1e-6")
        rec.check("solver_universal_bound", i, res.F_max <= 2.0, res.F_max, "F_max <= 2")
        for trace in res.traces:
            drop = max((a - b for a, b in zip(trace, trace[1:])), default=0.0)
            rec.check("solver_monotone", i, drop <= 1e-9, drop, "objective never drops by > 1e-9")


def check_pi_step(rec: _Recorder, i: int, step: solver.PiStep, rho, p) -> None:
    rec.check("strong_duality", i, step.gap <= 1e-6, step.gap, "|Tr(X Pi) - f(lambda0)| <= 1e-6")
    rec.check("slackness_upper", i, abs(step.slack_upper) <= 1e-6, step.slack_upper, "Tr((I-Pi)A) <= 1e-6")
    rec.check("slackness_lower", i, abs(step.slack_lower) <= 1e-6, step.slack_lower, "Tr(Pi B) <= 1e-6")
    w = np.linalg.eigvalsh(step.Pi)
    rec.check("pi_admissible", i, w[0] >= -1e-8 and w[-1] <= 1 + 1e-8 and step.constraint_residual <= 1e-8,
              max(-w[0], w[-1] - 1, step.constraint_residual), "0 <= Pi <= I, Tr(Pi rho) = p")


_SUITE_FUNCS: dict[str, Callable] = {
    "identities": suite_identities,
    "lemmas": suite_lemmas,
    "bounds": suite_bounds,
    "duality": suite_duality,
}


def run_suite(name: str, instances: int = 100, seed: int = 0, extra=None) -> VerificationReport:
    """Run one suite (or ``"all"``). ``extra`` lets callers inject one
    ensemble into the ``identities`` suite (used for degenerate inputs)."""
    if name == "all":
        start = time.perf_counter()
        total = VerificationReport("all", instances)
        for sub in SUITES:
            total.merge(run_suite(sub, instances, seed, extra if sub == "identities" else None))
        total.seconds = time.perf_counter() - start
        return total
    if name not in _SUITE_FUNCS:
        raise ValueError(f"unknown suite {name!r}; choose from {SUITES + ('all',)}")
    report = VerificationReport(name, instances)
    rec = _Recorder(report)
    start = time.perf_counter()
    fn = _SUITE_FUNCS[name]
    for i in range(instances):
        rng = instance_rng(seed, name, i)
        try:
            fn(rec, i, rng, extra if i == 0 else None)
        except DegenerateInputError as exc:
            rec.skip(name, i, str(exc))
    if name == "lemmas":
        for q in (0.5, 0.25, 0.1, 0.01):
            gmax, bound = g_lemma_grid(q)
            rec.check("g_lemma_grid", 0, gmax <= bound, gmax - bound, "max g <= 6 q |log q|", q=q)
        gap = entropy_bound_grid()
        rec.check("h2_le_2xlogx", 0, gap <= 1e-12, gap, "h2(x) <= 2 x |log x| for x <= 1/2")
    if name == "bounds":
        for row in ent.figure2_scan([2**k for k in range(1, 11)]):
            rec.check("sie_gamma_d", row.d, row.gamma_d <= 2 * row.log2d, row.gamma_d, "Gamma_d <= 2 log2 d")
    report.seconds = time.perf_counter() - start
    return report
