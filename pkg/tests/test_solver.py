import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ratelab import linalg, mixing, sampling, solver
from ratelab.errors import DomainError, SolverError

seeds = st.integers(0, 2**32 - 1)
QUICK = solver.SolverConfig(iterations=16, restarts=16)


def random_problem(g, dim, low=None):
    rho = sampling.density(g, dim)
    lmin = float(np.linalg.eigvalsh(rho)[0])
    p = float(g.uniform(lmin if low is None else low, 0.5))
    return solver.SimProblem(rho, p)


def random_admissible_pi(g, rho, p):
    # Pi = P+ + x P0 of a random X is admissible and hits Tr(Pi rho) = p exactly
    x = sampling.hermitian(g, len(rho))
    return solver.solve_pi_step(x, rho, p).Pi


def x_operator(k, rho):
    prep = solver._prepare(rho, 0.0)
    return solver._herm(2j * solver._commutator_sandwich(prep, k))


# --- problem and config ------------------------------------------------------


def test_problem_validation():
    with pytest.raises(DomainError):
        solver.SimProblem(np.eye(2) / 2, 0.6)
    with pytest.raises(DomainError):
        solver.SimProblem(np.eye(2) / 2, 0.0)
    with pytest.raises(DomainError):
        solver.SimProblem(np.diag([1.0, 0.0]), 0.3)


def test_config_validation():
    with pytest.raises(ValueError):
        solver.SolverConfig(iterations=0)
    with pytest.raises(ValueError):
        solver.SolverConfig(master_seed=-1)
    with pytest.raises(ValueError):
        solver.SolverConfig(dual_method="newton")


# --- objective and K-step ----------------------------------------------------


def test_objective_examples(rng):
    rho = sampling.density(rng, 3)
    pi = random_admissible_pi(rng, rho, 0.3)
    assert solver.objective(np.eye(3) / 2, pi, rho) == pytest.approx(0.0, abs=1e-14)
    diag_rho = np.diag([0.5, 0.3, 0.2])
    k = sampling.projector(rng, 3, 1)
    assert solver.objective(k, np.diag([0.2, 0.4, 0.4]), diag_rho) == pytest.approx(0.0, abs=1e-14)
    with pytest.raises(DomainError):
        solver.objective(2 * np.eye(3), pi, rho)


@given(seed=seeds, dim=st.integers(2, 5))
def test_objective_is_mixing_rate(seed, dim):
    g = np.random.default_rng(seed)
    rho = sampling.density(g, dim)
    p = float(g.uniform(0.05, 0.5))
    pi = random_admissible_pi(g, rho, p)
    k = sampling.contraction(g, dim)
    f = solver.objective(k, pi, rho)
    rate = mixing.mixing_rate(mixing.EnsembleTriple(p, rho, pi), 2 * k - np.eye(dim))
    assert abs(f - rate) <= 1e-9


def test_k_step_examples(rng):
    step = solver.maximize_over_K(np.diag([0.2, 0.4, 0.4]), np.diag([0.5, 0.3, 0.2]))
    assert step.value == pytest.approx(0.0, abs=1e-14)
    assert np.allclose(step.K, 0)


@given(seed=seeds, dim=st.integers(2, 5))
def test_k_step_is_maximal(seed, dim):
    g = np.random.default_rng(seed)
    rho = sampling.density(g, dim)
    pi = random_admissible_pi(g, rho, 0.4)
    step = solver.maximize_over_K(pi, rho)
    prep = solver._prepare(rho, 0.0)
    z = solver._herm(-2j * solver._commutator_sandwich(prep, pi))
    assert step.value == pytest.approx(0.5 * linalg.trace_norm(z), abs=1e-12)
    assert solver.objective(step.K, pi, rho) == pytest.approx(step.value, abs=1e-9)
    assert np.allclose(step.K @ step.K, step.K, atol=1e-10)
    for _ in range(100):
        k = sampling.contraction(g, dim) if g.uniform() < 0.5 else \
            sampling.projector(g, dim, int(g.integers(1, dim + 1)))
        assert solver.objective(k, pi, rho) <= step.value + 1e-12


# --- Pi-step and its dual ----------------------------------------------------


def test_pi_step_textbook_example():
    x = np.diag([1.0, -1.0])
    step = solver.solve_pi_step(x, np.eye(2) / 2, 0.5)
    assert step.dual_value == pytest.approx(1.0)
    assert step.value == pytest.approx(1.0)
    assert -2.0 <= step.lambda0 <= 2.0
    assert np.allclose(step.Pi, np.diag([1.0, 0.0]))


@pytest.mark.parametrize("method", ["kinks", "golden"])
def test_pi_step_zero_x(method, rng):
    rho = sampling.density(rng, 3)
    step = solver.solve_pi_step(np.zeros((3, 3)), rho, 0.3, method=method)
    assert step.value == 0.0 and step.lambda0 == 0.0
    assert step.constraint_residual <= 1e-8
    w = np.linalg.eigvalsh(step.Pi)
    assert w[0] >= -1e-10 and w[-1] <= 1 + 1e-10


def test_maximize_over_pi_with_commuting_k(rng):
    rho = np.diag([0.5, 0.3, 0.2])
    step = solver.maximize_over_Pi(np.diag([1.0, 0.0, 1.0]), solver.SimProblem(rho, 0.3))
    assert step.value == pytest.approx(0.0, abs=1e-14)
    assert step.constraint_residual <= 1e-8


@given(seed=seeds, dim=st.integers(2, 6))
def test_pi_step_duality_and_admissibility(seed, dim):
    g = np.random.default_rng(seed)
    problem = random_problem(g, dim, low=0.01)
    k = sampling.projector(g, dim, int(g.integers(1, dim + 1)))
    step = solver.maximize_over_Pi(k, problem)
    w = np.linalg.eigvalsh(step.Pi)
    assert w[0] >= -1e-8 and w[-1] <= 1 + 1e-8
    assert step.constraint_residual <= 1e-8
    assert step.gap <= 1e-6
    assert abs(step.slack_upper) <= 1e-6 and abs(step.slack_lower) <= 1e-6
    # weak duality: every lambda gives an upper bound
    x = x_operator(k, problem.rho)
    for lam in g.normal(step.lambda0, 1.0, 10):
        assert solver.dual_function(x, problem.rho, problem.p, lam) >= step.value - 1e-9


@given(seed=seeds, dim=st.integers(2, 6))
def test_golden_and_kink_duals_agree(seed, dim):
    g = np.random.default_rng(seed)
    problem = random_problem(g, dim, low=0.01)
    k = sampling.projector(g, dim, int(g.integers(1, dim + 1)))
    a = solver.maximize_over_Pi(k, problem, solver.SolverConfig(dual_method="kinks"))
    b = solver.maximize_over_Pi(k, problem, solver.SolverConfig(dual_method="golden"))
    assert a.value == pytest.approx(b.value, abs=1e-7)
    assert a.dual_value == pytest.approx(b.dual_value, abs=1e-7)


@given(seed=seeds, dim=st.integers(2, 6))
def test_dual_function_convex_with_asymptotic_slopes(seed, dim):
    g = np.random.default_rng(seed)
    problem = random_problem(g, dim, low=0.01)
    x = x_operator(sampling.projector(g, dim, 1), problem.rho)
    lo, hi = solver.dual_bracket(x, problem.rho, problem.p)
    grid = np.linspace(lo - 1, hi + 1, 101)
    f = np.array([solver.dual_function(x, problem.rho, problem.p, t) for t in grid])
    assert np.min(f[2:] - 2 * f[1:-1] + f[:-2]) >= -1e-8
    far = 1e4 * (1 + linalg.operator_norm(x) / np.linalg.eigvalsh(problem.rho)[0])
    f_ = lambda t: solver.dual_function(x, problem.rho, problem.p, t)  # noqa: E731
    assert (f_(-far) - f_(-2 * far)) / far == pytest.approx(-(1 - problem.p), abs=1e-8)
    assert (f_(2 * far) - f_(far)) / far == pytest.approx(problem.p, abs=1e-8)


def test_bracket_contains_minimizer(rng):
    rho = sampling.density(rng, 4)
    x = sampling.hermitian(rng, 4)
    lo, hi = solver.dual_bracket(x, rho, 0.3)
    step = solver.solve_pi_step(x, rho, 0.3)
    assert lo - 1e-9 <= step.lambda0 <= hi + 1e-9


def primal_oracle(x, rho, p):
    cp = pytest.importorskip("cvxpy")
    n = len(rho)
    pi = cp.Variable((n, n), hermitian=True)
    cons = [pi >> 0, np.eye(n) - pi >> 0, cp.real(cp.trace(pi @ rho)) == p]
    prob = cp.Problem(cp.Maximize(cp.real(cp.trace(x @ pi))), cons)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)  # inaccurate solves are retried below
        prob.solve(solver="CLARABEL")
    if prob.status != cp.OPTIMAL:
        prob.solve(solver="SCS", eps=1e-10, max_iters=200_000)
    assert prob.status == cp.OPTIMAL
    return prob.value


@pytest.mark.parametrize("seed", range(8))
def test_pi_step_matches_primal_sdp(seed):
    g = np.random.default_rng(seed)
    dim = int(g.integers(2, 6))
    problem = random_problem(g, dim, low=0.01)
    k = sampling.projector(g, dim, int(g.integers(1, dim + 1)))
    step = solver.maximize_over_Pi(k, problem)
    oracle = primal_oracle(x_operator(k, problem.rho), problem.rho, problem.p)
    assert step.value == pytest.approx(oracle, abs=1e-4)


# --- alternating solve -------------------------------------------------------


def two_by_two_grid(a, c):
    # Pi = [[a, c], [c, 1 - 2a]] satisfies Tr(Pi rho) = 1/3 for rho = diag(2/3, 1/3);
    # a diagonal phase makes c real without loss. Max over K is ||Z||_1 / 2.
    rho = np.diag([2 / 3, 1 / 3])
    sq = np.sqrt(np.diag(rho))
    lg = np.log2(np.diag(rho))
    a, c = np.meshgrid(a, c, indexing="ij")
    pis = np.zeros(a.shape + (2, 2))
    pis[..., 0, 0], pis[..., 1, 1] = a, 1 - 2 * a
    pis[..., 0, 1] = pis[..., 1, 0] = c
    w = np.linalg.eigvalsh(pis)
    ok = (w[..., 0] >= -1e-12) & (w[..., 1] <= 1 + 1e-12)
    comm = pis * (lg[None, :] - lg[:, None])  # [Pi, L]_{ij} = Pi_ij (l_j - l_i)
    z = -2j * comm * np.outer(sq, sq)
    vals = np.where(ok, 0.5 * np.abs(np.linalg.eigvalsh(z)).sum(axis=-1), -np.inf)
    i, j = np.unravel_index(np.argmax(vals), vals.shape)
    return float(vals[i, j]), float(a[i, j]), float(c[i, j])


def two_by_two_grid_maximum(n=801, rounds=6):
    lo_a, hi_a, lo_c, hi_c = 0.0, 0.5, 0.0, 0.5
    for _ in range(rounds):
        best, a, c = two_by_two_grid(np.linspace(lo_a, hi_a, n), np.linspace(lo_c, hi_c, n))
        da, dc = 40 * (hi_a - lo_a) / n, 40 * (hi_c - lo_c) / n
        lo_a, hi_a = max(a - da, 0.0), min(a + da, 0.5)
        lo_c, hi_c = max(c - dc, 0.0), min(c + dc, 0.5)
    return best


def test_two_by_two_against_grid():
    oracle = two_by_two_grid_maximum()
    assert oracle == pytest.approx(1 / 3, abs=1e-4)
    res = solver.alternate_solve(solver.SimProblem(np.diag([2 / 3, 1 / 3]), 1 / 3), QUICK)
    assert res.F_max == pytest.approx(1 / 3, abs=1e-9)
    assert res.F_max >= oracle - 1e-12
    assert res.Pi_opt[0, 0].real == pytest.approx(0.25, abs=1e-6)
    assert abs(res.Pi_opt[0, 1]) == pytest.approx(1 / (2 * math.sqrt(2)), abs=1e-6)


def test_alternate_solve_invariants(rng):
    problem = random_problem(rng, 4, low=0.05)
    res = solver.alternate_solve(problem, QUICK)
    assert res.F_max == max(res.per_restart_values)
    assert len(res.per_restart_values) == QUICK.restarts
    assert res.F_max <= 2.0
    assert res.duality_gap <= 1e-6
    assert res.max_slackness <= 1e-6
    assert res.max_constraint_residual <= 1e-8
    assert not res.failures
    for trace in res.traces:
        assert len(trace) == 2 * QUICK.iterations
        assert all(b >= a - 1e-9 for a, b in zip(trace, trace[1:]))
    assert res.estimated_precision >= 0
    json.dumps(res.to_dict())


def test_alternate_solve_deterministic():
    problem = solver.SimProblem(solver.embezzling_state(4), 0.3)
    cfg = solver.SolverConfig(iterations=8, restarts=12, master_seed=99)
    a = solver.alternate_solve(problem, cfg)
    b = solver.alternate_solve(problem, cfg)
    c = solver.alternate_solve(problem, solver.SolverConfig(iterations=8, restarts=12, master_seed=99,
                                                            workers=2))
    assert a.per_restart_values == b.per_restart_values == c.per_restart_values
    assert a.F_max == c.F_max and a.best_restart == c.best_restart
    d = solver.alternate_solve(problem, solver.SolverConfig(iterations=8, restarts=12, master_seed=100))
    assert d.per_restart_values != a.per_restart_values


def test_restart_failures_are_recorded(monkeypatch):
    real = solver.solve_pi_step
    calls = {"n": 0}

    def flaky(*args, **kwargs):
        calls["n"] += 1
        if calls["n"] == 1:
            raise SolverError("synthetic failure")
        return real(*args, **kwargs)

    monkeypatch.setattr(solver, "solve_pi_step", flaky)
    res = solver.alternate_solve(solver.SimProblem(solver.embezzling_state(3), 0.3),
                                 solver.SolverConfig(iterations=4, restarts=4))
    assert [f["restart"] for f in res.failures] == [0]
    assert len(res.per_restart_values) == 3


def test_estimated_precision():
    assert solver.estimated_precision([1.0, 0.5, 0.99] + [0.0] * 17) == pytest.approx(0.01)
    assert solver.estimated_precision([0.3]) == 0.0


def test_embezzling_examples():
    assert np.allclose(solver.embezzling_state(2), np.diag([2 / 3, 1 / 3]))
    assert np.allclose(solver.embezzling_state(3), np.diag([6 / 11, 3 / 11, 2 / 11]))
    for D in (4, 9, 32):
        w = np.diag(solver.embezzling_state(D)).real
        assert w.sum() == pytest.approx(1.0) and np.all(np.diff(w) < 0)
    with pytest.raises(DomainError):
        solver.embezzling_state(1)


def test_embezzling_four_below_entropy():
    rho = solver.embezzling_state(4)
    for p in (0.2, 0.35, 0.5):
        res = solver.alternate_solve(solver.SimProblem(rho, p))
        assert res.F_max <= linalg.binary_entropy(p)


# --- tensor stability --------------------------------------------------------


@given(seed=seeds, dim=st.integers(2, 4), D=st.integers(2, 4))
def test_tensor_stability_identity(seed, dim, D):
    g = np.random.default_rng(seed)
    problem = random_problem(g, dim, low=0.05)
    pi = random_admissible_pi(g, problem.rho, problem.p)
    base, lifted = solver.tensor_stability_check(problem, D, pi=pi, h=sampling.hermitian(g, dim))
    assert abs(base - lifted) <= 1e-9


def test_tensor_stability_examples(rng):
    problem = solver.SimProblem(np.diag([0.5, 0.3, 0.2]), 0.3)
    base, lifted = solver.tensor_stability_check(problem, 2, pi=np.diag([0.2, 0.4, 0.4]),
                                                 h=sampling.hermitian(rng, 3))
    assert abs(base) <= 1e-14 and abs(lifted) <= 1e-14
    with pytest.raises(DomainError):
        solver.tensor_stability_check(solver.SimProblem(np.eye(8) / 8, 0.3), 16)


def test_lifted_state_is_at_least_as_good():
    problem = solver.SimProblem(np.diag([0.7, 0.3]), 0.4)
    cfg = solver.SolverConfig(restarts=32)
    base = solver.alternate_solve(problem, cfg).F_max
    rho_l, _ = solver.lift_triple(problem.rho, np.eye(2), 2)
    lifted = solver.alternate_solve(solver.SimProblem(rho_l, problem.p), cfg).F_max
    assert base <= lifted + 1e-3


# --- Figure 3 scan -----------------------------------------------------------


def test_default_p_grid():
    grid = solver.default_p_grid(4)
    lmin = float(np.real(solver.embezzling_state(4)[-1, -1]))
    assert len(grid) == 20 and grid[-1] == 0.5
    assert all(lmin < p <= 0.5 for p in grid)
    assert solver.default_p_grid(4, 1) == [0.5]


def test_figure3_scan_small():
    scan = solver.figure3_scan([3, 4], 2, solver.SolverConfig(iterations=8, restarts=8))
    assert solver.FIG3_HEADER == ("D", "p", "F_max", "entropy_bits", "precision")
    assert [r.D for r in scan.rows] == [3, 3, 4, 4]
    assert set(scan.p_grids) == {3, 4}
    for row in scan.rows:
        assert row.entropy_bits == pytest.approx(linalg.binary_entropy(row.p))
        assert row.F_max <= row.entropy_bits + row.precision + 1e-12
    assert not scan.errors
