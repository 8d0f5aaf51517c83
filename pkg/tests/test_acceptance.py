"""Acceptance criteria, one test each, at the stated tolerances.

Every test emits a single ``PASS``/``FAIL`` line; under pytest the lines are
collected into an "acceptance criteria" section of the terminal summary.
Run directly (``python3 tests/test_acceptance.py``) to print only the lines.
"""

import math
import time

import numpy as np
import pytest

from ratelab import entangling as ent
from ratelab import linalg, mixing, sampling, solver, verify

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script from elsewhere
    ACCEPTANCE_LINES = []

FIG3_DIMS = (4, 8)
FIG3_PCOUNT = 10
FIG3_SEEDS = (0, 1)


def emit(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {number:>2} {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return bool(ok)


def timed(fn):
    start = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - start


def criterion_1():
    opt, secs = timed(lambda: ent.optimize_lambda(2))
    ok = 0.9158 <= opt.lam <= 0.9178 and 1.9113 <= opt.gamma <= 1.9133 and secs < 1.0
    return emit(1, "reference optimum d=2", ok,
                f"lambda={opt.lam:.6f} in [0.9158,0.9178], Gamma={opt.gamma:.6f} in [1.9113,1.9133], {secs:.3f}s")


def criterion_2():
    d = 2**10

    def run():
        opt = ent.optimize_lambda(d)
        return opt, linalg.shannon_entropy(ent.binary_spectrum(opt.lam, d))

    (opt, s_d), secs = timed(run)
    lam_ref = 0.5 * (1 + 1 / math.log(d))
    s_ref = 0.5 * math.log2(d)
    lam_err = abs(opt.lam - lam_ref) / lam_ref
    s_err = abs(s_d - s_ref) / s_ref
    ok = lam_err <= 0.05 and s_err <= 0.10 and secs < 1.0
    return emit(2, "asymptotics d=2^10", ok,
                f"lambda_opt={opt.lam:.5f} vs (1+1/ln d)/2={lam_ref:.5f}: {100 * lam_err:.1f}% (limit 5%); "
                f"S_d={s_d:.4f} vs log2(d)/2={s_ref:.1f}: {100 * s_err:.1f}% (limit 10%); {secs:.3f}s")


def criterion_3(instances=100):
    dt = 1e-5
    tol = 1e3 * dt

    def run():
        worst_e = worst_m = 0.0
        g = np.random.default_rng(3)
        for _ in range(instances):
            A, B = (int(v) for v in g.integers(2, 5, size=2))
            state = ent.BipartitePureState(sampling.pure_state(g, A * B), (A, B))
            h = sampling.hermitian(g, A * B)
            fd = (ent.evolved_entropy(state, h, dt) - ent.evolved_entropy(state, h, -dt)) / (2 * dt)
            worst_e = max(worst_e, abs(ent.entangling_rate(state, h) - fd))
        for _ in range(instances):
            dim = int(g.integers(2, 7))
            e = verify.random_ensemble(g, dim)
            h = sampling.hermitian(g, dim)
            fd = (linalg.entropy(e.evolved_average(h, dt)) - linalg.entropy(e.evolved_average(h, -dt))) / (2 * dt)
            worst_m = max(worst_m, abs(mixing.mixing_rate(mixing.ensemble_to_triple(e), h) - fd))
        return worst_e, worst_m

    (worst_e, worst_m), secs = timed(run)
    ok = worst_e <= tol and worst_m <= tol and secs < 30
    return emit(3, "rate-derivative consistency", ok,
                f"{instances}+{instances} instances, max error {worst_e:.2e} (entangling), "
                f"{worst_m:.2e} (mixing) <= {tol:g}, {secs:.1f}s")


def criterion_4(instances=100):
    report, secs = timed(lambda: verify.run_suite("lemmas", instances, seed=4))
    names = ("holder_bound", "canonical_i_lower", "canonical_i_upper", "canonical_ii", "canonical_iii",
             "mu_psd", "binary_sandwich_identity")
    counts = {n: report.checks.get(n, 0) for n in names}
    fails = [f for f in report.failures if f.check in names]
    ok = all(c >= instances for c in counts.values()) and not fails and secs < 60
    return emit(4, "lemma suites", ok,
                f"{min(counts.values())}+ instances per check, {len(fails)} failures, {secs:.1f}s")


def criterion_5(instances=500):
    g = np.random.default_rng(5)
    worst = 0.0
    for _ in range(instances):
        dim = int(g.integers(2, 9))
        t = mixing.ensemble_to_triple(verify.random_ensemble(g, dim))
        h = sampling.hermitian(g, dim)
        worst = max(worst, mixing.mixing_rate(t, h) / linalg.operator_norm(h), mixing.max_mixing_rate(t)[0])
    return emit(5, "universal bound Lambda/||H|| <= 2", worst <= 2.0,
                f"{instances} ensembles, max ratio {worst:.4f}")


def criterion_6(instances=500):
    g = np.random.default_rng(6)
    worst, violations = -math.inf, 0
    for _ in range(instances):
        t, _ = verify.random_binary_triple(g, 12)
        lam, bound = mixing.sim_binary_bound(t)
        violations += lam > bound
        if bound > 0:
            worst = max(worst, lam / bound)
    return emit(6, "binary-spectrum SIM Lambda <= 6 h2(p)", violations == 0,
                f"{instances} triples, {violations} violations, max Lambda/bound {worst:.4f}")


def criterion_7():
    parts, ok = [], True
    for q in (0.5, 0.25, 0.1, 0.01):
        gmax, bound = verify.g_lemma_grid(q, 1000)
        ok &= gmax <= bound
        parts.append(f"q={q}: {gmax:.4f} <= {bound:.4f}")
    return emit(7, "g-lemma grid", ok, "; ".join(parts))


_FIG3_CACHE: dict = {}


def figure3_runs():
    if not _FIG3_CACHE:
        for seed in FIG3_SEEDS:
            cfg = solver.SolverConfig(master_seed=seed)
            _FIG3_CACHE[seed] = timed(lambda: solver.figure3_scan(FIG3_DIMS, FIG3_PCOUNT, cfg))
    return _FIG3_CACHE


def criterion_8():
    g = np.random.default_rng(8)
    gap = slack = 0.0
    steps = 0
    for _ in range(50):
        dim = int(g.integers(2, 7))
        rho = sampling.density(g, dim)
        problem = solver.SimProblem(rho, float(g.uniform(np.linalg.eigvalsh(rho)[0], 0.5)))
        res = solver.alternate_solve(problem, solver.SolverConfig(iterations=16, restarts=8,
                                                                  master_seed=int(g.integers(2**32))))
        gap, slack = max(gap, res.duality_gap), max(slack, res.max_slackness)
        steps += 16 * len(res.per_restart_values)
    for scan, _ in figure3_runs().values():
        for res in scan.results:
            gap, slack = max(gap, res.duality_gap), max(slack, res.max_slackness)
            steps += 32 * len(res.per_restart_values)
    ok = gap <= 1e-6 and slack <= 1e-6
    return emit(8, "duality at every Pi-step", ok,
                f"{steps} Pi-steps, max |Tr(X Pi) - f(lambda0)| {gap:.2e}, max slackness {slack:.2e}")


def criterion_9():
    runs = figure3_runs()
    (a, ta), (b, tb) = runs[FIG3_SEEDS[0]], runs[FIG3_SEEDS[1]]
    excess = max(r.F_max - r.entropy_bits for r in a.rows + b.rows)
    drift = max(abs(x.F_max - y.F_max) for x, y in zip(a.rows, b.rows))
    complete = len(a.rows) == len(b.rows) == len(FIG3_DIMS) * FIG3_PCOUNT and not a.errors and not b.errors
    ok = complete and excess <= 1e-2 and drift <= 1e-2
    return emit(9, "embezzling-state scan D=4,8", ok,
                f"D={list(FIG3_DIMS)} x {FIG3_PCOUNT} p, max F_max - h2(p) = {excess:.4f} (<= 0.01), "
                f"seed drift {drift:.2e} (<= 0.01), {ta + tb:.0f}s")


def criterion_10(instances=100):
    g = np.random.default_rng(10)
    worst = 0.0
    for _ in range(instances):
        dim = int(g.integers(2, 5))
        e = verify.random_ensemble(g, dim)
        h = sampling.hermitian(g, dim)
        worst = max(worst, abs(mixing.embedding_rate(e, h) - mixing.ensemble_mixing_rate(e, h)))
    return emit(10, "cross-module embedding", worst <= 1e-8,
                f"{instances} ensembles, max |Gamma - Lambda| {worst:.2e}")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9, criterion_10]


@pytest.mark.parametrize("criterion", CRITERIA, ids=[f"criterion_{i}" for i in range(1, 11)])
def test_acceptance(criterion):
    assert criterion()


if __name__ == "__main__":
    results = [c() for c in CRITERIA]
    print(f"{sum(results)}/{len(results)} criteria pass")
