"""Acceptance suite: one PASS/FAIL line per criterion.

Run alone with ``python3 tests/test_acceptance.py`` or through pytest; the
lines are printed even when pytest captures output.  Criterion 7 is marked
``slow`` (about ten minutes of wall-clock runs) but is part of the default
suite.
"""
import io
import math
import re
import sys
import warnings
from contextlib import redirect_stdout
from decimal import Decimal, getcontext

import numpy as np
import pytest

from inertialbcd.bench import (RunConfig, gen_synthetic_ncpd, gen_synthetic_nmf,
                               run_benchmark)
from inertialbcd.cli import main as cli_main
from inertialbcd.core import (ExtrapState, SolverSchedule, check_ibp_condition,
                              constant_params, constant_schedule, ibp_outer_loop,
                              lyapunov_trace, lyapunov_violations, max_feasible_ibp_alpha)
from inertialbcd.errors import ParameterWarning
from inertialbcd.matops import cp_reconstruct, mode_unfold
from inertialbcd.ncpd import (build_khatri_chain, gram_hadamard, ncpd_gradient, ncpd_objective,
                              random_factors, run_ncpd)
from inertialbcd.nmf import (NmfColumnProblem, NmfOptions, hals_column_update,
                             ibp_column_update, nesterov_tau_step, nmf_gradients,
                             nmf_objective, random_init, run_nmf)
from inertialbcd.matops import operator_norm_psd
from inertialbcd.trace import Budget


@pytest.fixture
def report(capsys):
    def emit(label, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {label}: {detail}"
        with capsys.disabled():
            print("\n" + line, flush=True)
        assert ok, line
    return emit


def _central_diff(f, A, h=1e-6):
    G = np.zeros_like(A)
    for idx in np.ndindex(A.shape):
        Ap, Am = A.copy(), A.copy()
        Ap[idx] += h
        Am[idx] -= h
        G[idx] = (f(Ap) - f(Am)) / (2 * h)
    return G


def _rel(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


# 1 -------------------------------------------------------------------------

def test_criterion_1_apgc_equivalence(report):
    opts = NmfOptions(gamma_tilde=0.9999, alpha_breve=0.9999, check_params=False)
    budget = Budget(max_iter=150, deterministic=True)
    identical = 0
    for seed in range(10):
        X = gen_synthetic_nmf("low-rank", 30, 30, 3, 1000 + seed).X
        s1, a = run_nmf(X, "IBPG", r=3, seed=seed, budget=budget, options=opts)
        s2, b = run_nmf(X, "APGC", r=3, seed=seed, budget=budget)
        same = (a.records == b.records and np.array_equal(s1.U, s2.U)
                and np.array_equal(s1.V, s2.V))
        identical += same
    report(1, identical == 10, f"{identical}/10 instances bit-identical (150 iterations each)")


# 2 -------------------------------------------------------------------------

def test_criterion_2_parameter_feasibility(report):
    nu, delta = 0.5, 1.01
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = cli_main(["check-params", "--nu", str(nu), "--delta", str(delta)])
    out = buf.getvalue()
    margin = float(re.search(r"margin=(\S+)", out).group(1))
    feasible = "feasible: yes" in out
    alpha_bc = float(re.search(r"block-convex: (\S+)", out).group(1))
    alpha_base = float(re.search(r"base: (\S+)", out).group(1))
    expect_bc = math.sqrt(4 * nu * (1 - nu) / delta)
    expect_base = math.sqrt(nu * (1 - nu) / delta)
    # the reported alpha is the boundary of the checker's feasible set
    edge = check_ibp_condition(constant_params(2, 2, alpha_bc * (1 - 1e-12), 1000.0), nu, delta,
                               variant="block-convex").feasible
    past = check_ibp_condition(constant_params(2, 2, alpha_bc * (1 + 1e-9), 1000.0), nu, delta,
                               variant="block-convex").feasible
    ok = (code == 0 and feasible and margin > 0
          and abs(alpha_bc - expect_bc) <= 1e-15 and abs(alpha_base - expect_base) <= 1e-15
          and alpha_bc == max_feasible_ibp_alpha(nu, delta, variant="block-convex")
          and edge and not past)
    report(2, ok, f"IBPG block-convex margin {margin:.3g} at delta=1.0001 "
                  f"(feasible={feasible}); IBP max alpha {alpha_base:.6g} (base), "
                  f"{alpha_bc:.6g} (block-convex) at nu={nu}, delta={delta}")


# 3 -------------------------------------------------------------------------

def test_criterion_3_lyapunov_monotonicity(report):
    nu, delta = 0.5, 1.01
    runs = 0
    worst = -math.inf
    bad = []
    for variant, frac in (("base", 0.98), ("block-convex", 0.98)):
        alpha = frac * max_feasible_ibp_alpha(nu, delta, variant=variant)
        sched = SolverSchedule(constant_schedule(alpha, beta=1.0), nu=nu, delta=delta,
                               variant=variant)
        for seed in range(20):
            X = gen_synthetic_nmf("low-rank", 20, 20, 3, 300 + seed).X
            prob = NmfColumnProblem(X, 3)
            U, V = random_init(20, 20, 3, seed)
            with warnings.catch_warnings():
                warnings.simplefilter("error", ParameterWarning)
                _, tr = ibp_outer_loop(prob, sched, ExtrapState(prob.split(U, V)),
                                       Budget(max_iter=60, deterministic=True),
                                       keep_history=True)
            recs = lyapunov_trace(prob, tr.history, sched)
            v = lyapunov_violations(recs, rtol=1e-10)
            if v:
                bad.append((variant, seed, v[:3]))
            worst = max(worst, max((b.total - a.total) / abs(a.total)
                                   for a, b in zip(recs, recs[1:])))
            runs += 1
    report(3, not bad, f"{runs} runs (20 instances x 2 variants, 60 loops), "
                       f"violations={bad or 'none'}, largest relative step {worst:.3g}")


# 4 -------------------------------------------------------------------------

def test_criterion_4_gradients(report):
    g = np.random.default_rng(404)
    worst_nmf = worst_ncpd = 0.0
    for _ in range(10):
        X, U, V = g.random((4, 5)), g.random((4, 2)), g.random((2, 5))
        worst_nmf = max(worst_nmf,
                        _rel(nmf_gradients(X, U, V, "U"),
                             _central_diff(lambda A: nmf_objective(X, A, V), U)),
                        _rel(nmf_gradients(X, U, V, "V"),
                             _central_diff(lambda B: nmf_objective(X, U, B), V)))
        T = g.random((4, 5, 6))
        fs = [g.random((d, 3)) for d in (4, 5, 6)]
        for mode in (1, 2, 3):
            def f(A, mode=mode):
                h = list(fs)
                h[mode - 1] = A
                return ncpd_objective(T, h)
            worst_ncpd = max(worst_ncpd, _rel(ncpd_gradient(T, fs, mode),
                                              _central_diff(f, fs[mode - 1])))
    ok = worst_nmf <= 1e-6 and worst_ncpd <= 1e-6
    report(4, ok, f"max relative FD mismatch NMF {worst_nmf:.2e}, NCPD {worst_ncpd:.2e} "
                  f"(tol 1e-6)")


# 5 -------------------------------------------------------------------------

def _entry_oracle(X, U, V, i, beta, u_hat):
    R = X.copy()
    for q in range(U.shape[1]):
        if q != i:
            R -= np.outer(U[:, q], V[q])
    out = np.empty(U.shape[0])
    for p in range(U.shape[0]):
        def phi(u):
            d = R[p] - u * V[i]
            return 0.5 * float(d @ d) + (u - u_hat[p]) ** 2 / (2 * beta)
        f0, f1, f2 = phi(0.0), phi(1.0), phi(2.0)
        a = (f2 - 2 * f1 + f0) / 2
        b = f1 - f0 - a
        out[p] = max(0.0, -b / (2 * a))
    return out


def test_criterion_5_closed_form(report):
    g = np.random.default_rng(505)
    worst = worst_lim = 0.0
    for _ in range(100):
        m, n, r = (int(v) for v in g.integers(2, 8, size=3))
        X, U, V = g.random((m, n)), g.random((m, r)), g.random((r, n))
        i = int(g.integers(r))
        beta = float(10 ** g.uniform(-2, 2))
        u_hat = g.random(m) * 2 - 0.5
        worst = max(worst, float(np.max(np.abs(
            ibp_column_update(X, U, V, i, beta, u_hat) - _entry_oracle(X, U, V, i, beta, u_hat)))))
        lim = ibp_column_update(X, U, V, i, 1e12, u_hat)
        worst_lim = max(worst_lim, float(np.max(np.abs(lim - hals_column_update(X, U, V, i)))))
    ok = worst <= 1e-10 and worst_lim <= 1e-8
    report(5, ok, f"100 columns: max oracle gap {worst:.2e} (tol 1e-10), "
                  f"1/beta=1e-12 vs HALS {worst_lim:.2e} (tol 1e-8)")


# 6 -------------------------------------------------------------------------

def test_criterion_6_tensor_identities(report):
    g = np.random.default_rng(606)
    worst_unf = worst_L = 0.0
    for _ in range(20):
        dims = tuple(int(d) for d in g.integers(2, 9, size=3))
        r = int(g.integers(1, 6))
        fs = [g.random((d, r)) for d in dims]
        T = cp_reconstruct(fs)
        nT = np.linalg.norm(T)
        for mode in (1, 2, 3):
            B = build_khatri_chain(fs, mode)
            worst_unf = max(worst_unf,
                            np.linalg.norm(mode_unfold(T, mode) - fs[mode - 1] @ B.T) / nT)
            lam = np.linalg.eigvalsh(B.T @ B)[-1]
            worst_L = max(worst_L, abs(operator_norm_psd(gram_hadamard(fs, mode)) - lam) / lam)
    ok = worst_unf <= 1e-12 and worst_L <= 1e-8
    report(6, ok, f"20 CP tensors: max unfolding residual {worst_unf:.2e}*||T|| (tol 1e-12), "
                  f"max Lipschitz rel gap {worst_L:.2e} (tol 1e-8)")


# 7 -------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_7a_nmf_small(report):
    rels = []
    for seed in range(20):
        X = gen_synthetic_nmf("low-rank", 50, 50, 5, seed).X
        # stop once well below the target; the time budget stays the limit
        # init seed differs from the data seed, else the start is the exact factors
        _, tr = run_nmf(X, "IBPG-A", r=5, seed=10_000 + seed,
                        budget=Budget(time_limit=5.0, tol=1e-6))
        assert tr.records[0].relerror > 1e-2
        rels.append(tr.final.relerror)
    hits = sum(e <= 1e-4 for e in rels)
    report("7a", hits >= 18, f"IBPG-A 50x50 r=5, 5 s: {hits}/20 seeds reach relerror <= 1e-4 "
                             f"(need 18), worst {max(rels):.2e}")


# Relative errors this small are at the rounding floor of the residual
# (a few hundred eps) and are not distinguishable; count them as ties.
ROUNDING_FLOOR = 1e-13


def _no_worse(a, b):
    return a <= b or max(a, b) <= ROUNDING_FLOOR


def test_no_worse_rule():
    assert _no_worse(1e-6, 2e-6)
    assert not _no_worse(2e-6, 1e-6)
    assert _no_worse(7e-15, 4e-15)
    assert not _no_worse(2e-13, 4e-15)


@pytest.mark.slow
def test_criterion_7b_ordering(report):
    cfg = RunConfig(kind="low-rank", dims=(200, 200), rank=20,
                    algos=("IBPG-A", "APGC", "IBP"), seeds=tuple(range(10)),
                    time_budget=20.0, e_min="zero")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ParameterWarning)
        res = run_benchmark(cfg)
    finals = {}
    for _, algo, tr in res.runs:
        finals.setdefault(algo, []).append(tr.final.relerror)
    med = {a: float(np.median(v)) for a, v in finals.items()}
    ok = all(_no_worse(med["IBPG-A"], med[a]) for a in ("APGC", "IBP"))
    report("7b", ok, "median final E at 20 s, 200x200 r=20, 10 seeds: "
                     + ", ".join(f"{a} {m:.3e}" for a, m in med.items())
                     + f"; first-place counts {({a: c[0] for a, c in res.ranking.counts.items()})}")


@pytest.mark.slow
def test_criterion_7c_ncpd(report):
    rels = []
    for seed in range(20):
        T = gen_synthetic_ncpd(20, 20, 20, 5, seed).T
        _, tr = run_ncpd(T, "IBPG-A", r=5, seed=10_000 + seed,
                         budget=Budget(time_limit=10.0, tol=1e-6))
        assert tr.records[0].relerror > 1e-2
        rels.append(tr.final.relerror)
    hits = sum(e <= 1e-3 for e in rels)
    report("7c", hits >= 16, f"IBPG-A NCPD 20x20x20 r=5, 10 s: {hits}/20 seeds reach "
                             f"relerror <= 1e-3 (need 16), worst {max(rels):.2e}")


# 8 -------------------------------------------------------------------------

def test_criterion_8_tau_sequence(report):
    getcontext().prec = 40
    exact = [Decimal(1)]
    for _ in range(100):
        t = exact[-1]
        exact.append((1 + (1 + 4 * t * t).sqrt()) / 2)
    taus = [1.0]
    for _ in range(100):
        taus.append(nesterov_tau_step(taus[-1]))
    gap = max(abs(Decimal(repr(a)) - b) for a, b in zip(taus[1:3], exact[1:3]))
    ratios = [(t - 1) / t for t in taus[1:]]
    increasing = all(b > a for a, b in zip(ratios, ratios[1:]))
    golden = abs(taus[1] - (1 + math.sqrt(5)) / 2) <= 1e-9
    ok = gap <= Decimal("1e-9") and increasing and ratios[-1] < 1 and golden \
        and abs(taus[2] - 2.1935) < 1e-4
    report(8, ok, f"tau_1={taus[1]:.12f}, tau_2={taus[2]:.12f}, oracle gap {float(gap):.1e}; "
                  f"(tau-1)/tau increasing over 100 terms to {ratios[-1]:.6f}")


# 9 -------------------------------------------------------------------------

def test_criterion_9_determinism(report, tmp_path):
    same = []
    for name, cfg in (
            ("nmf", dict(kind="low-rank", dims=(30, 25), rank=4,
                         algos=("IBP", "IBPG", "IBPG-A", "APGC", "A-HALS", "E-A-HALS"))),
            ("ncpd", dict(kind="ncpd", dims=(8, 7, 6), rank=3,
                          algos=("IBPG-A", "IBPG", "APGC", "A-HALS")))):
        blobs = []
        for rep in range(2):
            out = tmp_path / f"{name}{rep}.csv"
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ParameterWarning)
                res = run_benchmark(RunConfig(seeds=(0, 1, 2), max_iter=40, out=str(out),
                                              order="random", **cfg))
            blobs.append(b"".join(open(p, "rb").read() for p in res.paths.values()))
        same.append(blobs[0] == blobs[1])
    report(9, all(same), f"deterministic NMF and NCPD benches (3 seeds, 40 iterations, "
                         f"random order): byte-identical CSVs {same}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", *sys.argv[1:]]))
