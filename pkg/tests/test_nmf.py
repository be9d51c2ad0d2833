import math
import warnings

import numpy as np
import pytest

from inertialbcd.core import (ExtrapState, SolverSchedule, ibpg_outer_loop)
from inertialbcd.core.loops import BlockParams
from inertialbcd.errors import DimensionError, ParameterWarning
from inertialbcd.nmf import (ALGORITHMS, NmfColumnProblem, NmfFactorProblem, NmfInstance,
                             NmfOptions, hals_column_update, ibp_column_update,
                             ibp_row_update, ibpg_nmf_schedule, nesterov_tau_step,
                             nmf_gradients, nmf_objective, nmf_objective_from_grams,
                             random_init, repeat_limit, run_nmf)
from inertialbcd.trace import Budget


def central_diff(f, A, h=1e-6):
    G = np.zeros_like(A)
    for idx in np.ndindex(A.shape):
        Ap, Am = A.copy(), A.copy()
        Ap[idx] += h
        Am[idx] -= h
        G[idx] = (f(Ap) - f(Am)) / (2 * h)
    return G


def low_rank(seed, m=12, n=10, r=3):
    g = np.random.default_rng(seed)
    return g.random((m, r)) @ g.random((r, n))


def test_gradients_match_finite_differences(rng):
    X, U, V = rng.random((4, 5)), rng.random((4, 2)), rng.random((2, 5))
    gU = central_diff(lambda A: nmf_objective(X, A, V), U)
    gV = central_diff(lambda B: nmf_objective(X, U, B), V)
    np.testing.assert_allclose(nmf_gradients(X, U, V, "U"), gU, rtol=1e-6)
    np.testing.assert_allclose(nmf_gradients(X, U, V, "V"), gV, rtol=1e-6)
    grams = (V @ V.T, X @ V.T)
    np.testing.assert_array_equal(nmf_gradients(X, U, V, "U", grams), nmf_gradients(X, U, V, "U"))
    with pytest.raises(ValueError):
        nmf_gradients(X, U, V, "W")


def test_objective_from_grams(rng):
    X, U, V = rng.random((6, 5)), rng.random((6, 2)), rng.random((2, 5))
    val = nmf_objective_from_grams(float(np.sum(X * X)), U, X @ V.T, V @ V.T)
    assert val == pytest.approx(nmf_objective(X, U, V), rel=1e-12)
    with pytest.raises(DimensionError):
        nmf_objective(X, U, V.T)


def _entry_oracle(X, U, V, i, beta, u_hat):
    """Minimize each entry's 1-D objective from three evaluations, then clamp at 0."""
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


def test_ibp_column_update_matches_entry_oracle():
    g = np.random.default_rng(7)
    for _ in range(100):
        m, n, r = g.integers(2, 7), g.integers(2, 7), g.integers(1, 4)
        X, U, V = g.random((m, n)), g.random((m, r)), g.random((r, n))
        i = int(g.integers(r))
        beta = float(10 ** g.uniform(-2, 2))
        u_hat = g.random(m) * 2 - 0.5
        got = ibp_column_update(X, U, V, i, beta, u_hat)
        np.testing.assert_allclose(got, _entry_oracle(X, U, V, i, beta, u_hat),
                                   rtol=0, atol=1e-10)


def test_ibp_row_update_by_symmetry(rng):
    X, U, V = rng.random((5, 4)), rng.random((5, 2)), rng.random((2, 4))
    v_hat = rng.random(4)
    got = ibp_row_update(X, U, V, 1, 0.5, v_hat)
    np.testing.assert_allclose(got, _entry_oracle(X.T, V.T, U.T, 1, 0.5, v_hat), atol=1e-10)


def test_ibp_update_tends_to_hals(rng):
    for _ in range(20):
        X, U, V = rng.random((6, 5)), rng.random((6, 3)), rng.random((3, 5))
        got = ibp_column_update(X, U, V, 2, 1e12, rng.random(6))
        np.testing.assert_allclose(got, hals_column_update(X, U, V, 2), rtol=0, atol=1e-8)


def test_hals_zero_row_returns_none(rng):
    X, U, V = rng.random((3, 3)), rng.random((3, 2)), rng.random((2, 3))
    V[0] = 0.0
    assert hals_column_update(X, U, V, 0) is None


def test_tau_sequence():
    t1 = nesterov_tau_step(1.0)
    t2 = nesterov_tau_step(t1)
    assert t1 == pytest.approx(1.6180339887498948, abs=1e-12)
    assert t2 == pytest.approx(2.1935270853310539, abs=1e-12)
    with pytest.raises(ValueError):
        nesterov_tau_step(0.5)


def test_ibpg_schedule():
    a, b, g = ibpg_nmf_schedule(1, 2.0, 2.0, 1.6180339887498948)
    assert g == pytest.approx(0.6180339887498948 / 1.6180339887498948)
    assert a == pytest.approx(1.01 * g) and b == 0.5
    # the Lipschitz ratio caps the inertia
    a, b, g = ibpg_nmf_schedule(50, 100.0, 1.0, 40.0)
    assert g == pytest.approx(0.099)
    with pytest.raises(ValueError):
        ibpg_nmf_schedule(1, 0.0, 1.0, 2.0)


def test_repeat_limit():
    o = NmfOptions()
    assert repeat_limit(200, 20, o) == 6
    assert repeat_limit(10, 5, o) == 2
    assert repeat_limit(1000, 5, o) == 10
    assert repeat_limit(1000, 5, NmfOptions(max_repeats=1)) == 1


@pytest.mark.parametrize("factors,expected", [
    # fit W^2/2: a scale s lowers it by 1 - s^2 relative
    ([0.5] * 10, 6),           # 75% each time, runs to the limit
    ([0.999] * 10, 1),         # 0.2% after the first update, stop
    ([0.5, 0.9, 0.996], 3),    # 75%, 19%, then 0.8% < 1%
    ([0.5, 1.2], 2),           # second update increases the fit
])
def test_repeat_stops_on_relative_fit_decrease(factors, expected):
    from inertialbcd.nmf import _repeat
    W = np.array([[2.0]])
    it = iter(factors)

    def step():
        W[...] *= next(it, 1.0)

    n = _repeat(step, lambda: W, 6, 1e-2, np.eye(1), np.zeros((1, 1)), 0.0)
    assert n == expected


def test_random_init_is_deterministic():
    a = random_init(4, 3, 2, 9)
    b = random_init(4, 3, 2, 9)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)
    assert a[0].shape == (4, 2) and a[1].shape == (2, 3)


@pytest.mark.parametrize("algo", ALGORITHMS)
@pytest.mark.parametrize("order", ["cyclic", "random"])
def test_every_algorithm_reduces_error(algo, order):
    X = low_rank(0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ParameterWarning)
        state, tr = run_nmf(X, algo, r=3, seed=1, order=order,
                            budget=Budget(max_iter=200, deterministic=True))
    rel = tr.relerrors
    assert len(tr) == 201
    assert rel[-1] < 1e-2 * rel[0]
    assert np.all(state.U >= 0) and np.all(state.V >= 0)
    assert nmf_objective(X, state.U, state.V) == pytest.approx(tr.final.objective, rel=1e-9)
    assert [r.elapsed_s for r in tr.records] == [float(k) for k in range(201)]


@pytest.mark.parametrize("algo", ALGORITHMS)
def test_runs_are_deterministic(algo):
    X = low_rank(2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ParameterWarning)
        _, a = run_nmf(X, algo, r=3, seed=4, budget=Budget(max_iter=30, deterministic=True))
        _, b = run_nmf(X, algo, r=3, seed=4, budget=Budget(max_iter=30, deterministic=True))
    assert a.records == b.records


def test_apgc_is_ibpg_with_matched_constants():
    X = low_rank(5)
    opts = NmfOptions(gamma_tilde=0.9999, alpha_breve=0.9999)
    budget = Budget(max_iter=60, deterministic=True)
    with pytest.warns(ParameterWarning):
        _, a = run_nmf(X, "IBPG", r=3, seed=3, budget=budget, options=opts)
    _, b = run_nmf(X, "APGC", r=3, seed=3, budget=budget)
    assert a.records == b.records


def test_tol_stops_early():
    X = low_rank(6)
    _, tr = run_nmf(X, "IBPG-A", r=3, budget=Budget(max_iter=5000, tol=1e-4, deterministic=True))
    assert tr.final.relerror <= 1e-4 and len(tr) < 5001


def test_parameter_warnings():
    X = low_rank(1)
    with pytest.warns(ParameterWarning):
        run_nmf(X, "IBP", r=3, budget=Budget(max_iter=1, deterministic=True))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        run_nmf(X, "IBPG-A", r=3, budget=Budget(max_iter=1, deterministic=True))
        run_nmf(X, "IBP", r=3, budget=Budget(max_iter=1, deterministic=True),
                options=NmfOptions(check_params=False))


def test_wall_clock_budget_and_init():
    X = low_rank(3)
    U0, V0 = random_init(12, 10, 3, 0)
    _, tr = run_nmf(NmfInstance(X, 3), "A-HALS", init=(U0, V0), time_budget=0.05)
    assert tr.records[-1].elapsed_s >= 0.05
    el = [r.elapsed_s for r in tr.records]
    assert el == sorted(el)
    assert tr.records[0].objective == pytest.approx(nmf_objective(X, U0, V0))


def test_run_argument_errors():
    X = low_rank(0)
    b = Budget(max_iter=1, deterministic=True)
    with pytest.raises(ValueError):
        run_nmf(X, "ALS", r=3, budget=b)
    with pytest.raises(ValueError):
        run_nmf(X, "IBPG", budget=b)
    with pytest.raises(ValueError):
        run_nmf(X, "IBPG", r=3)
    with pytest.raises(DimensionError):
        run_nmf(X, "IBPG", r=3, budget=b, init=(np.ones((3, 3)), np.ones((3, 10))))
    with pytest.raises(ValueError):
        run_nmf(X, "IBPG", r=3, budget=b, init=(-np.ones((12, 3)), np.ones((3, 10))))
    with pytest.raises(ValueError):
        run_nmf(X, "IBPG", r=3, budget=b, order="zigzag")
    with pytest.raises(ValueError):
        NmfInstance(-X, 3)
    with pytest.raises(DimensionError):
        NmfInstance(np.ones(3), 1)


def test_column_problem_prox_matches_closed_form(rng):
    X, U, V = rng.random((5, 4)), rng.random((5, 2)), rng.random((2, 4))
    prob = NmfColumnProblem(X, 2)
    x = prob.split(U, V)
    U2, V2 = prob.join(x)
    np.testing.assert_array_equal(U2, U)
    np.testing.assert_array_equal(V2, V)
    v = rng.random(5)
    np.testing.assert_array_equal(prob.block_prox(1, x, v, 0.3),
                                  ibp_column_update(X, U, V, 1, 0.3, v))
    w = rng.random(4)
    np.testing.assert_array_equal(prob.block_prox(3, x, w, 0.3),
                                  ibp_row_update(X, U, V, 1, 0.3, w))
    assert prob.relerror(x) == pytest.approx(
        math.sqrt(2 * nmf_objective(X, U, V)) / np.linalg.norm(X))


def test_fast_ibpg_matches_generic_loop():
    X = low_rank(8)
    U0, V0 = random_init(12, 10, 3, 2)
    n_loops = 15
    _, fast = run_nmf(X, "IBPG", r=3, init=(U0, V0),
                      budget=Budget(max_iter=n_loops, deterministic=True))
    tau = {0: 1.0}
    L_prev = {}

    def params(k, i, m, L):
        if k not in tau:
            tau[k] = nesterov_tau_step(tau[k - 1])
        a, b, g = ibpg_nmf_schedule(k, L, L_prev.get(i, L), tau[k])
        L_prev[i] = L
        return BlockParams(a, b, g)

    sched = SolverSchedule(params, nu=0.0099, delta=1.0001, variant="block-convex")
    _, slow = ibpg_outer_loop(NmfFactorProblem(X, 3), sched, ExtrapState([U0, V0]),
                              Budget(max_iter=n_loops, deterministic=True))
    np.testing.assert_allclose(fast.objectives, slow.objectives, rtol=1e-9)
