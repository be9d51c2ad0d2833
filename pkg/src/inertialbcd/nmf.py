"""Non-negative matrix factorization ``min 1/2 ||X - UV||_F^2, U, V >= 0``.

Algorithms available through :func:`run_nmf`:

``IBPG``
    Inertial block proximal gradient on the two blocks ``U`` and ``V``,
    one update per block per outer loop.
``IBPG-A``
    Same, repeating each block update while it keeps paying off.
``APGC``
    Accelerated proximal gradient coordinate descent, i.e. ``IBPG`` with
    both inertia constants set to 0.9999.
``IBP``
    Inertial block proximal method over the ``2r`` blocks formed by the
    columns of ``U`` and the rows of ``V``, using the closed-form update.
``A-HALS``
    Accelerated HALS: repeated exact column/row sweeps.
``E-A-HALS``
    A-HALS with extrapolation between outer iterations and restarts.
"""
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .core.bregman import NonnegIndicator
from .core.conditions import check_ibp_condition, check_ibpg_condition, constant_params
from .core.loops import BlockProblem
from .errors import DimensionError, DivergenceError, ParameterWarning
from .matops import operator_norm_psd
from .trace import Budget, Trace

ALGORITHMS = ("IBP", "IBPG", "IBPG-A", "APGC", "A-HALS", "E-A-HALS")

__all__ = [
    "ALGORITHMS", "NmfInstance", "NmfOptions", "NmfState",
    "nmf_objective", "nmf_objective_from_grams", "nmf_gradients",
    "nesterov_tau_step", "ibpg_nmf_schedule", "ibp_column_update",
    "ibp_row_update", "hals_column_update", "repeat_limit",
    "NmfColumnProblem", "NmfFactorProblem", "random_init", "run_nmf",
]


@dataclass
class NmfInstance:
    X: np.ndarray
    r: int

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        if self.X.ndim != 2:
            raise DimensionError("X must be a matrix")
        if np.any(self.X < 0) or not np.all(np.isfinite(self.X)):
            raise ValueError("X must be finite and nonnegative")
        if not 1 <= self.r:
            raise ValueError("rank must be >= 1")


@dataclass
class NmfOptions:
    """Tunable constants; defaults reproduce the reference parameter choices.

    The repeat rule (IBPG-A, IBP, A-HALS, E-A-HALS) allows at most
    ``min(repeat_cap, 1 + floor(repeat_rho * n_other / r))`` updates of a
    block per outer loop and stops early once an update decreases the
    objective by less than ``repeat_tol`` relative to its value before that
    update.  ``max_repeats`` overrides the limit.
    """

    gamma_tilde: float = 0.99
    alpha_breve: float = 1.01
    nu: float = 0.0099
    delta: float = 1.0001
    repeat_rho: float = 0.5
    repeat_cap: int = 10
    repeat_tol: float = 1e-2
    max_repeats: int | None = None
    ibp_inv_beta: float = 0.001
    ibp_alpha0: float = 0.6
    ibp_alpha_growth: float = 1.01
    ibp_alpha_cap: float = 1.0
    ibp_nu: float = 0.5
    ibp_delta: float = 1.01
    eahals_beta0: float = 0.5
    eahals_growth: float = 1.05
    eahals_growth_cap: float = 1.01
    eahals_decay: float = 1.5
    check_params: bool = True


APGC_CONSTANT = 0.9999


@dataclass
class NmfState:
    U: np.ndarray
    V: np.ndarray
    U_prev: np.ndarray
    V_prev: np.ndarray
    L: tuple = (math.nan, math.nan)
    tau: float = 1.0


def _check_shapes(X, U, V):
    if U.ndim != 2 or V.ndim != 2 or U.shape[1] != V.shape[0] or \
            (U.shape[0], V.shape[1]) != X.shape:
        raise DimensionError(f"incompatible shapes X{X.shape}, U{U.shape}, V{V.shape}")


def nmf_objective(X, U, V):
    """``1/2 ||X - U V||_F^2``."""
    X, U, V = (np.asarray(a, dtype=np.float64) for a in (X, U, V))
    _check_shapes(X, U, V)
    R = X - U @ V
    return 0.5 * float(np.sum(R * R))


def nmf_objective_from_grams(normX2, U, XVt, VVt):
    """Objective from cached products: ``||X||^2/2 - <U, XV^T> + <U^T U, VV^T>/2``."""
    return 0.5 * normX2 - float(np.sum(U * XVt)) + 0.5 * float(np.sum((U.T @ U) * VVt))


def nmf_gradients(X, U, V, block, grams=None):
    """Gradient of the objective with respect to ``U`` or ``V``.

    ``grams`` may hold the products the gradient reuses: ``(VV^T, XV^T)`` for
    ``block="U"`` or ``(U^T U, U^T X)`` for ``block="V"``.
    """
    X, U, V = (np.asarray(a, dtype=np.float64) for a in (X, U, V))
    _check_shapes(X, U, V)
    if block == "U":
        VVt, XVt = grams if grams is not None else (V @ V.T, X @ V.T)
        return U @ VVt - XVt
    if block == "V":
        UtU, UtX = grams if grams is not None else (U.T @ U, U.T @ X)
        return UtU @ V - UtX
    raise ValueError(f"block must be 'U' or 'V', got {block!r}")


def nesterov_tau_step(tau_prev):
    """``(1 + sqrt(1 + 4 tau_prev^2)) / 2``."""
    if tau_prev < 1:
        raise ValueError("tau must be >= 1")
    return 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * tau_prev * tau_prev))


def ibpg_nmf_schedule(k, L_cur, L_prev, tau, gamma_tilde=0.99, alpha_breve=1.01):
    """Inertia and stepsize for an IBPG block update in outer loop ``k``.

    ``tau`` is the Nesterov sequence value of loop ``k``.  Returns
    ``(alpha, beta, gamma)`` with ``beta = 1 / L_cur``,
    ``gamma = min((tau - 1) / tau, gamma_tilde * sqrt(L_prev / L_cur))`` and
    ``alpha = alpha_breve * gamma``.
    """
    if not (L_cur > 0 and L_prev > 0):
        raise ValueError("Lipschitz constants must be positive")
    gamma = min((tau - 1.0) / tau, gamma_tilde * math.sqrt(L_prev / L_cur))
    return alpha_breve * gamma, 1.0 / L_cur, gamma


def ibp_column_update(X, U, V, i, beta, U_hat_col):
    """Closed-form inertial proximal update of column ``i`` of ``U``.

    Exact minimizer over ``u >= 0`` of
    ``1/2 ||X - sum_{q != i} U_q V_q - u V_i||^2 + ||u - U_hat_col||^2 / (2 beta)``.
    """
    X, U, V = (np.asarray(a, dtype=np.float64) for a in (X, U, V))
    _check_shapes(X, U, V)
    v = V[i]
    inv_beta = 1.0 / beta
    vv = float(v @ v)
    num = X @ v - U @ (V @ v) + U[:, i] * vv + inv_beta * np.asarray(U_hat_col, dtype=np.float64)
    return np.maximum(num / (vv + inv_beta), 0.0)


def ibp_row_update(X, U, V, i, beta, V_hat_row):
    """Row ``i`` of ``V`` by symmetry, ``||X - UV|| = ||X^T - V^T U^T||``."""
    X, U, V = (np.asarray(a, dtype=np.float64) for a in (X, U, V))
    return ibp_column_update(X.T, V.T, U.T, i, beta, V_hat_row)


def hals_column_update(X, U, V, i):
    """HALS update of column ``i`` of ``U``; ``None`` when ``V[i]`` is zero."""
    X, U, V = (np.asarray(a, dtype=np.float64) for a in (X, U, V))
    _check_shapes(X, U, V)
    v = V[i]
    vv = float(v @ v)
    if vv <= 0.0:
        return None
    num = X @ v - U @ (V @ v) + U[:, i] * vv
    return np.maximum(num / vv, 0.0)


def repeat_limit(n_other, r, opts):
    if opts.max_repeats is not None:
        return max(1, int(opts.max_repeats))
    return max(1, min(opts.repeat_cap, 1 + int(math.floor(opts.repeat_rho * n_other / r))))


def random_init(m, n, r, seed):
    """Uniform(0, 1) factors ``U (m x r)`` and ``V (r x n)`` from one seeded stream."""
    rng = np.random.default_rng(seed)
    U = rng.random((m, r))
    V = rng.random((r, n))
    return U, V


# ---------------------------------------------------------------------------
# Adapters for the generic block loops (reference implementations)


class NmfColumnProblem(BlockProblem):
    """NMF over ``2r`` blocks: ``U[:, 0..r-1]`` then ``V[0..r-1, :]``."""

    def __init__(self, X, r):
        self.X = np.asarray(X, dtype=np.float64)
        self.r = r
        self.n_blocks = 2 * r
        self.r_terms = [NonnegIndicator()] * self.n_blocks
        self._normX = float(np.linalg.norm(self.X))

    def split(self, U, V):
        return [U[:, i].copy() for i in range(self.r)] + [V[i].copy() for i in range(self.r)]

    def join(self, x):
        U = np.column_stack(x[:self.r])
        V = np.vstack(x[self.r:])
        return U, V

    def eval_f(self, x):
        U, V = self.join(x)
        return nmf_objective(self.X, U, V)

    def relerror(self, x):
        return math.sqrt(2.0 * self.eval_f(x)) / self._normX

    def block_prox(self, i, x, v, beta):
        U, V = self.join(x)
        if i < self.r:
            return ibp_column_update(self.X, U, V, i, beta, v)
        return ibp_row_update(self.X, U, V, i - self.r, beta, v)


class NmfFactorProblem(BlockProblem):
    """NMF over the two blocks ``U`` and ``V``."""

    n_blocks = 2

    def __init__(self, X, r):
        self.X = np.asarray(X, dtype=np.float64)
        self.r = r
        self.r_terms = [NonnegIndicator(), NonnegIndicator()]
        self._normX = float(np.linalg.norm(self.X))

    def eval_f(self, x):
        return nmf_objective(self.X, x[0], x[1])

    def relerror(self, x):
        return math.sqrt(2.0 * self.eval_f(x)) / self._normX

    def partial_grad(self, i, x):
        return nmf_gradients(self.X, x[0], x[1], "UV"[i])

    def lipschitz_est(self, i, x):
        U, V = x
        return operator_norm_psd(V @ V.T if i == 0 else U.T @ U)


# ---------------------------------------------------------------------------
# Fast runners


class _Run:
    """Trace bookkeeping shared by the runners.

    The exact residual is evaluated every outer iteration and its cost is
    billed to the run's clock.
    """

    def __init__(self, X, budget, algo):
        self.X = X
        self.normX = float(np.linalg.norm(X))
        self.normX2 = self.normX ** 2
        self.budget = budget
        self.clock = budget.clock()
        self.trace = Trace(algo=algo)
        self.f0 = None
        self.rel = None
        self.k = 0
        self.last_good = None

    def record(self, U, V):
        R = (self.X - U @ V).ravel()
        f = 0.5 * float(R @ R)
        if self.normX > 0:
            rel = math.sqrt(2.0 * f) / self.normX
        else:
            rel = 0.0 if f == 0 else math.inf
        if self.f0 is None:
            self.f0 = f
        elif not math.isfinite(f) or (self.f0 > 0 and f > 1e12 * self.f0):
            raise DivergenceError(f"objective diverged at outer iteration {self.k}",
                                  self.last_good, self.trace)
        self.last_good = (U.copy(), V.copy())
        self.rel = rel
        self.trace.append(self.k, self.clock.elapsed(self.k), f, rel)

    def more(self):
        if self.budget.exhausted(self.k, self.clock, self.rel):
            return False
        self.k += 1
        return True


def _block_fit(W, G, P, c):
    """``c + <W^T W, G>/2 - <W, P>``: the fit as a function of one block."""
    return c + 0.5 * float(np.sum((W.T @ W) * G)) - float(np.sum(W * P))


def _repeat(step, W_view, limit, tol, G, P, c):
    """Call ``step()`` up to ``limit`` times.

    Repeats continue while the last update decreased the block fit
    ``c + <W^T W, G>/2 - <W, P>`` by at least ``tol`` relative to its value
    before that update.
    """
    if limit == 1:
        step()
        return 1
    f = _block_fit(W_view(), G, P, c)
    for rep in range(1, limit + 1):
        step()
        if rep == limit:
            break
        f_new = _block_fit(W_view(), G, P, c)
        if not (f > 0.0 and f - f_new >= tol * f):
            return rep
        f = f_new
    return limit


def _resolve_budget(budget, time_budget):
    if budget is None:
        if time_budget is None:
            raise ValueError("need a budget or time_budget")
        return Budget(time_limit=float(time_budget))
    if isinstance(budget, (int, float)):
        return Budget(time_limit=float(budget))
    return budget


def _warn_params(algo, opts):
    if not opts.check_params:
        return
    if algo in ("IBPG", "IBPG-A"):
        g = opts.gamma_tilde
        rep = check_ibpg_condition(constant_params(2, 2, opts.alpha_breve * g, 1.0, g, 1.0),
                                   opts.nu, opts.delta, variant="block-convex")
    elif algo == "IBP":
        rep = check_ibp_condition(constant_params(2, 2, opts.ibp_alpha_cap, 1.0 / opts.ibp_inv_beta),
                                  opts.ibp_nu, opts.ibp_delta, variant="block-convex")
    else:
        return
    if not rep.feasible:
        warnings.warn(f"{algo} parameters violate the {rep.variant} decrease condition "
                      f"(min margin {rep.min_margin:.3g}); running anyway",
                      ParameterWarning, stacklevel=3)


def run_nmf(instance, algo, init=None, budget=None, seed=0, options=None,
            time_budget=None, r=None, order="cyclic"):
    """Run one NMF algorithm.

    Parameters
    ----------
    instance : NmfInstance or array_like
        Data matrix (then ``r`` is required) or an instance.
    algo : str
        One of :data:`ALGORITHMS`.
    init : tuple of ndarray, optional
        ``(U0, V0)``; drawn by :func:`random_init` from ``seed`` if omitted.
    budget : Budget or float, optional
        Stopping rule; a float is a wall-clock limit in seconds.
    seed : int
    options : NmfOptions, optional
    time_budget : float, optional
        Alternative to ``budget``.
    order : {"cyclic", "random"}
        Order of the two factor updates within each outer loop.  ``random``
        draws a fresh permutation per loop from ``seed``.  E-A-HALS always
        updates ``U`` first.

    Returns
    -------
    state : NmfState
    trace : Trace
    """
    if not isinstance(instance, NmfInstance):
        if r is None:
            raise ValueError("rank r required when passing a raw matrix")
        instance = NmfInstance(instance, r)
    X, r = instance.X, instance.r
    m, n = X.shape
    if algo not in ALGORITHMS:
        raise ValueError(f"unknown NMF algorithm {algo!r}; choose from {ALGORITHMS}")
    opts = options or NmfOptions()
    budget = _resolve_budget(budget, time_budget)
    if init is None:
        U0, V0 = random_init(m, n, r, seed)
    else:
        U0, V0 = init
    U = np.array(U0, dtype=np.float64, copy=True)
    V = np.array(V0, dtype=np.float64, copy=True)
    _check_shapes(X, U, V)
    if np.any(U < 0) or np.any(V < 0):
        raise ValueError("initial factors must be nonnegative")
    if order not in ("cyclic", "random"):
        raise ValueError(f"unknown order policy {order!r}")
    rng = np.random.default_rng([seed, 2])
    _warn_params(algo, opts)
    run = _Run(X, budget, algo)
    if algo in ("IBPG", "IBPG-A", "APGC"):
        if algo == "APGC":
            opts = replace(opts, gamma_tilde=APGC_CONSTANT, alpha_breve=APGC_CONSTANT,
                           max_repeats=1)
        elif algo == "IBPG":
            opts = replace(opts, max_repeats=1)
        state = _run_ibpg(run, U, V, opts, order, rng)
    elif algo == "IBP":
        state = _run_ibp(run, U, V, opts, order, rng)
    elif algo == "A-HALS":
        state = _run_ahals(run, U, V, opts, order, rng)
    else:
        state = _run_eahals(run, U, V, opts)
    return state, run.trace


def _ibpg_block(W, W_prev, G, P, alpha, beta, gamma, limit, tol, c):
    """Projected inertial gradient updates of ``W`` (rows index the free dim).

    Works on ``W`` (``p x r``) with ``grad = W G - P``.  Returns new
    ``(W, W_prev)``.
    """
    box = [W, W_prev]

    def step():
        W, Wp = box
        D = W - Wp
        W_hat = W + alpha * D
        W_grave = W + gamma * D
        box[1] = W
        box[0] = np.maximum(W_hat - beta * (W_grave @ G - P), 0.0)

    _repeat(step, lambda: box[0], limit, tol, G, P, c)
    return box[0], box[1]


def _phase_order(order, rng):
    """Block order for one outer loop: ``[0, 1]`` or a random permutation."""
    if order == "random":
        return [int(q) for q in rng.permutation(2)]
    return [0, 1]


def _run_ibpg(run, U, V, opts, order="cyclic", rng=None):
    X = run.X
    m, n = X.shape
    r = U.shape[1]
    # V is updated through V^T: grad V^T = V^T (U^T U) - X^T U
    W = [U, V.T.copy()]
    W_prev = [U.copy(), W[1].copy()]
    lims = (repeat_limit(n, r, opts), repeat_limit(m, r, opts))
    tau = 1.0
    L_prev = [None, None]
    L = [math.nan, math.nan]
    run.record(U, V)
    while run.more():
        k = run.k
        tau = nesterov_tau_step(tau)
        for q in _phase_order(order, rng):
            other = W[1 - q]
            G = other.T @ other
            P = X @ other if q == 0 else X.T @ other
            L[q] = operator_norm_psd(G)
            if not L[q] > 0:
                continue
            a, b, g = ibpg_nmf_schedule(k, L[q], L_prev[q] or L[q], tau,
                                        opts.gamma_tilde, opts.alpha_breve)
            W[q], W_prev[q] = _ibpg_block(W[q], W_prev[q], G, P, a, b, g,
                                          lims[q], opts.repeat_tol, 0.5 * run.normX2)
            L_prev[q] = L[q]
        run.record(W[0], W[1].T)
    return NmfState(np.ascontiguousarray(W[0]), np.ascontiguousarray(W[1].T),
                    np.ascontiguousarray(W_prev[0]), np.ascontiguousarray(W_prev[1].T),
                    tuple(L), tau)


def _hals_block(W, G, P, limit, tol, c, W_prev=None, alpha=0.0, inv_beta=0.0):
    """Column sweeps on ``W`` in place; inertial proximal when ``inv_beta > 0``."""

    def step():
        if inv_beta > 0.0:
            W_hat = W + alpha * (W - W_prev) if alpha != 0.0 else W.copy()
            W_prev[...] = W
            kernels.column_sweep(W, G, P, W_hat, inv_beta)
        else:
            kernels.column_sweep(W, G, P)

    return _repeat(step, lambda: W, limit, tol, G, P, c)


def _run_ibp(run, U, V, opts, order="cyclic", rng=None):
    X = run.X
    m, n = X.shape
    r = U.shape[1]
    W = [U, np.ascontiguousarray(V.T)]
    W_prev = [U.copy(), W[1].copy()]
    lims = (repeat_limit(n, r, opts), repeat_limit(m, r, opts))
    alpha = opts.ibp_alpha0
    run.record(U, V)
    while run.more():
        if run.k > 1:
            alpha = min(opts.ibp_alpha_cap, opts.ibp_alpha_growth * alpha)
        for q in _phase_order(order, rng):
            other = W[1 - q]
            P = X @ other if q == 0 else X.T @ other
            _hals_block(W[q], other.T @ other, P, lims[q], opts.repeat_tol,
                        0.5 * run.normX2, W_prev[q], alpha, opts.ibp_inv_beta)
        run.record(W[0], W[1].T)
    return NmfState(W[0], np.ascontiguousarray(W[1].T), W_prev[0],
                    np.ascontiguousarray(W_prev[1].T))


def _run_ahals(run, U, V, opts, order="cyclic", rng=None):
    X = run.X
    m, n = X.shape
    r = U.shape[1]
    W = [U, np.ascontiguousarray(V.T)]
    W_prev = [U.copy(), W[1].copy()]
    lims = (repeat_limit(n, r, opts), repeat_limit(m, r, opts))
    run.record(U, V)
    while run.more():
        W_prev = [W[0].copy(), W[1].copy()]
        for q in _phase_order(order, rng):
            other = W[1 - q]
            P = X @ other if q == 0 else X.T @ other
            _hals_block(W[q], other.T @ other, P, lims[q], opts.repeat_tol,
                        0.5 * run.normX2)
        run.record(W[0], W[1].T)
    return NmfState(W[0], np.ascontiguousarray(W[1].T), W_prev[0],
                    np.ascontiguousarray(W_prev[1].T))


def _run_eahals(run, U, V, opts):
    """A-HALS with extrapolated restarts.

    Each outer loop updates ``U`` from the extrapolated pair, extrapolates
    it, updates ``V`` against the extrapolated ``U`` and extrapolates ``V``.
    The pair ``(U_hat, V)`` is accepted when its error does not exceed the
    last accepted error; the coefficient then grows (bounded by a slowly
    growing ceiling).  Otherwise the extrapolated sequences restart from the
    plain iterates and the coefficient shrinks.
    """
    X = run.X
    m, n = X.shape
    r = U.shape[1]
    lim_U, lim_V = repeat_limit(n, r, opts), repeat_limit(m, r, opts)
    Vt = V.T.copy()
    U_hat, Vt_hat = U.copy(), Vt.copy()
    beta = opts.eahals_beta0
    beta_bar = 1.0
    e_prev = math.inf
    run.record(U, V)
    rep_U, rep_Vt = U, Vt
    while run.more():
        U_old, Vt_old = U, Vt
        U = U_hat.copy()
        _hals_block(U, Vt_hat.T @ Vt_hat, X @ Vt_hat, lim_U, opts.repeat_tol,
                    0.5 * run.normX2)
        U_hat = np.maximum(U + beta * (U - U_old), 0.0)
        G = U_hat.T @ U_hat
        P = X.T @ U_hat
        Vt = Vt_hat.copy()
        _hals_block(Vt, G, P, lim_V, opts.repeat_tol, 0.5 * run.normX2)
        Vt_hat = np.maximum(Vt + beta * (Vt - Vt_old), 0.0)
        e = run.normX2 - 2.0 * float(np.sum(P * Vt)) + float(np.sum(G * (Vt.T @ Vt)))
        if e <= e_prev:
            rep_U, rep_Vt = U_hat, Vt
            e_prev = e
            beta = min(beta_bar, opts.eahals_growth * beta)
            beta_bar = min(1.0, opts.eahals_growth_cap * beta_bar)
        else:
            rep_U, rep_Vt = U, Vt
            U_hat, Vt_hat = U.copy(), Vt.copy()
            beta_bar = beta
            beta = beta / opts.eahals_decay
        run.record(rep_U, rep_Vt.T)
    return NmfState(rep_U.copy(), np.ascontiguousarray(rep_Vt.T), U.copy(),
                    np.ascontiguousarray(Vt.T))
