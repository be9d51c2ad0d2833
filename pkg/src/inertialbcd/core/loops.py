"""Generic inertial block proximal (IBP) and proximal gradient (IBPG) loops.

Blocks are indexed from 0.  A run alternates outer loops ``k = 1, 2, ...``;
each outer loop performs ``T_k`` single-block updates chosen by
:func:`select_blocks`, which guarantees every block is touched at least once
per outer loop.
"""
import math
import warnings
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from ..errors import DimensionError, DivergenceError, ParameterWarning, UnsupportedError
from ..trace import Trace
from .bregman import EUCLIDEAN, NonnegIndicator, Zero, bregman_gprox, extrapolate
from .conditions import (UpdateParams, check_ibp_condition, check_ibpg_condition,
                         ibp_theta, ibpg_lambda)

DIVERGENCE_FACTOR = 1e12


class BlockProblem(ABC):
    """Composite objective ``f(x_0, ..., x_{s-1}) + sum_i r_i(x_i)``.

    Subclasses set ``n_blocks`` and implement ``eval_f``.  IBP needs
    ``block_prox``; IBPG needs ``partial_grad`` and ``lipschitz_est``.
    ``r_terms`` lists one :class:`~inertialbcd.core.bregman.Proximable` per
    block (default: all zero).
    """

    n_blocks: int = 1

    @abstractmethod
    def eval_f(self, x):
        ...

    def r_term(self, i):
        terms = getattr(self, "r_terms", None)
        return terms[i] if terms is not None else Zero()

    def eval_r(self, i, xi):
        return self.r_term(i).value(xi)

    def objective(self, x):
        return self.eval_f(x) + sum(self.eval_r(i, xi) for i, xi in enumerate(x))

    def prox_r(self, i, v, beta):
        return self.r_term(i).prox(v, beta)

    def partial_grad(self, i, x):
        raise UnsupportedError(f"{type(self).__name__} has no block gradients")

    def lipschitz_est(self, i, x):
        raise UnsupportedError(f"{type(self).__name__} has no Lipschitz estimates")

    def block_prox(self, i, x, v, beta):
        """Minimizer over block ``i`` of ``F_i(u) + ||u - v||^2 / (2 beta)``."""
        raise UnsupportedError(f"{type(self).__name__} has no exact block prox")

    def relerror(self, x):
        return math.nan


class BlockParams(NamedTuple):
    alpha: float
    beta: float
    gamma: float = 0.0


def constant_schedule(alpha, beta=None, gamma=None):
    """Parameter callback with fixed ``alpha`` and ``gamma``.

    With ``beta=None`` the stepsize is ``1 / L`` (IBPG only).
    ``gamma`` defaults to ``alpha``.
    """
    g = alpha if gamma is None else gamma

    def params(k, i, m, L):
        b = beta if beta is not None else 1.0 / L
        return BlockParams(alpha, b, g)

    return params


@dataclass
class SolverSchedule:
    """Per-update parameters and loop structure.

    ``params(k, i, m, L)`` returns :class:`BlockParams` for the ``m``-th
    update of block ``i`` in outer loop ``k``; ``L`` is the block Lipschitz
    estimate for IBPG and ``None`` for IBP.  ``inner_length`` is ``T_k``,
    an int or a callable of ``k``; ``None`` means ``T_k = s``.
    ``nu``, ``delta``, ``kappa`` and ``variant`` are used only by the
    parameter checks and diagnostics.
    """

    params: Callable
    nu: float = 0.5
    delta: float = 1.01
    kappa: float = 2.0
    inner_length: int | Callable | None = None
    order_policy: str = "cyclic"
    seed: int | None = 0
    variant: str = "base"
    check_params: bool = True

    def __post_init__(self):
        if not 0 < self.nu < 1:
            raise ValueError("nu must lie in (0, 1)")
        if not self.delta > 1:
            raise ValueError("delta must exceed 1")
        if not self.kappa > 1:
            raise ValueError("kappa must exceed 1")
        if self.order_policy not in ("cyclic", "random"):
            raise ValueError(f"unknown order policy {self.order_policy!r}")

    def T(self, k, s):
        if self.inner_length is None:
            return s
        if callable(self.inner_length):
            return int(self.inner_length(k))
        return int(self.inner_length)


@dataclass
class ExtrapState:
    """Current blocks ``x`` and each block's value before its last update ``y``."""

    x: list
    y: list = field(default=None)

    def __post_init__(self):
        self.x = [np.array(b, dtype=np.float64, copy=True) for b in self.x]
        if not self.x:
            raise DimensionError("need at least one block")
        if self.y is None:
            self.y = [b.copy() for b in self.x]
        else:
            self.y = [np.array(b, dtype=np.float64, copy=True) for b in self.y]
            for a, b in zip(self.x, self.y):
                if a.shape != b.shape:
                    raise DimensionError("x and y block shapes differ")


def select_blocks(policy, s, T_k, rng=None):
    """Block indices for one outer loop.

    ``cyclic`` repeats ``0, ..., s-1`` and needs ``T_k`` to be a multiple of
    ``s``; ``random`` concatenates independent uniform permutations of
    ``range(s)`` (the last one truncated), so every block appears at least
    once whenever ``T_k >= s``.
    """
    if T_k < s:
        raise ValueError(f"T_k={T_k} < s={s}: not every block would be updated")
    if policy == "cyclic":
        if T_k % s:
            raise ValueError(f"cyclic order needs T_k multiple of s, got {T_k}, {s}")
        return list(range(s)) * (T_k // s)
    if policy == "random":
        if rng is None:
            raise ValueError("random order needs an rng")
        out = []
        while len(out) < T_k:
            out.extend(int(i) for i in rng.permutation(s))
        return out[:T_k]
    raise ValueError(f"unknown order policy {policy!r}")


def _copy_blocks(x):
    return [b.copy() for b in x]


def _run(problem, schedule, state, budget, method, H, keep_history):
    if not isinstance(state, ExtrapState):
        state = ExtrapState(list(state))
    s = problem.n_blocks
    if len(state.x) != s:
        raise DimensionError(f"problem has {s} blocks, state has {len(state.x)}")
    x, y = state.x, state.y
    rng = np.random.default_rng(schedule.seed)
    clock = budget.clock()
    trace = Trace(algo=method)

    def evaluate():
        clock.pause()
        F = float(problem.objective(x))
        rel = float(problem.relerror(x))
        clock.resume()
        return F, rel

    F0, rel = evaluate()
    if not math.isfinite(F0):
        raise DivergenceError("initial objective is not finite", _copy_blocks(x), trace)
    trace.append(0, clock.elapsed(0), F0, rel)
    if keep_history:
        trace.history.append({"k": 0, "x": _copy_blocks(x), "x_prev": _copy_blocks(y),
                              "first_params": {}, "method": method})
    all_params = []
    last_good = _copy_blocks(x)
    k = 0
    while not budget.exhausted(k, clock, rel):
        k += 1
        counts = [0] * s
        first = {}
        for i in select_blocks(schedule.order_policy, s, schedule.T(k, s), rng):
            counts[i] += 1
            m = counts[i]
            if method == "ibp":
                p = BlockParams(*schedule.params(k, i, m, None))
                x_hat = extrapolate(x[i], y[i], p.alpha)
                new = problem.block_prox(i, x, x_hat, p.beta)
                L = 0.0
            else:
                L = float(problem.lipschitz_est(i, x))
                p = BlockParams(*schedule.params(k, i, m, L))
                x_hat = extrapolate(x[i], y[i], p.alpha)
                x_grave = extrapolate(x[i], y[i], p.gamma)
                x_eval = list(x)
                x_eval[i] = x_grave
                g = problem.partial_grad(i, x_eval)
                new = bregman_gprox(g, x_hat, p.beta, problem.r_term(i), H)
            new = np.asarray(new, dtype=np.float64)
            if new.shape != x[i].shape:
                raise DimensionError(f"block {i} changed shape")
            y[i] = x[i]
            x[i] = new
            up = UpdateParams(i, k, m, p.alpha, p.beta, p.gamma, L)
            all_params.append(up)
            first.setdefault(i, up)
        F, rel = evaluate()
        if not math.isfinite(F) or (F0 > 0 and F > DIVERGENCE_FACTOR * F0):
            raise DivergenceError(f"objective diverged at outer iteration {k}",
                                  last_good, trace)
        last_good = _copy_blocks(x)
        trace.append(k, clock.elapsed(k), F, rel)
        if keep_history:
            trace.history.append({"k": k, "x": _copy_blocks(x), "x_prev": _copy_blocks(y),
                                  "first_params": first, "method": method})
    if schedule.check_params and all_params:
        _warn_if_infeasible(method, all_params, schedule, H)
    return x, trace


def _warn_if_infeasible(method, params, schedule, H):
    if method == "ibp":
        rep = check_ibp_condition(params, schedule.nu, schedule.delta, H.sigma, H.l_h,
                                  schedule.variant)
    else:
        rep = check_ibpg_condition(params, schedule.nu, schedule.delta, schedule.kappa,
                                   H.sigma, H.l_h, schedule.variant, H.is_euclidean)
    if not rep.feasible:
        warnings.warn(f"{method} parameters violate the {rep.variant} decrease "
                      f"condition (min margin {rep.min_margin:.3g})",
                      ParameterWarning, stacklevel=3)


def ibp_outer_loop(problem, schedule, state, budget, H=EUCLIDEAN, keep_history=False):
    """Inertial block proximal method with one extrapolation point.

    Each update computes ``x_hat = x_i + alpha (x_i - y_i)`` and replaces
    block ``i`` by the exact minimizer of ``F_i(u) + ||u - x_hat||^2 / (2 beta)``
    supplied by ``problem.block_prox``.

    Returns
    -------
    x : list of ndarray
    trace : Trace
    """
    if not H.is_euclidean:
        raise UnsupportedError("block_prox subproblems are Euclidean")
    return _run(problem, schedule, state, budget, "ibp", H, keep_history)


def ibpg_outer_loop(problem, schedule, state, budget, H=EUCLIDEAN, keep_history=False):
    """Inertial block proximal gradient method with two extrapolation points.

    The block gradient is taken at ``x_i + gamma (x_i - y_i)`` while the
    proximal distance is anchored at ``x_i + alpha (x_i - y_i)``.
    """
    return _run(problem, schedule, state, budget, "ibpg", H, keep_history)


class LyapunovRecord(NamedTuple):
    k: int
    f_value: float
    theta_term: float
    total: float


def lyapunov_trace(problem, history, schedule, variant=None, sigma=1.0, l_h=1.0):
    """Sufficient-decrease quantity along a run with retained history.

    Record ``k`` is ``F(x^k) + sum_i delta * w_i * ||x^k_i - x_prev^k_i||^2``
    with ``w_i`` the inertia penalty of block ``i``'s first update in loop
    ``k + 1`` (``theta`` for IBP, ``lambda`` for IBPG).  The last retained
    iterate has no successor loop and gets no record.  For IBP and the
    ``block-convex`` variant the penalty is halved, matching the sharper
    decrease of strongly convex block subproblems.
    """
    if not history:
        return []
    for h in history:
        if "x_prev" not in h or h["x_prev"] is None:
            raise ValueError("history entries need x_prev")
    variant = variant or schedule.variant
    nu, delta = schedule.nu, schedule.delta
    out = []
    for cur, nxt in zip(history, history[1:]):
        term = 0.0
        for i, (a, b) in enumerate(zip(cur["x"], cur["x_prev"])):
            p = nxt["first_params"].get(i)
            if p is None:
                continue
            if nxt.get("method", "ibp") == "ibp":
                w = ibp_theta(p.alpha, p.beta, sigma, l_h, nu)
                if variant == "block-convex":
                    w *= 0.5
            else:
                w = ibpg_lambda(p.alpha, p.gamma, p.L, sigma, l_h, nu,
                                schedule.kappa, variant)
            d = a - b
            term += delta * w * float(np.sum(d * d))
        F = float(problem.objective(cur["x"]))
        out.append(LyapunovRecord(cur["k"], F, term, F + term))
    return out


def lyapunov_violations(records, rtol=1e-10):
    """Indices ``k`` where the record increased beyond ``rtol`` relative slack."""
    bad = []
    for a, b in zip(records, records[1:]):
        if b.total > a.total + rtol * max(abs(a.total), 1e-300):
            bad.append(b.k)
    return bad


class SeparableQuadratic(BlockProblem):
    """``f(x) = sum_i ||x_i - a_i||^2 / 2`` with optional nonnegativity.

    Small reference problem for tests and examples.
    """

    def __init__(self, targets, nonneg=False):
        self.a = [np.asarray(t, dtype=np.float64) for t in targets]
        self.n_blocks = len(self.a)
        self.r_terms = [NonnegIndicator() if nonneg else Zero() for _ in self.a]

    def eval_f(self, x):
        return 0.5 * sum(float(np.sum((xi - ai) ** 2)) for xi, ai in zip(x, self.a))

    def relerror(self, x):
        """``||x - a|| / ||a||``."""
        na = math.sqrt(sum(float(np.sum(ai * ai)) for ai in self.a))
        return math.sqrt(2.0 * self.eval_f(x)) / na if na > 0 else math.nan

    def partial_grad(self, i, x):
        return x[i] - self.a[i]

    def lipschitz_est(self, i, x):
        return 1.0

    def block_prox(self, i, x, v, beta):
        u = (v + beta * self.a[i]) / (1.0 + beta)
        return self.r_terms[i].prox(u, beta)
