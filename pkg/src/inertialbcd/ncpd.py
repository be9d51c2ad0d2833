"""Three-way non-negative CP decomposition.

``min 1/2 ||T - [[X1, X2, X3]]||_F^2`` over nonnegative factors ``Xi``
(``I_i x r``).  Factors are passed as a list of three arrays and modes are
numbered 1, 2, 3 as in :mod:`inertialbcd.matops`.
"""
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .errors import DimensionError, DivergenceError
from .matops import cp_reconstruct, khatri_rao, mode_unfold, operator_norm_psd
from .nmf import _repeat, _resolve_budget, nesterov_tau_step
from .trace import Trace

ALGORITHMS = ("IBPG-A", "IBPG", "APGC", "A-HALS")
TRACE_PREFIX = "ncpd:"

__all__ = [
    "ALGORITHMS", "TRACE_PREFIX", "NcpdInstance", "NcpdOptions", "NcpdState",
    "build_khatri_chain", "gram_hadamard", "ncpd_objective", "ncpd_gradient",
    "ncpd_lipschitz", "w_coefficient", "random_factors", "run_ncpd",
]


@dataclass
class NcpdInstance:
    T: np.ndarray
    r: int

    def __post_init__(self):
        self.T = np.asarray(self.T, dtype=np.float64)
        if self.T.ndim != 3:
            raise DimensionError("T must be a 3-way tensor")
        if np.any(self.T < 0) or not np.all(np.isfinite(self.T)):
            raise ValueError("T must be finite and nonnegative")
        if self.r < 1:
            raise ValueError("rank must be >= 1")


@dataclass
class NcpdOptions:
    """Constants of the NCPD runners.

    ``delta_w`` bounds the inertia by the Lipschitz ratio and
    ``anchor_factor`` scales the anchor point's coefficient relative to the
    gradient point's.  ``t_per_factor`` advances the Nesterov sequence
    before every factor instead of once per sweep.  The repeat rule matches
    :class:`inertialbcd.nmf.NmfOptions`.
    """

    delta_w: float = 0.99
    anchor_factor: float = 1.01
    t_per_factor: bool = False
    repeat_rho: float = 0.5
    repeat_cap: int = 10
    repeat_tol: float = 1e-2
    max_repeats: int | None = None


APGC_CONSTANT = 0.9999


@dataclass
class NcpdState:
    factors: list
    prev_factors: list
    L: list = field(default_factory=lambda: [math.nan] * 3)
    L_prev: list = field(default_factory=lambda: [math.nan] * 3)
    t: float = 1.0


def _check_skip(skip):
    if skip not in (1, 2, 3):
        raise DimensionError(f"mode must be 1, 2 or 3, got {skip!r}")


def _factors(factors):
    fs = [np.asarray(f, dtype=np.float64) for f in factors]
    if len(fs) != 3 or any(f.ndim != 2 for f in fs):
        raise DimensionError("need three factor matrices")
    if len({f.shape[1] for f in fs}) != 1:
        raise DimensionError("factor column counts differ")
    return fs


def _kept(fs, skip):
    """The two factors other than ``skip`` in Khatri-Rao order (later first)."""
    return [fs[q] for q in (2, 1, 0) if q != skip - 1]


def build_khatri_chain(factors, skip):
    """Khatri-Rao product of the factors other than ``skip``, last mode first."""
    _check_skip(skip)
    a, b = _kept(_factors(factors), skip)
    return khatri_rao(a, b)


def gram_hadamard(factors, skip):
    """``B^T B`` for the chain omitting ``skip``: entrywise product of Grams."""
    _check_skip(skip)
    a, b = _kept(_factors(factors), skip)
    return (a.T @ a) * (b.T @ b)


def ncpd_objective(T, factors):
    T = np.asarray(T, dtype=np.float64)
    R = T - cp_reconstruct(factors)
    return 0.5 * float(np.sum(R * R))


def ncpd_gradient(T, factors, i):
    """Gradient with respect to factor ``i``: ``(X_i B^T - T_[i]) B``."""
    fs = _factors(factors)
    _check_skip(i)
    T = np.asarray(T, dtype=np.float64)
    if T.shape != tuple(f.shape[0] for f in fs):
        raise DimensionError(f"tensor shape {T.shape} does not match factors")
    B = build_khatri_chain(fs, i)
    return (fs[i - 1] @ B.T - mode_unfold(T, i)) @ B


def ncpd_lipschitz(factors, i, explicit=False):
    """Lipschitz constant ``||B^T B||`` of the factor-``i`` gradient.

    The Gram is formed as a Hadamard product of the kept factors' Grams;
    ``explicit=True`` forms ``B`` instead (reference path).
    """
    if explicit:
        B = build_khatri_chain(factors, i)
        return operator_norm_psd(B.T @ B)
    return operator_norm_psd(gram_hadamard(factors, i))


def w_coefficient(t_prev, t_cur, L_older, L_old, delta_w=0.99):
    """Inertia ``min((t_prev - 1) / t_cur, delta_w * sqrt(L_older / L_old))``."""
    w_hat = (t_prev - 1.0) / t_cur
    return min(w_hat, delta_w * math.sqrt(L_older / L_old))


def random_factors(dims, r, seed):
    """Uniform(0, 1) factors for ``dims`` from one seeded stream."""
    rng = np.random.default_rng(seed)
    return [rng.random((d, r)) for d in dims]


def _repeat_limit(n_other, r, opts):
    if opts.max_repeats is not None:
        return max(1, int(opts.max_repeats))
    return max(1, min(opts.repeat_cap, 1 + int(math.floor(opts.repeat_rho * n_other / r))))


class _Run:
    def __init__(self, T, budget, algo):
        self.T1 = mode_unfold(T, 1)
        self.normT = float(np.linalg.norm(T))
        self.c = 0.5 * self.normT ** 2
        self.clock = budget.clock()
        self.budget = budget
        self.trace = Trace(algo=TRACE_PREFIX + algo)
        self.f0 = None
        self.rel = None
        self.k = 0
        self.last_good = None

    def record(self, fs):
        R = (self.T1 - fs[0] @ khatri_rao(fs[2], fs[1]).T).ravel()
        f = 0.5 * float(R @ R)
        rel = math.sqrt(2.0 * f) / self.normT if self.normT > 0 else (0.0 if f == 0 else math.inf)
        if self.f0 is None:
            self.f0 = f
        elif not math.isfinite(f) or (self.f0 > 0 and f > 1e12 * self.f0):
            raise DivergenceError(f"objective diverged at outer iteration {self.k}",
                                  self.last_good, self.trace)
        self.last_good = [x.copy() for x in fs]
        self.rel = rel
        self.trace.append(self.k, self.clock.elapsed(self.k), f, rel)

    def more(self):
        if self.budget.exhausted(self.k, self.clock, self.rel):
            return False
        self.k += 1
        return True


def run_ncpd(instance, algo, init=None, budget=None, seed=0, options=None,
             time_budget=None, r=None, order="cyclic"):
    """Run one NCPD algorithm; returns ``(NcpdState, Trace)``.

    Trace ``algo`` labels carry the ``"ncpd:"`` prefix.  ``order`` is
    ``"cyclic"`` (modes 1, 2, 3) or ``"random"`` (a fresh permutation of the
    modes each sweep, drawn from ``seed``).
    """
    if not isinstance(instance, NcpdInstance):
        if r is None:
            raise ValueError("rank r required when passing a raw tensor")
        instance = NcpdInstance(instance, r)
    T, r = instance.T, instance.r
    if algo not in ALGORITHMS:
        raise ValueError(f"unknown NCPD algorithm {algo!r}; choose from {ALGORITHMS}")
    opts = options or NcpdOptions()
    budget = _resolve_budget(budget, time_budget)
    fs = random_factors(T.shape, r, seed) if init is None else init
    fs = [np.array(f, dtype=np.float64, copy=True) for f in fs]
    if [f.shape for f in fs] != [(d, r) for d in T.shape]:
        raise DimensionError("initial factor shapes do not match the tensor and rank")
    if any(np.any(f < 0) for f in fs):
        raise ValueError("initial factors must be nonnegative")
    if order not in ("cyclic", "random"):
        raise ValueError(f"unknown order policy {order!r}")
    rng = np.random.default_rng([seed, 2])
    sweep = (lambda: [int(q) for q in rng.permutation(3)]) if order == "random" \
        else (lambda: [0, 1, 2])
    unfolded = [mode_unfold(T, i) for i in (1, 2, 3)]
    run = _Run(T, budget, algo)
    if algo == "A-HALS":
        state = _run_hals(run, unfolded, fs, opts, sweep)
    else:
        if algo == "APGC":
            opts = replace(opts, delta_w=APGC_CONSTANT, anchor_factor=APGC_CONSTANT,
                           max_repeats=1)
        elif algo == "IBPG":
            opts = replace(opts, max_repeats=1)
        state = _run_ibpg(run, unfolded, fs, opts, sweep)
    return state, run.trace


def _limits(shape, r, opts):
    total = shape[0] * shape[1] * shape[2]
    return [_repeat_limit(total // d, r, opts) for d in shape]


def _run_ibpg(run, unfolded, fs, opts, sweep):
    shape = tuple(f.shape[0] for f in fs)
    r = fs[0].shape[1]
    limits = _limits(shape, r, opts)
    prev = [f.copy() for f in fs]
    L_last = [None, None, None]
    L_cur = [math.nan] * 3
    t = 1.0
    run.record(fs)
    while run.more():
        if not opts.t_per_factor:
            t_new = nesterov_tau_step(t)
            w_hat = (t - 1.0) / t_new
            t = t_new
        for q in sweep():
            if opts.t_per_factor:
                t_new = nesterov_tau_step(t)
                w_hat = (t - 1.0) / t_new
                t = t_new
            mode = q + 1
            G = gram_hadamard(fs, mode)
            L = operator_norm_psd(G)
            L_cur[q] = L
            if not L > 0:
                continue
            L_old = L_last[q] if L_last[q] is not None else L
            w = min(w_hat, opts.delta_w * math.sqrt(L_old / L))
            a = opts.anchor_factor * w
            P = unfolded[q] @ build_khatri_chain(fs, mode)
            box = [fs[q], prev[q]]

            def step(box=box, G=G, P=P, w=w, a=a, L=L):
                X, Xp = box
                D = X - Xp
                X_grad = X + w * D
                X_anchor = X + a * D
                box[1] = X
                box[0] = np.maximum(X_anchor - (X_grad @ G - P) / L, 0.0)

            _repeat(step, lambda box=box: box[0], limits[q], opts.repeat_tol, G, P, run.c)
            fs[q], prev[q] = box
            L_last[q] = L
        run.record(fs)
    return NcpdState(fs, prev, list(L_cur), [x if x is not None else math.nan for x in L_last], t)


def _run_hals(run, unfolded, fs, opts, sweep):
    shape = tuple(f.shape[0] for f in fs)
    r = fs[0].shape[1]
    limits = _limits(shape, r, opts)
    fs = [np.ascontiguousarray(f) for f in fs]
    prev = [f.copy() for f in fs]
    run.record(fs)
    while run.more():
        prev = [f.copy() for f in fs]
        for q in sweep():
            mode = q + 1
            G = gram_hadamard(fs, mode)
            P = unfolded[q] @ build_khatri_chain(fs, mode)
            W = fs[q]

            def step(W=W, G=G, P=P):
                kernels.column_sweep(W, G, P)

            _repeat(step, lambda W=W: W, limits[q], opts.repeat_tol, G, P, run.c)
        run.record(fs)
    return NcpdState(fs, prev)
