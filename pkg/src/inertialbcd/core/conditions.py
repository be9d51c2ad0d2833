"""Sufficient-decrease conditions on the inertial parameters.

Each checker takes the realized per-update parameters of a run (or a
synthetic sequence) and compares, for every block ``i`` and every update
``m`` of that block, a decrease quantity at update ``m`` against ``delta``
times an inertia penalty at the block's next update.  The penalty is
``theta`` for IBP and ``lambda`` for IBPG.  The last update of each block
has no successor and is compared against itself, which is exact for
parameters that are constant from then on.
"""
import csv
import io
import math
from dataclasses import dataclass, field
from typing import NamedTuple

from ..errors import UnsupportedError

REPORT_COLUMNS = ("variant", "i", "k", "m", "lhs", "rhs", "margin", "feasible")

IBP_VARIANTS = ("base", "block-convex")
IBPG_VARIANTS = ("base", "convex-r", "block-convex")


class UpdateParams(NamedTuple):
    """Parameters used for the ``m``-th update of block ``i`` in loop ``k``."""

    i: int
    k: int
    m: int
    alpha: float
    beta: float
    gamma: float = 0.0
    L: float = 0.0


class MarginRow(NamedTuple):
    variant: str
    i: int
    k: int
    m: int
    lhs: float
    rhs: float
    margin: float
    feasible: bool


@dataclass
class ConditionReport:
    variant: str
    rows: list = field(default_factory=list)

    @property
    def feasible(self):
        return all(r.feasible for r in self.rows)

    @property
    def margins(self):
        return [r.margin for r in self.rows]

    @property
    def min_margin(self):
        return min(self.margins) if self.rows else math.inf

    def to_csv(self, header=True):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(REPORT_COLUMNS)
        for r in self.rows:
            w.writerow((r.variant, r.i, r.k, r.m, "%.17g" % r.lhs,
                        "%.17g" % r.rhs, "%.17g" % r.margin,
                        "true" if r.feasible else "false"))
        return buf.getvalue()


def _check_nu_delta(nu, delta):
    if not 0 < nu < 1:
        raise ValueError(f"nu must lie in (0, 1), got {nu}")
    if not delta > 1:
        raise ValueError(f"delta must exceed 1, got {delta}")


def _successor_pairs(params):
    """Yield ``(current, next)`` updates of the same block, in update order."""
    by_block = {}
    for p in params:
        by_block.setdefault(p.i, []).append(p)
    for i in sorted(by_block):
        seq = by_block[i]
        for a, b in zip(seq, seq[1:] + seq[-1:]):
            yield a, b


def ibp_theta(alpha, beta, sigma=1.0, l_h=1.0, nu=0.5):
    return (l_h * alpha) ** 2 / (2.0 * nu * sigma * beta)


def check_ibp_condition(params, nu, delta, sigma=1.0, l_h=1.0, variant="base"):
    """Margins of the IBP parameter condition.

    ``base``: ``(1 - nu) sigma / (2 beta_m) >= delta theta_{m+1}``.
    ``block-convex``: ``2 (1 - nu) sigma / beta_m >= delta theta_{m+1}``.
    """
    _check_nu_delta(nu, delta)
    if variant not in IBP_VARIANTS:
        raise ValueError(f"unknown IBP variant {variant!r}")
    report = ConditionReport(variant)
    for cur, nxt in _successor_pairs(params):
        if not cur.beta > 0:
            raise ValueError("beta must be positive")
        if variant == "base":
            lhs = (1.0 - nu) * sigma / (2.0 * cur.beta)
        else:
            lhs = 2.0 * (1.0 - nu) * sigma / cur.beta
        rhs = delta * ibp_theta(nxt.alpha, nxt.beta, sigma, l_h, nu)
        report.rows.append(MarginRow(variant, cur.i, cur.k, cur.m, lhs, rhs,
                                     lhs - rhs, lhs >= rhs))
    return report


def ibpg_lambda(alpha, gamma, L, sigma=1.0, l_h=1.0, nu=0.5, kappa=2.0,
                variant="base"):
    if variant == "base":
        return 0.5 * (gamma + kappa * l_h * alpha / sigma) ** 2 * L / (nu * (kappa - 1.0))
    if variant == "convex-r":
        return 0.5 * (gamma + l_h * alpha / sigma) ** 2 * L / nu
    if variant == "block-convex":
        return (gamma ** 2 + (gamma - alpha) ** 2 / nu) * L / 2.0
    raise ValueError(f"unknown IBPG variant {variant!r}")


def check_ibpg_condition(params, nu, delta, kappa=2.0, sigma=1.0, l_h=1.0,
                         variant="base", euclidean=True):
    """Margins of the IBPG parameter condition.

    ``params`` entries carry the Lipschitz constant ``L`` of each update.

    ``base``: ``(1 - nu)(kappa - 1) L_m / 2 >= delta lambda_{m+1}``.
    ``convex-r`` and ``block-convex``: ``(1 - nu) L_m / 2 >= delta lambda_{m+1}``
    with their own ``lambda``; ``block-convex`` needs the Euclidean generator.
    """
    _check_nu_delta(nu, delta)
    if variant not in IBPG_VARIANTS:
        raise ValueError(f"unknown IBPG variant {variant!r}")
    if variant == "base" and not kappa > 1:
        raise ValueError("kappa must exceed 1")
    if variant == "block-convex" and not (euclidean and sigma == 1.0 and l_h == 1.0):
        raise UnsupportedError("block-convex IBPG condition needs the Euclidean generator")
    report = ConditionReport(variant)
    for cur, nxt in _successor_pairs(params):
        if not cur.L > 0:
            raise ValueError("Lipschitz constants must be positive")
        if variant == "base":
            lhs = (1.0 - nu) * (kappa - 1.0) * cur.L / 2.0
        else:
            lhs = (1.0 - nu) * cur.L / 2.0
        rhs = delta * ibpg_lambda(nxt.alpha, nxt.gamma, nxt.L, sigma, l_h, nu,
                                  kappa, variant)
        report.rows.append(MarginRow(variant, cur.i, cur.k, cur.m, lhs, rhs,
                                     lhs - rhs, lhs >= rhs))
    return report


def max_feasible_ibp_alpha(nu, delta, sigma=1.0, l_h=1.0, variant="base"):
    """Largest constant extrapolation coefficient passing the IBP condition.

    With constant ``beta`` the condition reduces to
    ``alpha^2 <= c nu (1 - nu) sigma^2 / (delta l_h^2)`` where ``c`` is 1
    (base) or 4 (block-convex); ``beta`` cancels.
    """
    _check_nu_delta(nu, delta)
    c = {"base": 1.0, "block-convex": 4.0}.get(variant)
    if c is None:
        raise ValueError(f"unknown IBP variant {variant!r}")
    return math.sqrt(c * nu * (1.0 - nu) * sigma ** 2 / (delta * l_h ** 2))


def constant_params(s, n_loops, alpha, beta, gamma=0.0, L=1.0, updates_per_loop=1):
    """Parameter records for ``s`` blocks with constant values."""
    return [UpdateParams(i, k, m, alpha, beta, gamma, L)
            for k in range(1, n_loops + 1)
            for i in range(s)
            for m in range(1, updates_per_loop + 1)]
