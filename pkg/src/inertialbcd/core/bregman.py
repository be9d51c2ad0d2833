"""Bregman generators and (Bregman) proximal maps."""
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import DimensionError, UnsupportedError


def _identity(u):
    return u


@dataclass(frozen=True)
class BregmanGenerator:
    """Strongly convex kernel ``H`` of a Bregman distance.

    ``sigma`` is the strong-convexity modulus, ``l_h`` the Lipschitz constant
    of ``grad_h`` and ``grad_h_conjugate`` the inverse map ``grad H*``.
    """

    sigma: float
    l_h: float
    grad_h: Callable
    grad_h_conjugate: Callable
    name: str = "custom"

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.l_h < self.sigma:
            raise ValueError("l_h must be >= sigma")

    @property
    def is_euclidean(self):
        return self.name == "euclidean"


EUCLIDEAN = BregmanGenerator(1.0, 1.0, _identity, _identity, name="euclidean")


class Proximable:
    """A function with a computable (Euclidean) proximal map.

    Subclasses implement ``value`` and ``prox(v, beta)``, the minimizer of
    ``phi(u) + ||u - v||^2 / (2 beta)``.  Override ``bregman_prox`` to
    support non-Euclidean generators.
    """

    smooth = False

    def value(self, u):
        raise NotImplementedError

    def prox(self, v, beta):
        raise NotImplementedError

    def grad(self, u):
        raise UnsupportedError(f"{type(self).__name__} is not differentiable")

    def bregman_prox(self, v, beta, H):
        if H.is_euclidean:
            return self.prox(v, beta)
        raise UnsupportedError(
            f"no Bregman prox of {type(self).__name__} for generator {H.name!r}")


class Zero(Proximable):
    smooth = True

    def value(self, u):
        return 0.0

    def prox(self, v, beta):
        return np.array(v, dtype=np.float64, copy=True)

    def grad(self, u):
        return np.zeros_like(np.asarray(u, dtype=np.float64))

    def bregman_prox(self, v, beta, H):
        return self.prox(v, beta)


class NonnegIndicator(Proximable):
    """Indicator of the nonnegative orthant."""

    def value(self, u):
        return 0.0 if np.all(np.asarray(u) >= 0) else np.inf

    def prox(self, v, beta):
        return np.maximum(np.asarray(v, dtype=np.float64), 0.0)


class SquaredDistance(Proximable):
    """``weight/2 * ||u - a||^2``."""

    smooth = True

    def __init__(self, a, weight=1.0):
        self.a = np.asarray(a, dtype=np.float64)
        self.weight = float(weight)

    def value(self, u):
        d = np.asarray(u, dtype=np.float64) - self.a
        return 0.5 * self.weight * float(np.sum(d * d))

    def grad(self, u):
        return self.weight * (np.asarray(u, dtype=np.float64) - self.a)

    def prox(self, v, beta):
        v = np.asarray(v, dtype=np.float64)
        return (v + beta * self.weight * self.a) / (1.0 + beta * self.weight)


def extrapolate(x_cur, y_prev, coeff):
    """Inertial point ``x_cur + coeff * (x_cur - y_prev)``."""
    x_cur = np.asarray(x_cur, dtype=np.float64)
    y_prev = np.asarray(y_prev, dtype=np.float64)
    if x_cur.shape != y_prev.shape:
        raise DimensionError(f"shapes differ: {x_cur.shape} vs {y_prev.shape}")
    if coeff < 0:
        raise ValueError("extrapolation coefficient must be >= 0")
    if coeff == 0:
        return x_cur.copy()
    return x_cur + coeff * (x_cur - y_prev)


def bregman_prox(phi, v, beta, H=EUCLIDEAN):
    """Minimizer of ``phi(u) + D_H(u, v) / beta``."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    if isinstance(phi, Proximable):
        return phi.bregman_prox(v, beta, H)
    if callable(phi):
        if not H.is_euclidean:
            raise UnsupportedError("plain prox callables only support the Euclidean generator")
        return phi(v, beta)
    raise UnsupportedError(f"cannot evaluate a proximal map of {phi!r}")


def bregman_gprox(grad_at, v, beta, prox_r, H=EUCLIDEAN):
    """Bregman proximal gradient map with separate gradient and anchor points.

    ``grad_at`` is the smooth part's gradient, evaluated wherever the caller
    chose; ``v`` anchors the distance.  Computed by splitting: a Bregman
    gradient step ``grad H*(grad H(v) - beta * grad_at)`` followed by the
    Bregman prox of ``prox_r``.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    grad_at = np.asarray(grad_at, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if grad_at.shape != v.shape:
        raise DimensionError(f"shapes differ: {grad_at.shape} vs {v.shape}")
    p = H.grad_h_conjugate(H.grad_h(v) - beta * grad_at)
    return bregman_prox(prox_r, p, beta, H)
