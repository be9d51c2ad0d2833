"""Inertial block proximal methods for non-convex composite problems.

Instantiated for non-negative matrix factorization (:mod:`.nmf`) and
three-way non-negative CP decomposition (:mod:`.ncpd`), with a benchmark
harness (:mod:`.bench`) and command line entry point (:mod:`.cli`).
"""
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
