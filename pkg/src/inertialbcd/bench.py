"""Synthetic data, multi-seed benchmark runs, error curves and rankings.

A benchmark runs every requested algorithm on every seed.  For a seed, the
instance and the initial factors are generated once and shared by all
algorithms.  Traces are written as one CSV, and the final errors are
summarized in a :class:`RankingTable`.
"""
import csv
import dataclasses
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import ncpd as _ncpd
from . import nmf as _nmf
from .errors import DimensionError
from .matops import cp_reconstruct
from .textio import read_matrix, read_tensor
from .trace import Budget, fmt_num, read_trace_csv, write_trace_csv

__all__ = [
    "KINDS", "E_MIN_POLICIES", "TIE_RTOL", "GRID_POINTS", "RunConfig",
    "RankingTable", "BenchResult", "gen_synthetic_nmf", "gen_synthetic_ncpd",
    "compute_E", "rank_runs", "ranking_from_csv", "time_grid_curves",
    "run_benchmark", "parse_config_text", "read_config", "parse_seeds",
    "output_paths",
]

KINDS = ("low-rank", "full-rank", "ncpd")
E_MIN_POLICIES = ("zero", "best-observed")
TIE_RTOL = 1e-12
GRID_POINTS = 200


# ---------------------------------------------------------------------------
# Data generation


def _positive_dims(dims):
    out = []
    for d in dims:
        if isinstance(d, bool) or int(d) != d or d < 1:
            raise DimensionError(f"dimensions must be positive integers, got {dims!r}")
        out.append(int(d))
    return out


def gen_synthetic_nmf(kind, m, n, r, seed):
    """Synthetic NMF instance.

    Parameters
    ----------
    kind : {"low-rank", "full-rank"}
        ``low-rank`` builds ``X = U V`` from uniform(0, 1) factors of inner
        dimension ``r``.  ``full-rank`` draws ``X`` entrywise uniform(0, 1).
    m, n, r : int
    seed : int

    Returns
    -------
    NmfInstance
    """
    m, n, r = _positive_dims((m, n, r))
    rng = np.random.default_rng(seed)
    if kind == "low-rank":
        if r >= min(m, n):
            raise DimensionError(f"low-rank data needs r < min(m, n), got r={r}")
        U = rng.random((m, r))
        V = rng.random((r, n))
        X = U @ V
    elif kind == "full-rank":
        X = rng.random((m, n))
    else:
        raise ValueError(f"unknown NMF data kind {kind!r}")
    return _nmf.NmfInstance(X, r)


def gen_synthetic_ncpd(I, J, K, r, seed):
    """Tensor ``[[X1, X2, X3]]`` of uniform(0, 1) factors with ``r`` columns."""
    dims = _positive_dims((I, J, K))
    (r,) = _positive_dims((r,))
    rng = np.random.default_rng(seed)
    factors = [rng.random((d, r)) for d in dims]
    return _ncpd.NcpdInstance(cp_reconstruct(factors), r)


# ---------------------------------------------------------------------------
# Error curves and rankings


def compute_E(traces, e_min_policy="zero"):
    """Shift relative errors by the reference error ``e_min``.

    Parameters
    ----------
    traces : sequence of Trace
        All runs on one instance.
    e_min_policy : {"zero", "best-observed"}
        ``best-observed`` uses the smallest final relative error among
        ``traces``.

    Returns
    -------
    e_min : float
    curves : list of ndarray
        ``relerror_k - e_min`` per trace.
    """
    traces = list(traces)
    if not traces or any(len(t) == 0 for t in traces):
        raise ValueError("compute_E needs at least one non-empty trace")
    if e_min_policy == "zero":
        e_min = 0.0
    elif e_min_policy == "best-observed":
        e_min = min(t.final.relerror for t in traces)
    else:
        raise ValueError(f"unknown e_min policy {e_min_policy!r}")
    return e_min, [np.asarray(t.relerrors, dtype=np.float64) - e_min for t in traces]


@dataclass
class RankingTable:
    """Final-error summary per algorithm.

    ``counts[a][i]`` is the number of runs in which ``a`` achieved the
    ``(i + 1)``-th best final error.  ``std`` is the population standard
    deviation.
    """

    algos: list
    mean: dict
    std: dict
    counts: dict
    n_runs: int

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["algo", "n_runs", "mean_E", "std_E"]
                   + [f"rank_{i + 1}" for i in range(len(self.algos))])
        for a in self.algos:
            w.writerow([a, self.n_runs, fmt_num(self.mean[a]), fmt_num(self.std[a])]
                       + list(self.counts[a]))
        return buf.getvalue()


def _tied(a, b, scale):
    return abs(a - b) <= TIE_RTOL * scale


def rank_runs(final_E, algos, e_min=None):
    """Build a :class:`RankingTable` from final errors.

    Parameters
    ----------
    final_E : mapping
        ``run_id -> {algo: final E}``.
    algos : sequence of str
        Column order of the table.
    e_min : mapping, optional
        ``run_id -> e_min``; ties are judged relative to ``E + e_min``
        (the relative error itself).

    Notes
    -----
    An algorithm's rank in a run is one plus the number of algorithms with
    a strictly smaller final error.  Errors within ``TIE_RTOL`` relative of
    each other are equal, so tied algorithms share the better rank.
    """
    algos = list(algos)
    if not algos:
        raise ValueError("need at least one algorithm")
    e_min = e_min or {}
    counts = {a: [0] * len(algos) for a in algos}
    finals = {a: [] for a in algos}
    for run_id in final_E:
        row = final_E[run_id]
        shift = e_min.get(run_id, 0.0)
        for a in algos:
            Ea = row[a]
            finals[a].append(Ea)
            better = sum(1 for b in algos if b != a and row[b] < Ea
                         and not _tied(Ea, row[b], max(abs(Ea + shift), abs(row[b] + shift))))
            counts[a][better] += 1
    mean = {a: float(np.mean(finals[a])) if finals[a] else math.nan for a in algos}
    std = {a: float(np.std(finals[a])) if finals[a] else math.nan for a in algos}
    return RankingTable(algos, mean, std, counts, len(final_E))


def _rank_from_runs(runs, policy_for):
    """Rank ``runs`` (``(run_id, algo, trace)`` triples) by final E."""
    by_run = {}
    algos = []
    for run_id, algo, trace in runs:
        by_run.setdefault(run_id, []).append((algo, trace))
        if algo not in algos:
            algos.append(algo)
    final_E, e_mins, curves = {}, {}, {}
    for run_id, items in by_run.items():
        e_min, Es = compute_E([t for _, t in items], policy_for(run_id))
        e_mins[run_id] = e_min
        final_E[run_id] = {a: float(E[-1]) for (a, _), E in zip(items, Es)}
        for (a, t), E in zip(items, Es):
            curves[(run_id, a)] = (np.asarray([r.elapsed_s for r in t.records]), E)
    return rank_runs(final_E, algos, e_mins), curves


def ranking_from_csv(source, e_min_policy="zero"):
    """Recompute the :class:`RankingTable` from a trace CSV path or handle."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, newline="") as fh:
            traces = read_trace_csv(fh)
    else:
        traces = read_trace_csv(source)
    runs = [(run_id, algo, tr) for (run_id, algo), tr in traces.items()]
    table, _ = _rank_from_runs(runs, lambda _: e_min_policy)
    return table


def time_grid_curves(curves, n_points=GRID_POINTS):
    """Average E over runs on a shared log-spaced time grid.

    Parameters
    ----------
    curves : mapping
        ``(run_id, algo) -> (elapsed, E)`` arrays.

    Returns
    -------
    grid : ndarray
        ``n_points`` log-spaced times from the smallest positive elapsed
        time to the largest.  Empty when no record has positive time.
    mean : dict
        ``algo -> ndarray``; NaN where no run covers the grid point.
    count : dict
        ``algo -> ndarray`` of the number of runs averaged at each point.

    Notes
    -----
    Each run is interpolated linearly between its records.  Grid points
    before its first record take its initial E and points after its last
    record are left out (no extrapolation).
    """
    times = np.concatenate([np.asarray(t, dtype=np.float64) for t, _ in curves.values()]) \
        if curves else np.empty(0)
    pos = times[times > 0]
    if pos.size == 0:
        return np.empty(0), {}, {}
    lo, hi = float(pos.min()), float(times.max())
    grid = np.array([lo]) if hi <= lo else np.geomspace(lo, hi, n_points)
    sums, count = {}, {}
    for (_, algo), (t, E) in curves.items():
        t = np.asarray(t, dtype=np.float64)
        vals = np.interp(grid, t, E)
        inside = grid <= t[-1]
        s = sums.setdefault(algo, np.zeros_like(grid))
        c = count.setdefault(algo, np.zeros(grid.shape, dtype=np.int64))
        s[inside] += vals[inside]
        c[inside] += 1
    mean = {}
    for algo in sums:
        with np.errstate(invalid="ignore", divide="ignore"):
            mean[algo] = np.where(count[algo] > 0, sums[algo] / np.maximum(count[algo], 1),
                                  np.nan)
    return grid, mean, count


def curves_csv_text(grid, mean, count):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["algo", "t", "mean_E", "n_runs"])
    for algo in mean:
        for t, e, c in zip(grid, mean[algo], count[algo]):
            if c > 0:
                w.writerow([algo, fmt_num(t), fmt_num(e), int(c)])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Configuration


def parse_seeds(text):
    """Seeds from ``"N"`` (``0..N-1``), ``"a-b"`` (inclusive) or ``"a,b,c"``."""
    if isinstance(text, (list, tuple)):
        return [int(s) for s in text]
    text = str(text).strip()
    if not text:
        raise ValueError("empty seed list")
    if "," in text:
        return [int(s) for s in text.split(",") if s.strip()]
    if "-" in text[1:]:
        a, b = text.split("-", 1)
        a, b = int(a), int(b)
        if b < a:
            raise ValueError(f"empty seed range {text!r}")
        return list(range(a, b + 1))
    n = int(text)
    if n < 1:
        raise ValueError("seed count must be >= 1")
    return list(range(n))


@dataclass
class RunConfig:
    """One benchmark.

    ``kind`` selects the data: ``low-rank`` or ``full-rank`` NMF, or
    ``ncpd`` for a synthetic CP tensor.  ``data_file`` replaces the
    generator with a matrix (NMF kinds) or tensor (``ncpd``) text file.
    Unless ``data_seed`` is set, every seed draws its own instance.
    ``max_iter`` without ``time_budget`` runs in deterministic mode.
    ``overrides`` are field values for :class:`~inertialbcd.nmf.NmfOptions`
    or :class:`~inertialbcd.ncpd.NcpdOptions`.
    """

    kind: str = "low-rank"
    dims: tuple = (50, 50)
    rank: int = 5
    algos: tuple = ("IBPG-A",)
    seeds: tuple = (0,)
    time_budget: float | None = None
    max_iter: int | None = None
    tol: float | None = None
    init: str = "uniform"
    out: str | None = None
    order: str = "cyclic"
    overrides: dict = field(default_factory=dict)
    e_min: str = "auto"
    data_file: str | None = None
    data_seed: int | None = None
    workers: int = 1

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        self.algos = tuple(self.algos)
        self.seeds = tuple(int(s) for s in self.seeds)
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}; choose from {KINDS}")
        want = 3 if self.problem == "ncpd" else 2
        if self.data_file is None and len(self.dims) != want:
            raise DimensionError(f"{self.kind} data needs {want} dimensions")
        if not self.algos:
            raise ValueError("need at least one algorithm")
        known = self.algorithms
        for a in self.algos:
            if a not in known:
                raise ValueError(f"unknown {self.problem} algorithm {a!r}; choose from {known}")
        if len(set(self.algos)) != len(self.algos):
            raise ValueError("duplicate algorithm in list")
        if not self.seeds:
            raise ValueError("need at least one seed")
        if any(s < 0 for s in self.seeds) or len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct non-negative integers")
        if self.time_budget is None and self.max_iter is None:
            raise ValueError("need time_budget or max_iter")
        if self.time_budget is not None and not self.time_budget > 0:
            raise ValueError("time_budget must be positive")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        if self.init != "uniform":
            raise ValueError(f"unknown init policy {self.init!r}")
        if self.order not in ("cyclic", "random"):
            raise ValueError(f"unknown order policy {self.order!r}")
        if self.e_min not in ("auto",) + E_MIN_POLICIES:
            raise ValueError(f"unknown e_min policy {self.e_min!r}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        self.options()

    @property
    def problem(self):
        return "ncpd" if self.kind == "ncpd" else "nmf"

    @property
    def algorithms(self):
        return _ncpd.ALGORITHMS if self.problem == "ncpd" else _nmf.ALGORITHMS

    @property
    def deterministic(self):
        return self.time_budget is None

    @property
    def e_min_policy(self):
        if self.e_min != "auto":
            return self.e_min
        exact = self.data_file is None and self.kind in ("low-rank", "ncpd")
        return "zero" if exact else "best-observed"

    def budget(self):
        if self.deterministic:
            return Budget(max_iter=self.max_iter, tol=self.tol, deterministic=True)
        return Budget(max_iter=self.max_iter, time_limit=self.time_budget, tol=self.tol)

    def options(self):
        cls = _ncpd.NcpdOptions if self.problem == "ncpd" else _nmf.NmfOptions
        fields = {f.name: f for f in dataclasses.fields(cls)}
        vals = {}
        for key, value in self.overrides.items():
            if key not in fields:
                raise ValueError(f"unknown schedule override {key!r}")
            vals[key] = _coerce(value, fields[key].default)
        return cls(**vals)

    @classmethod
    def from_mapping(cls, mapping):
        """Build from flat string settings (config file keys or CLI flags)."""
        kw = {}
        overrides = {}
        dims = {}
        for key, value in mapping.items():
            key = key.replace("-", "_")
            if key in ("m", "n", "I", "J", "K"):
                dims[key] = int(value)
            elif key == "kind":
                kw["kind"] = value
            elif key in ("rank", "max_iter", "workers", "data_seed"):
                kw[key] = int(value)
            elif key in ("time_budget", "tol"):
                kw[key] = float(value)
            elif key in ("algo", "algos"):
                kw["algos"] = tuple(a.strip() for a in value.split(",") if a.strip())
            elif key == "seeds":
                kw["seeds"] = tuple(parse_seeds(value))
            elif key in ("init", "out", "order", "e_min", "data_file"):
                kw[key] = value
            elif key == "data":
                kw["data_file"] = value
            else:
                overrides[key] = value
        kind = kw.get("kind", cls.kind)
        if kind == "ncpd":
            order = ("I", "J", "K")
        else:
            order = ("m", "n")
        stray = set(dims) - set(order)
        if stray:
            raise ValueError(f"dimension flags {sorted(stray)} do not apply to {kind}")
        if dims:
            missing = [d for d in order if d not in dims]
            if missing:
                raise ValueError(f"missing dimensions {missing}")
            kw["dims"] = tuple(dims[d] for d in order)
        elif kind == "ncpd":
            kw["dims"] = (20, 20, 20)
        kw["overrides"] = overrides
        return cls(**kw)


def _coerce(value, default):
    if not isinstance(value, str):
        return value
    if isinstance(default, bool):
        low = value.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    if default is None:
        if value.strip().lower() == "none":
            return None
        return int(value)
    return value


def parse_config_text(text):
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ValueError(f"config line {lineno}: empty key")
        out[key] = value
    return out


def read_config(path):
    with open(path) as fh:
        return parse_config_text(fh.read())


# ---------------------------------------------------------------------------
# Runs


@dataclass
class BenchResult:
    """Output of :func:`run_benchmark`.

    ``runs`` holds ``(run_id, algo, trace)`` in CSV order.
    """

    runs: list
    ranking: RankingTable
    grid: np.ndarray
    curves: dict
    curve_counts: dict
    e_min: dict
    paths: dict = field(default_factory=dict)


def output_paths(out):
    """Trace, ranking and curve CSV paths for an output path ``out``."""
    root, ext = os.path.splitext(out)
    if ext.lower() != ".csv":
        root = out
    return {"traces": root + ".csv" if ext.lower() != ".csv" else out,
            "ranking": root + "_ranking.csv",
            "curves": root + "_curves.csv"}


def _run_id(seed):
    return f"seed{seed:06d}"


def _instance(config, seed):
    if config.data_file is not None:
        if config.problem == "ncpd":
            return _ncpd.NcpdInstance(read_tensor(config.data_file), config.rank)
        return _nmf.NmfInstance(read_matrix(config.data_file), config.rank)
    s = config.data_seed if config.data_seed is not None else seed
    if config.problem == "ncpd":
        return gen_synthetic_ncpd(*config.dims, config.rank, s)
    return gen_synthetic_nmf(config.kind, *config.dims, config.rank, s)


def _initial(config, instance, seed):
    # separate stream from the data so a fixed data_seed still varies inits
    if config.problem == "ncpd":
        return _ncpd.random_factors(instance.T.shape, instance.r, [seed, 1])
    m, n = instance.X.shape
    return _nmf.random_init(m, n, instance.r, [seed, 1])


def _one_run(args):
    config, algo, seed, instance, init = args
    runner = _ncpd.run_ncpd if config.problem == "ncpd" else _nmf.run_nmf
    _, trace = runner(instance, algo, init=init, budget=config.budget(), seed=seed,
                      options=config.options(), order=config.order)
    return trace


def _check_writable(path):
    d = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(d) or not os.access(d, os.W_OK):
        raise OSError(f"cannot write to {path!r}")


def run_benchmark(config):
    """Run every algorithm on every seed.

    Parameters
    ----------
    config : RunConfig

    Returns
    -------
    BenchResult

    Notes
    -----
    Trace rows are ordered by run id (one per seed), then by the
    algorithm's position in ``config.algos``, then by ``k``.  With
    ``config.out`` set, traces, the ranking table and the averaged curves
    are written to the paths given by :func:`output_paths`.
    """
    paths = output_paths(config.out) if config.out else {}
    for p in paths.values():
        _check_writable(p)
    jobs, keys = [], []
    shared = None
    for seed in config.seeds:
        if config.data_file is not None or config.data_seed is not None:
            shared = shared or _instance(config, seed)
            instance = shared
        else:
            instance = _instance(config, seed)
        init = _initial(config, instance, seed)
        for algo in config.algos:
            jobs.append((config, algo, seed, instance, init))
            keys.append((_run_id(seed), algo))
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as ex:
            traces = list(ex.map(_one_run, jobs))
    else:
        traces = [_one_run(j) for j in jobs]
    runs = [(run_id, trace.algo, trace) for (run_id, _), trace in zip(keys, traces)]
    policy = config.e_min_policy
    ranking, raw_curves = _rank_from_runs(runs, lambda _: policy)
    grid, mean, count = time_grid_curves(raw_curves)
    e_min = {}
    for run_id, _, _ in runs:
        if run_id not in e_min:
            e_min[run_id], _ = compute_E([t for rid, _, t in runs if rid == run_id], policy)
    if paths:
        with open(paths["traces"], "w", newline="") as fh:
            write_trace_csv(fh, runs)
        with open(paths["ranking"], "w", newline="") as fh:
            fh.write(ranking.to_csv())
        with open(paths["curves"], "w", newline="") as fh:
            fh.write(curves_csv_text(grid, mean, count))
    return BenchResult(runs, ranking, grid, mean, count, e_min, paths)
