"""Run traces, budgets and the trace CSV schema."""
import csv
import io
import time
from dataclasses import dataclass, field
from typing import NamedTuple

TRACE_COLUMNS = ("run_id", "algo", "k", "elapsed_s", "objective", "relerror")


class TraceRecord(NamedTuple):
    k: int
    elapsed_s: float
    objective: float
    relerror: float


@dataclass
class Trace:
    """Per-outer-iteration records of one run.

    ``history`` is filled only when a solver is asked to keep it; each entry
    is a dict with the outer index ``k``, the iterate ``x`` and ``x_prev``
    (each block's value just before its last update in that loop) and the
    parameters of the first update of every block in the loop.
    """

    records: list = field(default_factory=list)
    history: list = field(default_factory=list)
    algo: str = ""

    def append(self, k, elapsed_s, objective, relerror=float("nan")):
        self.records.append(
            TraceRecord(int(k), float(elapsed_s), float(objective), float(relerror)))

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, idx):
        return self.records[idx]

    @property
    def objectives(self):
        return [r.objective for r in self.records]

    @property
    def relerrors(self):
        return [r.relerror for r in self.records]

    @property
    def final(self):
        return self.records[-1]


class Clock:
    """Wall clock that can be paused, so trace bookkeeping is not billed."""

    def __init__(self):
        self._start = time.perf_counter()
        self._paused_at = None
        self._paused_total = 0.0

    def elapsed(self, k=None):
        now = self._paused_at if self._paused_at is not None else time.perf_counter()
        return now - self._start - self._paused_total

    def pause(self):
        if self._paused_at is None:
            self._paused_at = time.perf_counter()

    def resume(self):
        if self._paused_at is not None:
            self._paused_total += time.perf_counter() - self._paused_at
            self._paused_at = None


class LogicalClock(Clock):
    """Deterministic clock: elapsed time of outer iteration ``k`` is ``k``."""

    def __init__(self):
        self._k = 0

    def elapsed(self, k=None):
        if k is not None:
            self._k = k
        return float(self._k)

    def pause(self):
        pass

    def resume(self):
        pass


@dataclass
class Budget:
    """Stopping rule for an outer loop.

    A run stops at the first of: ``max_iter`` outer iterations, ``time_limit``
    seconds of (unpaused) wall time, or a relative error at or below
    ``tol``.  ``deterministic`` swaps the wall clock for a logical one so
    traces are byte-reproducible; it requires ``max_iter``.
    """

    max_iter: int | None = None
    time_limit: float | None = None
    tol: float | None = None
    deterministic: bool = False

    def __post_init__(self):
        if self.max_iter is None and self.time_limit is None:
            raise ValueError("budget needs max_iter or time_limit")
        if self.max_iter is not None and self.max_iter < 0:
            raise ValueError("max_iter must be >= 0")
        if self.time_limit is not None and self.time_limit <= 0:
            raise ValueError("time_limit must be positive")
        if self.deterministic and self.max_iter is None:
            raise ValueError("deterministic budgets need max_iter")

    def clock(self):
        return LogicalClock() if self.deterministic else Clock()

    def exhausted(self, k, clock, relerror=None):
        if self.max_iter is not None and k >= self.max_iter:
            return True
        if (not self.deterministic and self.time_limit is not None
                and clock.elapsed() >= self.time_limit):
            return True
        if self.tol is not None and relerror is not None and relerror <= self.tol:
            return True
        return False


def fmt_num(x):
    return "%.17g" % x


def trace_rows(trace, run_id, algo):
    for rec in trace.records:
        yield (run_id, algo, rec.k, fmt_num(rec.elapsed_s),
               fmt_num(rec.objective), fmt_num(rec.relerror))


def write_trace_csv(fh, runs, header=True):
    """Write ``runs`` (iterable of ``(run_id, algo, trace)``) as CSV."""
    w = csv.writer(fh, lineterminator="\n")
    if header:
        w.writerow(TRACE_COLUMNS)
    for run_id, algo, trace in runs:
        w.writerows(trace_rows(trace, run_id, algo))


def trace_csv_text(runs):
    buf = io.StringIO()
    write_trace_csv(buf, runs)
    return buf.getvalue()


def read_trace_csv(fh):
    """Parse a trace CSV into ``{(run_id, algo): Trace}`` preserving order."""
    out = {}
    for row in csv.DictReader(fh):
        key = (row["run_id"], row["algo"])
        tr = out.setdefault(key, Trace(algo=row["algo"]))
        tr.append(int(row["k"]), float(row["elapsed_s"]),
                  float(row["objective"]), float(row["relerror"]))
    return out
