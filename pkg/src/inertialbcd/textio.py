"""Plain-text matrix and tensor files.

Matrix format: a header line ``m n`` followed by ``m`` lines of ``n``
space-separated numbers.  Tensor format: a header line ``I J K`` followed
by the mode-1 unfolding written in the matrix format.  Numbers are written
with 17 significant digits so values round-trip exactly.
"""
import numpy as np

from .errors import DimensionError
from .matops import mode_fold, mode_unfold

NUM_FMT = "%.17g"


def format_matrix(M):
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise DimensionError(f"expected a matrix, got shape {M.shape}")
    lines = [f"{M.shape[0]} {M.shape[1]}"]
    lines.extend(" ".join(NUM_FMT % v for v in row) for row in M)
    return "\n".join(lines) + "\n"


def _parse_matrix(lines, what):
    if not lines:
        raise ValueError(f"{what}: missing header")
    try:
        m, n = (int(t) for t in lines[0].split())
    except ValueError:
        raise ValueError(f"{what}: bad header {lines[0]!r}") from None
    rows = lines[1:1 + m]
    if len(rows) != m:
        raise ValueError(f"{what}: expected {m} rows, found {len(rows)}")
    M = np.array([[float(t) for t in row.split()] for row in rows],
                 dtype=np.float64).reshape(m, -1) if m else np.zeros((0, n))
    if M.shape != (m, n):
        raise ValueError(f"{what}: expected {n} columns per row")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{what}: non-finite entries")
    return M, lines[1 + m:]


def _lines(text):
    return [ln for ln in text.splitlines() if ln.strip()]


def parse_matrix(text):
    M, rest = _parse_matrix(_lines(text), "matrix")
    if rest:
        raise ValueError("matrix: trailing data")
    return M


def format_tensor(T):
    T = np.asarray(T, dtype=np.float64)
    if T.ndim != 3:
        raise DimensionError(f"expected a 3-way tensor, got shape {T.shape}")
    head = " ".join(str(d) for d in T.shape)
    return head + "\n" + format_matrix(mode_unfold(T, 1))


def parse_tensor(text):
    lines = _lines(text)
    if not lines:
        raise ValueError("tensor: missing header")
    dims = tuple(int(t) for t in lines[0].split())
    if len(dims) != 3:
        raise ValueError(f"tensor: bad header {lines[0]!r}")
    M, rest = _parse_matrix(lines[1:], "tensor")
    if rest:
        raise ValueError("tensor: trailing data")
    return mode_fold(M, 1, dims)


def write_matrix(path, M):
    with open(path, "w") as fh:
        fh.write(format_matrix(M))


def read_matrix(path):
    with open(path) as fh:
        return parse_matrix(fh.read())


def write_tensor(path, T):
    with open(path, "w") as fh:
        fh.write(format_tensor(T))


def read_tensor(path):
    with open(path) as fh:
        return parse_tensor(fh.read())
