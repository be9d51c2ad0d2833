import numpy as np
import pytest

from inertialbcd.errors import DimensionError
from inertialbcd.textio import (format_matrix, format_tensor, parse_matrix, parse_tensor,
                                read_matrix, read_tensor, write_matrix, write_tensor)


def test_matrix_round_trip_is_exact(rng, tmp_path):
    M = rng.random((4, 3)) * 1e3 - 1e-7
    path = tmp_path / "m.txt"
    write_matrix(path, M)
    np.testing.assert_array_equal(read_matrix(path), M)
    assert format_matrix(read_matrix(path)) == path.read_text()


def test_matrix_layout():
    assert format_matrix([[1.0, 0.5], [2.0, 0.1]]) == "2 2\n1 0.5\n2 0.10000000000000001\n"


def test_tensor_round_trip_is_exact(rng, tmp_path):
    T = rng.random((2, 3, 4))
    path = tmp_path / "t.txt"
    write_tensor(path, T)
    np.testing.assert_array_equal(read_tensor(path), T)
    lines = path.read_text().splitlines()
    assert lines[0] == "2 3 4" and lines[1] == "2 12"


@pytest.mark.parametrize("text", ["", "2 2\n1 2\n", "2 2\n1 2\n3\n", "x y\n",
                                  "1 1\nnan\n", "1 1\n1\n2\n"])
def test_malformed_matrix(text):
    with pytest.raises(ValueError):
        parse_matrix(text)


@pytest.mark.parametrize("text", ["", "2 2\n2 4\n1 2 3 4\n5 6 7 8\n",
                                  "1 1 2\n1 3\n1 2 3\n"])
def test_malformed_tensor(text):
    with pytest.raises(ValueError):
        parse_tensor(text)


def test_format_rejects_wrong_ndim():
    with pytest.raises(DimensionError):
        format_matrix(np.ones(3))
    with pytest.raises(DimensionError):
        format_tensor(np.ones((2, 2)))
