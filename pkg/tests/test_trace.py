import io

import pytest

from inertialbcd.trace import (TRACE_COLUMNS, Budget, Clock, LogicalClock, Trace,
                               read_trace_csv, trace_csv_text)


def test_budget_validation():
    with pytest.raises(ValueError):
        Budget()
    with pytest.raises(ValueError):
        Budget(time_limit=0.0)
    with pytest.raises(ValueError):
        Budget(max_iter=-1)
    with pytest.raises(ValueError):
        Budget(time_limit=1.0, deterministic=True)


def test_budget_exhaustion():
    b = Budget(max_iter=3, tol=1e-3, deterministic=True)
    c = b.clock()
    assert isinstance(c, LogicalClock)
    assert not b.exhausted(2, c, 0.1)
    assert b.exhausted(3, c, 0.1)
    assert b.exhausted(0, c, 1e-3)


def test_clocks():
    lc = LogicalClock()
    assert lc.elapsed(7) == 7.0
    c = Clock()
    c.pause()
    t = c.elapsed()
    c.resume()
    assert c.elapsed() >= t >= 0.0


def test_csv_round_trip():
    tr = Trace(algo="IBPG")
    tr.append(0, 0.0, 2.5, 0.1)
    tr.append(1, 0.25, 1.0 / 3.0, 0.01)
    text = trace_csv_text([("seed000001", "IBPG", tr)])
    assert text.splitlines()[0] == ",".join(TRACE_COLUMNS)
    back = read_trace_csv(io.StringIO(text))
    got = back[("seed000001", "IBPG")]
    assert got.records == tr.records
    assert got.final.objective == 1.0 / 3.0
