import csv
import io

import pytest
from hypothesis import given
from hypothesis import strategies as st

from doublenoon.analytic import operation_time
from doublenoon.device import MHZ, DeviceParams
from doublenoon.schedule import Segment, compile_schedule, total_time

Ns = st.integers(1, 12)
P = DeviceParams(mu=10 * MHZ)


@given(Ns, st.booleans(), st.booleans())
def test_segment_counts(N, bell, gaps):
    s = compile_schedule(N, P, include_bell=bell, include_gaps=gaps)
    kinds = s.kinds()
    assert kinds.count("pulse-gf") == N
    assert kinds.count("pulse-ge") == 1
    assert kinds.count("interact") == N
    assert kinds.count("bell-prep") == int(bell)
    assert kinds.count("gap") == 4 * int(gaps)


@given(Ns)
def test_ordering(N):
    kinds = [k for k in compile_schedule(N, P, True, True).kinds() if k != "gap"]
    assert kinds[0] == "bell-prep"
    assert kinds[1] == "pulse-gf"
    assert kinds[-2:] == ["pulse-ge", "interact"]
    body = kinds[2:-2]
    assert body == ["interact", "pulse-gf"] * (N - 1)


@given(Ns)
def test_interaction_times_decrease(N):
    inter = [s.duration for s in compile_schedule(N, P) if s.kind == "interact"]
    assert all(b < a for a, b in zip(inter, inter[1:]))


@pytest.mark.parametrize("N", range(1, 11))
def test_total_time_identity(N):
    s = compile_schedule(N, P, include_bell=True, include_gaps=True)
    assert abs(total_time(s) - operation_time(N, P)) <= 1e-12 * operation_time(N, P)


def test_csv_times_contiguous():
    s = compile_schedule(3, P, True, True)
    rows = list(csv.DictReader(io.StringIO(s.to_csv())))
    assert len(rows) == len(s)
    for a, b in zip(rows, rows[1:]):
        assert float(a["end_s"]) == float(b["start_s"])
    assert float(rows[-1]["end_s"]) == pytest.approx(total_time(s), rel=1e-14)


def test_errors():
    with pytest.raises(ValueError):
        compile_schedule(0, P)
    with pytest.raises(ValueError):
        compile_schedule(2, DeviceParams(), include_bell=True)
    with pytest.raises(ValueError):
        Segment("interact", 0.0)
    with pytest.raises(ValueError):
        Segment("warp", 1.0)


def test_gap_noise_switch():
    s = compile_schedule(2, DeviceParams(gap_noise=False), include_gaps=True)
    assert all(not seg.noise_active for seg in s if seg.kind == "gap")
