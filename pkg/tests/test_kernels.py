import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stbusv import _kernels
from stbusv._kernels import _pure

fast = pytest.importorskip("stbusv._kernels._fast", reason="extension not built")


def test_backend_selected():
    assert _kernels.BACKEND in ("python", "cython")


@st.composite
def histories(draw):
    times = sorted(draw(st.sets(st.integers(0, 500), max_size=30)))
    codes = draw(st.lists(st.integers(0, 4), min_size=len(times), max_size=len(times)))
    return np.array(times, dtype=np.int64), np.array(codes, dtype=np.int64)


@settings(max_examples=300)
@given(histories(), histories(), st.integers(1, 20), st.integers(0, 80))
def test_align_mask_same_as_reference(a, b, period, n):
    m1 = np.ones(n, dtype=np.uint8)
    m2 = m1.copy()
    _pure.align_mask(a[0], a[1], b[0], b[1], period, m1)
    fast.align_mask(a[0], a[1], b[0], b[1], period, m2)
    assert np.array_equal(m1, m2)


def test_align_mask_only_clears():
    m = np.zeros(4, dtype=np.uint8)
    t = np.array([0], dtype=np.int64)
    for k in (_pure, fast):
        k.align_mask(t, np.array([1]), t, np.array([1]), 10, m)
        assert not m.any()


@settings(max_examples=300)
@given(st.lists(st.tuples(st.booleans(), st.booleans()), max_size=60))
def test_packet_spans_same_as_reference(rows):
    valid = np.array([v for v, _ in rows], dtype=np.int64)
    eop = np.array([e for _, e in rows], dtype=np.int64)
    c1, s1 = _pure.packet_spans(valid, eop)
    c2, s2 = fast.packet_spans(valid, eop)
    assert np.array_equal(c1, c2) and np.array_equal(s1, s2)
    assert s1[0] == 0 and s1[-1] == len(c1)
