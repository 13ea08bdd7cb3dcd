# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in _pure.py (same signatures, same results)."""
import numpy as np

cimport numpy as cnp
from libc.stdint cimport int64_t, uint8_t

cnp.import_array()


def align_mask(ta, ca, tb, cb, long long period, uint8_t[::1] mask):
    """Clear mask[k] wherever the two signals differ at time k*period.

    Walks both change lists once, alongside the cycle counter."""
    cdef const int64_t[::1] vta = np.ascontiguousarray(ta, dtype=np.int64)
    cdef const int64_t[::1] vca = np.ascontiguousarray(ca, dtype=np.int64)
    cdef const int64_t[::1] vtb = np.ascontiguousarray(tb, dtype=np.int64)
    cdef const int64_t[::1] vcb = np.ascontiguousarray(cb, dtype=np.int64)
    cdef Py_ssize_t n = mask.shape[0], na = vta.shape[0], nb = vtb.shape[0]
    cdef Py_ssize_t k, ia = 0, ib = 0
    cdef int64_t t, a = 0, b = 0
    for k in range(n):
        t = k * period
        while ia < na and vta[ia] <= t:
            a = vca[ia]
            ia += 1
        while ib < nb and vtb[ib] <= t:
            b = vcb[ib]
            ib += 1
        if a != b:
            mask[k] = 0


def packet_spans(valid, eop):
    """Group transfer cycles into packets; see _pure.packet_spans."""
    cdef const uint8_t[::1] v = np.ascontiguousarray(np.asarray(valid) != 0, dtype=np.uint8)
    cdef const uint8_t[::1] e = np.ascontiguousarray(np.asarray(eop) != 0, dtype=np.uint8)
    cdef Py_ssize_t n = v.shape[0], k, m = 0, p = 1
    cycles_arr = np.empty(n, dtype=np.int64)
    starts_arr = np.empty(n + 2, dtype=np.int64)
    cdef int64_t[::1] cycles = cycles_arr
    cdef int64_t[::1] starts = starts_arr
    starts[0] = 0
    for k in range(n):
        if v[k]:
            cycles[m] = k
            m += 1
            if e[k]:
                starts[p] = m
                p += 1
    if starts[p - 1] != m:
        starts[p] = m
        p += 1
    return cycles_arr[:m], starts_arr[:p]
