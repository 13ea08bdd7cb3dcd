"""Reference implementations of the compiled kernels."""
import numpy as np


def align_mask(ta, ca, tb, cb, period, mask):
    """Clear mask[k] wherever the two signals differ at time k*period.

    ``ta``/``tb`` are strictly increasing change times, ``ca``/``cb`` the
    integer codes of the values taken at those times; code 0 is 'x', which is
    also the value before the first change.
    """
    n = len(mask)
    if not n:
        return
    pts = np.arange(n, dtype=np.int64) * period
    ia = np.searchsorted(ta, pts, side="right") - 1
    ib = np.searchsorted(tb, pts, side="right") - 1
    va = np.where(ia >= 0, np.asarray(ca, dtype=np.int64)[np.maximum(ia, 0)], 0) if len(ta) else 0
    vb = np.where(ib >= 0, np.asarray(cb, dtype=np.int64)[np.maximum(ib, 0)], 0) if len(tb) else 0
    mask &= (va == vb)


def packet_spans(valid, eop):
    """Group transfer cycles into packets.

    Returns ``(cycles, starts)``: the transfer cycles in order and, for each
    packet, the index of its first cycle in ``cycles``; a final entry equal
    to ``len(cycles)`` closes the last packet.  The last packet is complete
    iff the eop of its final cycle is set.
    """
    cycles = np.flatnonzero(valid)
    ends = np.flatnonzero(np.asarray(eop)[cycles] != 0) + 1
    starts = np.concatenate(([0], ends))
    if starts[-1] != len(cycles):
        starts = np.concatenate((starts, [len(cycles)]))
    if len(cycles) == 0:
        starts = np.zeros(1, dtype=np.int64)
    return cycles.astype(np.int64), starts.astype(np.int64)
