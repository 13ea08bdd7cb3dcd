"""Hot loops, compiled when the Cython extension is built.

``BACKEND`` names the implementation in use: ``"cython"`` or ``"python"``.
Set ``STBUSV_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _pure

BACKEND = "python"
align_mask = _pure.align_mask
packet_spans = _pure.packet_spans

if not os.environ.get("STBUSV_PURE_PYTHON"):
    try:
        from . import _fast
    except ImportError:  # extension not built
        pass
    else:
        BACKEND = "cython"
        align_mask = _fast.align_mask
        packet_spans = _fast.packet_spans

__all__ = ["BACKEND", "align_mask", "packet_spans"]
