"""Compiled kernels against their pure-Python references.

    python benchmarks/bench_kernels.py [--cycles N] [--repeat R]
"""
import argparse
import timeit

import numpy as np

from stbusv._kernels import _pure

try:
    from stbusv._kernels import _fast
except ImportError:
    _fast = None


def make_inputs(n: int, rng):
    """A busy signal pair over n cycles and a packetized valid/eop stream."""
    ta = np.unique(rng.integers(0, n * 10, n // 3)).astype(np.int64)
    tb = np.unique(rng.integers(0, n * 10, n // 3)).astype(np.int64)
    ca = rng.integers(0, 8, len(ta)).astype(np.int64)
    cb = rng.integers(0, 8, len(tb)).astype(np.int64)
    valid = (rng.random(n) < 0.6).astype(np.int64)
    eop = (rng.random(n) < 0.3).astype(np.int64)
    return (ta, ca, tb, cb), (valid, eop)


def bench(mod, sig, pkt, n, repeat):
    def align():
        mod.align_mask(*sig, 10, np.ones(n, dtype=np.uint8))

    def spans():
        mod.packet_spans(*pkt)
    return {name: min(timeit.repeat(fn, number=1, repeat=repeat))
            for name, fn in (("align_mask", align), ("packet_spans", spans))}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cycles", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    sig, pkt = make_inputs(args.cycles, np.random.default_rng(1))
    pure = bench(_pure, sig, pkt, args.cycles, args.repeat)
    print(f"{args.cycles} cycles, best of {args.repeat}")
    if _fast is None:
        for k, t in pure.items():
            print(f"  {k:<13} python {t * 1e3:8.2f} ms   (extension not built)")
        return
    fast = bench(_fast, sig, pkt, args.cycles, args.repeat)
    for k in pure:
        print(f"  {k:<13} python {pure[k] * 1e3:8.2f} ms   cython {fast[k] * 1e3:8.2f} ms"
              f"   speedup {pure[k] / fast[k]:5.1f}x")


if __name__ == "__main__":
    main()
