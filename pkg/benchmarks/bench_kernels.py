"""Compare the compiled and pure-Python per-event kernels.

Packs synthetic TFloat and TSmall events into 64 KiB RAC baskets and times
each kernel on both implementations. Prints CSV to stdout:

    python3 benchmarks/bench_kernels.py --mib 16 --reps 5
"""

from __future__ import annotations

import argparse
import csv
import statistics
import sys
import time

import numpy as np

from basketio import _pykernels
from basketio.synthgen import GenSpec, Kind, iter_payloads

try:
    from basketio import _ckernels
except ImportError:
    _ckernels = None


def baskets(kind: Kind, total: int, capacity: int = 65536):
    per = max(1, -(-capacity // kind.event_size))
    events = list(iter_payloads(GenSpec(kind, 1, max(1, total // kind.event_size))))
    for i in range(0, len(events), per):
        chunk = events[i:i + per]
        yield b"".join(chunk), np.array([len(e) for e in chunk], dtype=np.uint32)


def timed(fn, reps: int) -> float:
    samples = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples)


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--mib", type=float, default=16, help="raw bytes per event kind")
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--level", type=int, default=6)
    args = p.parse_args(argv)

    impls = [_pykernels] + ([_ckernels] if _ckernels else [])
    if _ckernels is None:
        print("compiled kernels not built; timing the Python fallback only", file=sys.stderr)
    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["kernel", "kind", "implementation", "seconds", "mb_per_s", "speedup"])
    for kind in (Kind.TFLOAT, Kind.TSMALL):
        data = list(baskets(kind, int(args.mib * (1 << 20))))
        raw = sum(len(d) for d, _ in data)
        packed = [(_pykernels.deflate_each(d, n, args.level), n) for d, n in data]
        cases = {
            "deflate_each": lambda impl: [impl.deflate_each(d, n, args.level) for d, n in data],
            "inflate_each": lambda impl: [impl.inflate_each(p, o, n) for (p, o), n in packed],
            "check_rac_tables": lambda impl: [impl.check_rac_tables(o, n, len(p), int(n.sum()))
                                              for (p, o), n in packed],
        }
        for name, case in cases.items():
            base = None
            for impl in impls:
                secs = timed(lambda: case(impl), args.reps)
                base = base or secs
                out.writerow([name, kind.branch, impl.IMPLEMENTATION, f"{secs:.4f}",
                              f"{raw / secs / 1e6:.1f}", f"{base / secs:.2f}"])
    return 0


if __name__ == "__main__":
    sys.exit(main())
