"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Also times one end-to-end solve of the 3-coloring triangle instance with
each backend (the backend is chosen at import, so that part runs in a
subprocess per backend).
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from invfim._kernels import _pykernels

try:
    from invfim._kernels import _ckernels
except ImportError:
    _ckernels = None


def cases(rng):
    T = rng.standard_normal((400, 1200))
    T[7, 11] = 3.0
    rows = [int(x) for x in rng.integers(0, 1 << 20, size=20000)]
    queries = [int(x) for x in rng.integers(0, 1 << 20, size=200) & 0b1011001]
    t = 4
    hits = np.array([[int(a & q == q) for q in (1, 2, 3, 12)] for a in range(1 << t)], dtype=np.int64)
    return {
        "pivot 400x1200": lambda k: k.pivot(T.copy(), 7, 11),
        "support_counts 20000 rows x 200": lambda k: k.support_counts(rows, queries),
        "enumerate_counts t=4 n=6": lambda k: k.enumerate_counts(hits, [3, 3, 1, 2], 6, True),
    }


SOLVE = (
    "import time; from invfim.oracle import Graph, reduce_3coloring; "
    "from invfim.synth import synthesize; from invfim._kernels import BACKEND; "
    "cs = reduce_3coloring(Graph(3, ((0, 1), (1, 2), (0, 2)))); "
    "t0 = time.perf_counter(); synthesize(cs, 'derandom-u'); "
    "print(BACKEND, time.perf_counter() - t0)"
)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    backends = [("python", _pykernels)]
    if _ckernels is not None:
        backends.insert(0, ("cython", _ckernels))
    else:
        print("compiled extension not built; timing the fallback only")
    print(f"{'kernel':36s} " + " ".join(f"{name:>10s}" for name, _ in backends) + "   speedup")
    for label, fn in cases(rng).items():
        times = []
        for _, k in backends:
            times.append(min(timeit.repeat(lambda: fn(k), number=1, repeat=args.repeat)))
        speed = f"{times[-1] / times[0]:8.1f}x" if len(times) == 2 else ""
        print(f"{label:36s} " + " ".join(f"{s * 1e3:8.2f}ms" for s in times) + f"  {speed}")
    print("\nend-to-end synth, 3-coloring triangle (m=27, n=729):")
    for name, _ in backends:
        env = dict(os.environ, INVFIM_PURE_PYTHON="1" if name == "python" else "0")
        res = subprocess.run([sys.executable, "-c", SOLVE], env=env, capture_output=True, text=True)
        print("  " + (res.stdout.strip() or res.stderr.strip()))


if __name__ == "__main__":
    main()
