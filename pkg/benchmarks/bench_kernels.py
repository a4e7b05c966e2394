"""Time the compiled moment kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py --n 200 --M 10 --K 8 --L 8 --repeat 5
"""

import argparse
import timeit

import numpy as np

from cfwmmse import kernels
from cfwmmse._ext import kernels_py

try:
    from cfwmmse._ext import kernels as compiled
except ImportError:
    compiled = None


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--M", type=int, default=10)
    ap.add_argument("--K", type=int, default=8)
    ap.add_argument("--L", type=int, default=8)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    shape = (args.n, args.M, args.K, args.L)
    g = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    q = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    x = np.ascontiguousarray(kernels_py.effective_gains(g, q))

    impls = {"numpy": kernels_py}
    if compiled is not None:
        impls["cython"] = compiled
    print(f"active backend: {kernels.BACKEND}; shape n,M,K,L = {shape}")
    times = {}
    for name, mod in impls.items():
        t_gain = min(timeit.repeat(lambda: mod.effective_gains(g, q), number=1, repeat=args.repeat))
        t_mom = min(timeit.repeat(lambda: mod.moment_sums(x), number=1, repeat=args.repeat))
        times[name] = (t_gain, t_mom)
        print(f"{name:>7}: effective_gains {t_gain * 1e3:8.2f} ms   moment_sums {t_mom * 1e3:8.2f} ms")
    if "cython" in times:
        d_ref, b_ref = kernels_py.moment_sums(x)
        d_c, b_c = compiled.moment_sums(x)
        err = max(np.max(np.abs(d_ref - d_c)) / np.max(np.abs(d_ref)), np.max(np.abs(b_ref - b_c)) / np.max(np.abs(b_ref)))
        sg = times["numpy"][0] / times["cython"][0]
        sm = times["numpy"][1] / times["cython"][1]
        print(f"speedup: effective_gains x{sg:.1f}, moment_sums x{sm:.1f}; max relative difference {err:.1e}")


if __name__ == "__main__":
    main()
