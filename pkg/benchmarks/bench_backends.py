"""Compare the compiled and numpy implementations of the IPFP log sweep.

Run as: python benchmarks/bench_backends.py [size ...]
"""

import sys
import time

import numpy as np

from affinity._kernels import _py

try:
    from affinity._kernels import _core
except ImportError:
    _core = None


def bench(kernel, logk, logp, logq, repeats=20):
    m_x, m_y = logk.shape
    u = np.zeros(m_x)
    v = np.zeros(m_y)
    kernel(logk, logp, logq, u, v)  # warm-up / JIT caches
    start = time.perf_counter()
    for _ in range(repeats):
        err, max_lp = kernel(logk, logp, logq, u, v)
    elapsed = (time.perf_counter() - start) / repeats
    return elapsed, err


def main(sizes):
    rng = np.random.default_rng(0)
    print(f"{'size':>8} {'numpy':>12} {'cython':>12} {'speedup':>8}")
    for m in sizes:
        z = rng.normal(size=m)
        logk = 4.0 * np.outer(z, z)  # peaked kernel, the hot regime
        w = np.full(m, 1.0 / m)
        logp = logq = np.log(w)
        t_py, e_py = bench(_py.log_sweep, logk, logp, logq)
        if _core is None:
            print(f"{m:>8} {t_py * 1e3:>10.2f}ms {'n/a':>12}")
            continue
        t_cy, e_cy = bench(_core.log_sweep, logk, logp, logq)
        assert abs(e_py - e_cy) < 1e-12, (e_py, e_cy)
        print(f"{m:>8} {t_py * 1e3:>10.2f}ms {t_cy * 1e3:>10.2f}ms "
              f"{t_py / t_cy:>7.1f}x")


if __name__ == "__main__":
    main([int(a) for a in sys.argv[1:]] or [200, 500, 1000, 2000])
