"""Compiled kernels vs their numpy twins.

Run ``python3 benchmarks/bench_kernels.py``. With BANDDIFF_NO_NUMBA=1 the
"compiled" column runs the same loops as plain Python, which shows what the
fallback would cost if the numpy twins did not exist.
"""
import argparse
import time

import numpy as np

from banddiff import kernels
from banddiff._accel import backend
from banddiff.ensemble import sample
from banddiff.lattice import LatticeConfig, distances_from_origin, shell_neighbors
from banddiff.spectral import _diff_index


def best_of(fn, repeat):
    fn()  # warm up (triggers compilation)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=4096)
    ap.add_argument("--W", type=int, default=24)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()

    cfg = LatticeConfig(1, args.N, args.W)
    H = sample(cfg, "hermitian", 0)
    nb = shell_neighbors(cfg)
    v = np.random.default_rng(0).standard_normal(cfg.n_sites) + 0j
    p = np.random.default_rng(1).random(cfg.n_sites)

    small = LatticeConfig(1, 256, 8)
    w = np.abs(np.linalg.eigh(sample(small, "hermitian", 0).to_dense())[1][:, :32]) ** 2
    order = np.ascontiguousarray(np.argsort(-w, axis=0, kind="stable"))
    expo = distances_from_origin(small) / 8.0 ** 1.15
    dix = _diff_index(small)

    cases = [
        ("band_matvec", lambda: kernels._band_matvec_loop(H.table, nb, v, np.empty_like(v)),
         lambda: kernels.band_matvec_numpy(H.table, nb, v)),
        ("shell_convolve", lambda: kernels._shell_convolve_loop(p, nb, np.empty_like(p)),
         lambda: kernels.shell_convolve_numpy(p, nb)),
        ("subexp_search", lambda: kernels._subexp_loop(w, order, dix, expo, np.log(10.0)),
         lambda: kernels.subexp_search_numpy(w, order, dix, expo, np.log(10.0))),
    ]
    print(f"backend={backend()} N={args.N} W={args.W} M={cfg.M}")
    print(f"{'kernel':<16}{'loop [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}")
    for name, loop, vec in cases:
        a = best_of(loop, args.repeat if backend() == "numba" else 1)
        b = best_of(vec, args.repeat)
        print(f"{name:<16}{1e3 * a:>12.3f}{1e3 * b:>12.3f}{b / a:>10.2f}")


if __name__ == "__main__":
    main()
