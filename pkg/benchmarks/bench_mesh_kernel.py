"""Compare the compiled and numpy mesh kernels.

Times one energy-and-gradient evaluation on a few mesh sizes and checks that
both backends return the same numbers.  Run with ``python3 benchmarks/bench_mesh_kernel.py``.
"""

import argparse
import math
import timeit

import numpy as np

from annuli import _pykernel

try:
    from annuli import _ckernel
except ImportError:
    _ckernel = None


def make_mesh(n_r, n_t, seed=0):
    rng = np.random.default_rng(seed)
    s = np.exp(np.linspace(math.log(0.3), 0.0, n_r))[:, None]
    t = 2 * math.pi * np.arange(n_t)[None, :] / n_t
    noise = 0.01 * (rng.standard_normal((n_r, n_t)) + 1j * rng.standard_normal((n_r, n_t)))
    return np.ascontiguousarray(s * np.exp(1j * t) * (1 + noise))


def evaluate(impl, H):
    M = impl.cell_moduli(H)
    rho = 2.0 / (1.0 - 0.5 * M**2)
    w = np.ascontiguousarray(rho * rho)
    dw = np.ascontiguousarray(2 * rho * 2.0 * M / (1.0 - 0.5 * M**2) ** 2)
    return impl.assemble(H, w, dw, 0.25, 1.5)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--sizes", default="64x128,128x256,256x512")
    args = ap.parse_args()
    backends = [("python", _pykernel)] + ([("cython", _ckernel)] if _ckernel else [])
    if _ckernel is None:
        print("compiled kernel not built; timing the numpy kernel only")
    print(f"{'mesh':>10} {'backend':>8} {'ms/eval':>10} {'speedup':>8} {'max|dG|':>10}")
    for size in args.sizes.split(","):
        n_r, n_t = (int(v) for v in size.split("x"))
        H = make_mesh(n_r, n_t)
        ref_E, ref_G = evaluate(_pykernel, H)
        base = None
        for name, impl in backends:
            number = max(1, 2000 // n_r)
            t = min(timeit.repeat(lambda: evaluate(impl, H), number=number, repeat=args.repeat)) / number
            E, G = evaluate(impl, H)
            assert abs(E - ref_E) <= 1e-12 * abs(ref_E)
            base = base or t
            print(f"{size:>10} {name:>8} {1e3 * t:>10.3f} {base / t:>8.2f} {np.max(np.abs(G - ref_G)):>10.1e}")


if __name__ == "__main__":
    main()
