"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--n 128 256] [--repeat 20]
"""
import argparse
import timeit

import numpy as np

from aflab import kernels
from aflab.grid import GeometryConfig, build_geometry


def cases(geom, ef):
    g = geom.grid
    ihx2, ihy2 = 1.0 / g.hx ** 2, 1.0 / g.hy ** 2
    hap = 0.5 * geom.alpha_prime
    u = ef + hap * geom.kappa / ef
    return {
        "lap": lambda b: b.lap(u, geom.inv4g, ihx2, ihy2),
        "rhs_ef": lambda b: b.rhs_ef(ef, geom.kappa, geom.inv4g, hap, ihx2, ihy2),
        "rk4_step": lambda b: b.rk4(0, ef, 1e-6, geom.kappa, geom.inv4g, hap, ihx2, ihy2),
        "energy": lambda b: b.energy(u, geom.kappa, geom.weights, g.hx, g.hy),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[64, 128, 256])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    backends = {"numpy": kernels.python_backend}
    if kernels.compiled_backend is not None:
        backends["cython"] = kernels.compiled_backend
    else:
        print("compiled kernels unavailable; timing the numpy backend only")
    print(f"{'n':>5} {'kernel':>10} " + " ".join(f"{b + ' ms':>12}" for b in backends)
          + (f" {'speedup':>8}" if len(backends) == 2 else ""))
    for n in args.n:
        geom = build_geometry(GeometryConfig("synthetic-bump", nx=n, ny=n, bump_amplitude=10.0))
        X, Y = geom.grid.coords()
        ef = 3.0 + 0.5 * np.sin(2 * np.pi * X) * np.cos(2 * np.pi * Y)
        for name, fn in cases(geom, ef).items():
            ms = {}
            for bname, b in backends.items():
                fn(b)
                ms[bname] = 1e3 * min(timeit.repeat(lambda: fn(b), number=1,
                                                    repeat=args.repeat))
            line = f"{n:>5} {name:>10} " + " ".join(f"{v:>12.3f}" for v in ms.values())
            if len(ms) == 2:
                line += f" {ms['numpy'] / ms['cython']:>7.1f}x"
            print(line)


if __name__ == "__main__":
    main()
