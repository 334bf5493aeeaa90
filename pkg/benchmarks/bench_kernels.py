"""Compiled vs pure-Python banded kernels, plus one end-to-end solver run per backend.

    python3 benchmarks/bench_kernels.py [--n 20001] [--repeat 5]
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from tmwave import fem1d, kernels

END_TO_END = """
import time
import numpy as np
from tmwave import coefficients as co, fem1d, stepping
from tmwave.kernels import BACKEND
model = co.ResonatorChain(co.chain_intervals(20), domain=(-100.0, 100.0))
sp = fem1d.FeSpace(fem1d.build_mesh(-100.0, 100.0, 2000, model.interfaces))
solver = stepping.WaveSolver(sp, model, ("gain",), lumped=False)
dt = stepping.stable_dt(sp, model, 0.5)
t0 = time.perf_counter()
stepping.run(solver, lambda x: np.exp(-(x + 5.0) ** 2 / 2), lambda x: 0 * x, dt, 5.0)
print(BACKEND, time.perf_counter() - t0)
"""


def operands(n, rng):
    sp = fem1d.FeSpace(fem1d.build_mesh(0.0, 1.0, (n - 1) // 2))
    wq = 1.0 + rng.random(sp.quad_points.shape)
    bands = fem1d.stiffness_bands(sp, wq)
    bands[0] += 1.0  # shift away from singular so LDL^T needs no pivots
    x = rng.standard_normal(bands.shape[1])
    return sp, wq, bands, x


def bench(impl, sp, wq, bands, x, repeat):
    table = np.ascontiguousarray(fem1d.STIFF_TABLE)
    wq_el = np.ascontiguousarray(wq / sp.mesh.lengths[:, None] ** 2)
    lb, d, _ = impl.band_ldlt(bands, 1e-14)
    cases = {
        "band_matvec": lambda: impl.band_matvec(bands, x),
        "band_ldlt": lambda: impl.band_ldlt(bands, 1e-14),
        "band_ldlt_solve": lambda: impl.band_ldlt_solve(lb, d, x),
        "assemble_p2_bands": lambda: impl.assemble_p2_bands(wq_el, table),
    }
    return {k: min(timeit.repeat(f, number=1, repeat=repeat)) for k, f in cases.items()}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20001, help="matrix size (odd)")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    sp, wq, bands, x = operands(args.n, rng)
    impls = kernels.backends()
    times = {name: bench(impl, sp, wq, bands, x, args.repeat) for name, impl in impls.items()}
    print(f"kernels, n = {bands.shape[1]}, best of {args.repeat} (ms)")
    names = list(times)
    print(f"{'kernel':<20}" + "".join(f"{nm:>12}" for nm in names)
          + ("     speedup" if len(names) == 2 else ""))
    for k in times["python"]:
        row = f"{k:<20}" + "".join(f"{times[nm][k] * 1e3:12.3f}" for nm in names)
        if len(names) == 2:
            row += f"{times['python'][k] / times['compiled'][k]:12.1f}"
        print(row)
    print("\nend to end: 2000-element chain, consistent mass, T = 5 (s)")
    for forced in ("", "1"):
        env = dict(os.environ, TMWAVE_PURE_PYTHON=forced)
        r = subprocess.run([sys.executable, "-c", END_TO_END], env=env,
                           capture_output=True, text=True, check=True)
        backend, secs = r.stdout.split()
        print(f"{backend:<20}{float(secs):12.3f}")


if __name__ == "__main__":
    main()
