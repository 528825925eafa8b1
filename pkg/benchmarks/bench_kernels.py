"""Compare the compiled and numpy RK4 stepping kernels.

Usage: ``python benchmarks/bench_kernels.py [--N 3] [--steps 2000]``.
The operator is the left-side pulse plus dispersive generator with an added
oscillating term, so the kernel exercises its time-dependent path.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from doublenoon import kernels
from doublenoon.device import DeviceParams
from doublenoon.hamiltonian import modified_hamiltonians
from doublenoon.solver.protocol import side_spaces
from doublenoon.solver.stepping import LinearODE


def build_ode(N: int, backend: str) -> LinearODE:
    params = DeviceParams.baseline()
    space = side_spaces(N + 2)["left"]
    spec = modified_hamiltonians(params, space, 1, side="left")
    H = spec.static.matrix
    terms = [(-1j * H, 0.0)]
    for op, nu in spec.oscillatory:
        terms.append((-1j * op.matrix, nu))
        terms.append((-1j * op.matrix.conj().T, -nu))
    if len(terms) == 1:
        terms.append((-1j * 1e-3 * H, 1e8))
    return LinearODE(terms, backend=backend)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=3)
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--columns", type=int, default=4)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    y0 = None
    results = {}
    for name in sorted(kernels.BACKENDS):
        ode = build_ode(args.N, name)
        if y0 is None:
            y0 = rng.standard_normal((ode.dim, args.columns)) + 0j
        h = 1e-12
        ode.advance(y0, 0.0, h, 10)
        start = time.perf_counter()
        y = ode.advance(y0, 0.0, h, args.steps)
        elapsed = time.perf_counter() - start
        results[name] = (elapsed, y)
        print(f"{name:8s} dim={ode.dim:5d} steps={args.steps} time={elapsed:.4f}s")
    if len(results) == 2:
        (tc, yc), (tp, yp) = results["cython"], results["python"]
        print(f"speedup={tp / tc:.1f}x max_abs_diff={np.abs(yc - yp).max():.2e}")


if __name__ == "__main__":
    main()
