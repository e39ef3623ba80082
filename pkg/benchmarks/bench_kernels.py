"""Compiled kernels vs the pure-Python fallback on assembled FE systems.

    python3 benchmarks/bench_kernels.py [--nx 80] [--repeat 5]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from ewod import fespace as fe
from ewod import la
from ewod.mesh import ChannelGeometry, build_channel_mesh


def _best(fn, repeat: int) -> float:
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def systems(nx: int):
    mesh = build_channel_mesh(ChannelGeometry(), nx, max(nx // 5, 1), max(nx // 20, 1))
    S = fe.Spaces.for_mesh(mesh)
    M = fe.assemble_mass(S.Q)
    K = fe.assemble_stiffness(S.Q)
    spd = M * 100.0 + K
    wind = np.zeros((S.Q.n_cells, S.Q.n_qp, 2))
    wind[..., 0] = 1.0
    nonsym = spd + fe.assemble_convection(S.Q, wind, "grad") * 10.0
    return spd, nonsym


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nx", type=int, default=80)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    spd, nonsym = systems(args.nx)
    rng = np.random.default_rng(0)
    x = rng.standard_normal(spd.n_cols)
    b = spd @ x
    bn = nonsym @ x
    backends = la.available_backends()
    print(f"n = {spd.n_rows}, nnz = {spd.nnz}, backends: {', '.join(backends)}")
    cases = {
        "matvec": lambda: spd.matvec(x),
        "cg (jacobi)": lambda: la.cg_solve(spd, b, tol=1e-10),
        "bicgstab (jacobi)": lambda: la.bicgstab_solve(nonsym, bn, tol=1e-9),
    }
    timings = {}
    previous = la.get_backend()
    for name in backends:
        la.set_backend(name)
        for case, fn in cases.items():
            timings[(case, name)] = _best(fn, args.repeat)
    la.set_backend(previous)
    print(f"{'case':<20}" + "".join(f"{n:>14}" for n in backends) + ("     speedup" if len(backends) > 1 else ""))
    for case in cases:
        row = [timings[(case, n)] for n in backends]
        line = f"{case:<20}" + "".join(f"{t * 1e3:>12.3f}ms" for t in row)
        if len(row) > 1:
            line += f"{row[1] / row[0]:>11.1f}x"
        print(line)


if __name__ == "__main__":
    main()
