"""On-disk output: legacy VTK snapshots and the per-step CSV series."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from ..mesh import Mesh
from ..scheme import State

CSV_COLUMNS = (
    "step", "t",
    "E_kinetic", "E_charge", "E_cahn_hilliard", "E_electrostatic", "E_wall", "E_total",
    "D_viscous", "D_mobility", "D_ohmic", "D_slip", "D_boundary_relax",
    "phase_mass", "total_charge", "div_norm", "centroid_x", "centroid_y", "interface_length",
    "droplet_count",
    "it_potential", "it_charge", "it_phase", "it_velocity", "it_pressure", "picard_iterations",
    "energy_margin",
)


def _vertex_values(mesh: Mesh, coeffs, degree: int, components: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Sample a fluid-supported field at the mesh vertices; zero and mask 0 elsewhere."""
    nx, ny = len(mesh.xs) - 1, len(mesh.ys) - 1
    j0, j1 = mesh.fluid_rows
    lx = degree * nx + 1
    n_scalar = lx * (degree * (j1 - j0) + 1)
    c = np.asarray(coeffs, dtype=float).reshape(components, n_scalar)
    out = np.zeros((components, ny + 1, nx + 1))
    mask = np.zeros((ny + 1, nx + 1))
    jj = np.arange(j0, j1 + 1)
    lattice = c.reshape(components, -1, lx)[:, ::degree, ::degree]
    out[:, jj, :] = lattice
    mask[jj, :] = 1.0
    return out.reshape(components, -1), mask.ravel()


def _fmt(v: float) -> str:
    return "0" if v == 0.0 else repr(float(v))


def write_vtk(state: State, mesh: Mesh, path) -> None:
    """Legacy ASCII VTK with quads over the whole domain and seven point arrays."""
    pts = mesh.nodes
    V = np.asarray(state.V, dtype=float)
    phi, mask = _vertex_values(mesh, state.phi, 2)
    mu, _ = _vertex_values(mesh, state.mu, 2)
    q, _ = _vertex_values(mesh, state.q, 2)
    p, _ = _vertex_values(mesh, state.p, 1)
    u, _ = _vertex_values(mesh, state.u, 2, components=2)
    n = len(pts)
    lines = ["# vtk DataFile Version 3.0", f"ewod state step {state.n} t {_fmt(state.t)}", "ASCII",
             "DATASET UNSTRUCTURED_GRID", f"POINTS {n} double"]
    lines += [f"{_fmt(x)} {_fmt(y)} 0" for x, y in pts]
    cells = mesh.cells
    lines.append(f"CELLS {len(cells)} {5 * len(cells)}")
    lines += ["4 " + " ".join(str(int(i)) for i in c) for c in cells]
    lines.append(f"CELL_TYPES {len(cells)}")
    lines += ["9"] * len(cells)
    lines.append(f"POINT_DATA {n}")
    for name, arr in (("V", V), ("phi", phi[0]), ("mu", mu[0]), ("q", q[0]), ("p", p[0]),
                      ("fluid_mask", mask)):
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [_fmt(v) for v in arr]
    lines.append("VECTORS u double")
    lines += [f"{_fmt(a)} {_fmt(b)} 0" for a, b in zip(u[0], u[1])]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


class SeriesWriter:
    """CSV with one row per step, full-precision scientific notation."""

    def __init__(self, path):
        self._fh = open(path, "w", newline="", encoding="ascii")
        self._w = csv.writer(self._fh)
        self._w.writerow(CSV_COLUMNS)

    def write(self, row: dict) -> None:
        out = []
        for c in CSV_COLUMNS:
            v = row[c]
            if c in ("step", "droplet_count") or c.startswith("it_") or c == "picard_iterations":
                out.append(str(int(v)))
            else:
                out.append("nan" if math.isnan(v) else "%.17e" % v)
        self._w.writerow(out)

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
