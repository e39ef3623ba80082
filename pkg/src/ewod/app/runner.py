"""Run driver: build the problem from a config, march in time, write output."""

from __future__ import annotations

import math
import sys
from pathlib import Path
from typing import TextIO

from ..diagnostics import dissipation_total, energy_law_residual, energy_total, observables
from ..mesh import build_channel_mesh
from ..scheme import Problem, SolverFailure, State, init_state, step
from .config import RunConfig
from .output import SeriesWriter, write_vtk

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4


def build_problem(cfg: RunConfig) -> Problem:
    mesh = build_channel_mesh(cfg.geometry, cfg.nx, cfg.ny_fluid, cfg.ny_plate)
    return Problem(mesh, cfg.material, cfg.scheme, cfg.geometry)


def series_row(pb: Problem, st: State, old: State | None = None, report=None) -> dict:
    E = energy_total(pb, st)
    row = {"step": st.n, "t": st.t}
    row.update({f"E_{k}": v for k, v in E.as_dict().items()})
    if old is None:
        row.update({f"D_{k}": 0.0 for k in ("viscous", "mobility", "ohmic", "slip", "boundary_relax")})
        row["energy_margin"] = math.nan
    else:
        row.update({f"D_{k}": v for k, v in dissipation_total(pb, old, st).as_dict().items()})
        row["energy_margin"] = energy_law_residual(pb, old, st)
    row.update(observables(pb, st))
    its = report.iterations if report is not None else {}
    for k in ("potential", "charge", "phase", "velocity", "pressure"):
        row[f"it_{k}"] = its.get(k, 0)
    row["picard_iterations"] = its.get("picard", 0)
    return row


def simulate(cfg: RunConfig, callback=None) -> tuple[Problem, State, list[dict]]:
    """Run in memory; ``callback(problem, state, row)`` sees every step."""
    pb = build_problem(cfg)
    st = init_state(pb, cfg.droplets, solve_potential=cfg.init_potential)
    rows = [series_row(pb, st)]
    if callback:
        callback(pb, st, rows[-1])
    for _ in range(cfg.steps):
        new, rep = step(pb, st)
        rows.append(series_row(pb, new, st, rep))
        st = new
        if callback:
            callback(pb, st, rows[-1])
    return pb, st, rows


def run(cfg: RunConfig, stderr: TextIO | None = None) -> int:
    """Write ``series.csv`` and ``state_<n>.vtk`` into ``cfg.out``; return the exit status."""
    err = stderr or sys.stderr
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        writer = SeriesWriter(out / "series.csv")
    except OSError as e:
        print(f"error: cannot write output directory {out}: {e}", file=err)
        return EXIT_IO

    def emit(pb, st, row):
        writer.write(row)
        if cfg.vtk_every and st.n % cfg.vtk_every == 0:
            write_vtk(st, pb.mesh, out / f"state_{st.n:04d}.vtk")

    try:
        with writer:
            simulate(cfg, emit)
    except SolverFailure as e:
        print(f"error: {e}", file=err)
        return EXIT_SOLVER
    except OSError as e:
        print(f"error: I/O failure: {e}", file=err)
        return EXIT_IO
    return EXIT_OK
