"""Structured quadrilateral meshes of the channel-plus-plates domain.

The composite domain is a rectangle ``[x_min, x_max] x [y_min, y_max]``. The
fluid channel occupies the rows between ``y_fluid_min`` and ``y_fluid_max``;
the rows below and above are dielectric plates. Cells are axis-aligned
rectangles indexed ``c = j * nx + i`` with counter-clockwise node order
``(i, j), (i+1, j), (i+1, j+1), (i, j+1)``. Local edge ``e`` joins local
nodes ``e`` and ``e + 1``: 0 bottom, 1 right, 2 top, 3 left.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum, IntFlag

import numpy as np


class Region(IntEnum):
    FLUID = 1
    DIELECTRIC = 2


class FacetTag(IntFlag):
    GAMMA = 1  # fluid boundary
    OUTER_DIRICHLET = 2  # electrode side of the outer boundary
    OUTER_NEUMANN = 4  # outer boundary shared with the fluid (channel ends)


EDGE_NORMALS = np.array([[0.0, -1.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])


@dataclass(frozen=True)
class Electrode:
    plate: str
    x0: float
    x1: float
    voltage: float

    def __post_init__(self):
        if self.plate not in ("bottom", "top"):
            raise ValueError(f"electrode plate must be 'bottom' or 'top', got {self.plate!r}")
        if not self.x0 < self.x1:
            raise ValueError(f"empty electrode interval [{self.x0}, {self.x1}]")


@dataclass(frozen=True)
class ChannelGeometry:
    x_min: float = -5.0
    x_max: float = 5.0
    y_fluid_min: float = 0.0
    y_fluid_max: float = 1.0
    plate_thickness: float = 0.5
    electrodes: tuple[Electrode, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "electrodes", tuple(self.electrodes))
        if not self.x_min < self.x_max:
            raise ValueError("degenerate geometry: x_min >= x_max")
        if not self.y_fluid_min < self.y_fluid_max:
            raise ValueError("degenerate geometry: y_fluid_min >= y_fluid_max")
        if not self.plate_thickness > 0:
            raise ValueError("plate_thickness must be positive")
        for plate in ("bottom", "top"):
            segs = sorted((e for e in self.electrodes if e.plate == plate), key=lambda e: e.x0)
            for e in segs:
                if e.x0 < self.x_min or e.x1 > self.x_max:
                    raise ValueError(f"electrode [{e.x0}, {e.x1}] leaves [{self.x_min}, {self.x_max}]")
            for a, b in zip(segs, segs[1:]):
                if b.x0 < a.x1:
                    raise ValueError(f"overlapping electrodes on the {plate} plate")

    @property
    def y_min(self) -> float:
        return self.y_fluid_min - self.plate_thickness

    @property
    def y_max(self) -> float:
        return self.y_fluid_max + self.plate_thickness

    @property
    def fluid_area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_fluid_max - self.y_fluid_min)

    def mirrored(self) -> "ChannelGeometry":
        """Reflection about x = (x_min + x_max)/2."""
        s = self.x_min + self.x_max
        els = tuple(Electrode(e.plate, s - e.x1, s - e.x0, e.voltage) for e in self.electrodes)
        return ChannelGeometry(self.x_min, self.x_max, self.y_fluid_min, self.y_fluid_max,
                               self.plate_thickness, els)


def _electrode_value(geom: ChannelGeometry, plate: str, x: float) -> float:
    segs = sorted((e for e in geom.electrodes if e.plate == plate), key=lambda e: e.x0)
    for k, e in enumerate(segs):
        last = k == len(segs) - 1
        if e.x0 <= x < e.x1 or (last and x == e.x1):
            return e.voltage
    return 0.0


def dirichlet_boundary_value(geom: ChannelGeometry, x) -> float:
    """Boundary voltage at a point of the Dirichlet part of the outer boundary.

    Segments are half-open ``[x0, x1)`` except the rightmost one on each
    plate, which is closed.
    """
    px, py = float(x[0]), float(x[1])
    tol = 1e-12 * max(1.0, geom.x_max - geom.x_min, geom.y_max - geom.y_min)
    in_x = geom.x_min - tol <= px <= geom.x_max + tol
    if in_x and abs(py - geom.y_min) <= tol:
        return _electrode_value(geom, "bottom", px)
    if in_x and abs(py - geom.y_max) <= tol:
        return _electrode_value(geom, "top", px)
    on_side = abs(px - geom.x_min) <= tol or abs(px - geom.x_max) <= tol
    in_plate = (geom.y_min - tol <= py <= geom.y_fluid_min + tol) or (
        geom.y_fluid_max - tol <= py <= geom.y_max + tol)
    if on_side and in_plate:
        return 0.0
    raise ValueError(f"point ({px}, {py}) is not on the Dirichlet boundary")


class Mesh:
    """Tensor-product rectangle mesh with region and facet classification.

    Build with :func:`build_channel_mesh` or :meth:`Mesh.from_coordinates`.
    Treat instances as immutable.
    """

    def __init__(self, xs, ys, y_fluid_min: float, y_fluid_max: float,
                 geometry: ChannelGeometry | None = None):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if xs.ndim != 1 or ys.ndim != 1 or xs.size < 2 or ys.size < 2:
            raise ValueError("need at least two coordinates per direction")
        if np.any(np.diff(xs) <= 0) or np.any(np.diff(ys) <= 0):
            raise ValueError("degenerate geometry: coordinates must be strictly increasing")
        hits = [np.flatnonzero(np.isclose(ys, y, rtol=0, atol=1e-12)) for y in (y_fluid_min, y_fluid_max)]
        if any(h.size != 1 for h in hits):
            raise ValueError("fluid channel limits must coincide with mesh rows")
        self.xs, self.ys = xs, ys
        self.y_fluid_min, self.y_fluid_max = float(y_fluid_min), float(y_fluid_max)
        self.geometry = geometry
        self.nx, self.ny = xs.size - 1, ys.size - 1
        self.fluid_rows = (int(hits[0][0]), int(hits[1][0]))
        if self.fluid_rows[0] >= self.fluid_rows[1]:
            raise ValueError("degenerate geometry: empty fluid channel")
        self._build()

    @classmethod
    def from_coordinates(cls, xs, ys, y_fluid_min=None, y_fluid_max=None, geometry=None) -> "Mesh":
        """Mesh on the tensor grid ``xs x ys``; by default every row is fluid."""
        ys = np.asarray(ys, dtype=float)
        lo = ys[0] if y_fluid_min is None else y_fluid_min
        hi = ys[-1] if y_fluid_max is None else y_fluid_max
        return cls(xs, ys, lo, hi, geometry)

    def _build(self):
        nx, ny = self.nx, self.ny
        X, Y = np.meshgrid(self.xs, self.ys)
        self.nodes = np.column_stack([X.ravel(), Y.ravel()])
        i, j = np.meshgrid(np.arange(nx), np.arange(ny))
        i, j = i.ravel(), j.ravel()
        n0 = j * (nx + 1) + i
        self.cells = np.column_stack([n0, n0 + 1, n0 + nx + 2, n0 + nx + 1])
        self.cell_i, self.cell_j = i, j
        j0, j1 = self.fluid_rows
        fluid = (j >= j0) & (j < j1)
        self.cell_region = np.where(fluid, Region.FLUID, Region.DIELECTRIC).astype(np.int8)
        self.cell_size = np.column_stack([np.diff(self.xs)[i], np.diff(self.ys)[j]])
        self.fluid_cells = np.flatnonzero(fluid)

        cells, edges, tags = [], [], []

        def add(c, e, t):
            cells.append(np.asarray(c))
            edges.append(np.full(np.size(c), e))
            tags.append(np.full(np.size(c), int(t)))

        row = np.arange(nx)
        bottom_fluid, top_fluid = j0 == 0, j1 == ny
        add(row, 0, FacetTag.OUTER_DIRICHLET | (FacetTag.GAMMA if bottom_fluid else 0))
        add((ny - 1) * nx + row, 2, FacetTag.OUTER_DIRICHLET | (FacetTag.GAMMA if top_fluid else 0))
        rows = np.arange(ny)
        side = np.where((rows >= j0) & (rows < j1), FacetTag.GAMMA | FacetTag.OUTER_NEUMANN,
                        FacetTag.OUTER_DIRICHLET)
        for r in rows:
            add([r * nx], 3, side[r])
            add([r * nx + nx - 1], 1, side[r])
        if not bottom_fluid:
            add(j0 * nx + row, 0, FacetTag.GAMMA)
        if not top_fluid:
            add((j1 - 1) * nx + row, 2, FacetTag.GAMMA)
        self.facet_cell = np.concatenate(cells).astype(np.int64)
        self.facet_edge = np.concatenate(edges).astype(np.int64)
        self.facet_tag = np.concatenate(tags).astype(np.int64)
        self.facet_normal = EDGE_NORMALS[self.facet_edge]

    # -- queries ---------------------------------------------------------
    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    @property
    def n_edges(self) -> int:
        return self.nx * (self.ny + 1) + self.ny * (self.nx + 1)

    def cell_area(self) -> np.ndarray:
        return self.cell_size[:, 0] * self.cell_size[:, 1]

    def region_area(self, region: Region) -> float:
        return float(self.cell_area()[self.cell_region == region].sum())

    def facets(self, tag: FacetTag) -> np.ndarray:
        """Indices of facets carrying (at least) ``tag``."""
        return np.flatnonzero(self.facet_tag & int(tag))

    def facet_nodes(self, f) -> np.ndarray:
        c, e = self.facet_cell[f], self.facet_edge[f]
        return np.stack([self.cells[c, e], self.cells[c, (e + 1) % 4]], axis=-1)

    def facet_length(self, f) -> np.ndarray:
        p = self.nodes[self.facet_nodes(f)]
        return np.linalg.norm(p[..., 1, :] - p[..., 0, :], axis=-1)

    def h_min(self) -> float:
        return float(self.cell_size.min())

    def dirichlet_nodes(self) -> np.ndarray:
        return np.unique(self.facet_nodes(self.facets(FacetTag.OUTER_DIRICHLET)))

    def dirichlet_values(self, geom: ChannelGeometry | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Node indices on the Dirichlet boundary and their voltages."""
        geom = geom or self.geometry
        nodes = self.dirichlet_nodes()
        if geom is None:
            return nodes, np.zeros(nodes.size)
        return nodes, np.array([dirichlet_boundary_value(geom, self.nodes[n]) for n in nodes])

    def __repr__(self) -> str:
        return (f"Mesh({self.nx}x{self.ny} cells, fluid rows {self.fluid_rows}, "
                f"{self.facet_tag.size} tagged facets)")


def build_channel_mesh(geom: ChannelGeometry, nx: int, ny_fluid: int, ny_plate: int) -> Mesh:
    if min(nx, ny_fluid, ny_plate) < 1:
        raise ValueError("nx, ny_fluid and ny_plate must be >= 1")
    xs = np.linspace(geom.x_min, geom.x_max, nx + 1)
    yb = np.linspace(geom.y_min, geom.y_fluid_min, ny_plate + 1)
    yf = np.linspace(geom.y_fluid_min, geom.y_fluid_max, ny_fluid + 1)
    yt = np.linspace(geom.y_fluid_max, geom.y_max, ny_plate + 1)
    ys = np.concatenate([yb[:-1], yf, yt[1:]])
    return Mesh(xs, ys, geom.y_fluid_min, geom.y_fluid_max, geom)


def _bisect(v: np.ndarray) -> np.ndarray:
    out = np.empty(2 * v.size - 1)
    out[0::2] = v
    out[1::2] = 0.5 * (v[:-1] + v[1:])
    return out


def refine_uniform(m: Mesh) -> Mesh:
    """Split every cell into four; regions and tags follow the parent cells."""
    return Mesh(_bisect(m.xs), _bisect(m.ys), m.y_fluid_min, m.y_fluid_max, m.geometry)
