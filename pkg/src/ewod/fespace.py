"""Lagrange Q1/Q2 spaces on the structured mesh and bilinear-form assembly.

Every cell is an axis-aligned rectangle, so the reference map is
``x = x0 + hx * s, y = y0 + hy * t`` and gradients scale by ``1/hx, 1/hy``.
Degrees of freedom live on a lattice refined ``degree`` times in each
direction over the rows of the support. Vector spaces use block layout:
all x-components first, then all y-components.

Coefficients accepted by the assembly routines are a constant, an array of
quadrature-point values with shape ``(n_cells, n_qp)``, or a callable
``f(x, y)`` evaluated at the physical quadrature points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .la import CsrMatrix
from .mesh import FacetTag, Mesh, Region


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # (Q, 2) on the unit square
    weights: np.ndarray  # (Q,)
    edge_points: np.ndarray  # (E,) on [0, 1]
    edge_weights: np.ndarray  # (E,)

    @classmethod
    def gauss(cls, n: int = 3) -> "QuadratureRule":
        x, w = np.polynomial.legendre.leggauss(n)
        x, w = 0.5 * (x + 1.0), 0.5 * w
        # s varies fastest to match the dof ordering
        S, T = np.meshgrid(x, x)
        WS, WT = np.meshgrid(w, w)
        return cls(np.column_stack([S.ravel(), T.ravel()]), (WS * WT).ravel(), x, w)


def lagrange_1d(degree: int, t):
    """Values and derivatives of the 1D Lagrange basis on equispaced nodes of [0, 1]."""
    t = np.asarray(t, dtype=float)
    if degree == 1:
        v = np.stack([1.0 - t, t], axis=-1)
        d = np.stack([-np.ones_like(t), np.ones_like(t)], axis=-1)
    elif degree == 2:
        v = np.stack([(2 * t - 1) * (t - 1), 4 * t * (1 - t), t * (2 * t - 1)], axis=-1)
        d = np.stack([4 * t - 3, 4 - 8 * t, 4 * t - 1], axis=-1)
    else:
        raise ValueError(f"unsupported degree {degree}")
    return v, d


def _tensor_basis(degree: int, pts):
    vs, ds = lagrange_1d(degree, pts[:, 0])
    vt, dt = lagrange_1d(degree, pts[:, 1])
    # local index = b * (k + 1) + a
    N = np.einsum("qb,qa->qba", vt, vs).reshape(len(pts), -1)
    Ns = np.einsum("qb,qa->qba", vt, ds).reshape(len(pts), -1)
    Nt = np.einsum("qb,qa->qba", dt, vs).reshape(len(pts), -1)
    return N, np.stack([Ns, Nt], axis=-1)


def _edge_points(e: int, s):
    s = np.asarray(s, dtype=float)
    one, zero = np.ones_like(s), np.zeros_like(s)
    return np.column_stack([(s, zero), (one, s), (1 - s, one), (zero, 1 - s)][e])


def tangent_of(normal) -> np.ndarray:
    """Counter-clockwise unit tangent for an outward normal."""
    normal = np.asarray(normal, dtype=float)
    return np.stack([-normal[..., 1], normal[..., 0]], axis=-1)


class FeSpace:
    """Continuous Q``degree`` space on the rows of ``support`` (``None`` = all cells)."""

    def __init__(self, mesh: Mesh, degree: int, support: Region | None = None,
                 components: int = 1, rule: QuadratureRule | None = None):
        if degree not in (1, 2) or components not in (1, 2):
            raise ValueError("degree must be 1 or 2 and components 1 or 2")
        self.mesh, self.degree, self.support, self.components = mesh, degree, support, components
        self.rule = rule or QuadratureRule.gauss(3)
        k, nx = degree, mesh.nx
        self.rows = mesh.fluid_rows if support == Region.FLUID else (0, mesh.ny)
        j0, j1 = self.rows
        self.cells = np.arange(j0 * nx, j1 * nx)
        self.n_cells = self.cells.size
        self.lx, self.ly = k * nx + 1, k * (j1 - j0) + 1
        self.n_scalar = self.lx * self.ly
        self.n_dofs = components * self.n_scalar
        ci, cj = mesh.cell_i[self.cells], mesh.cell_j[self.cells] - j0
        a = np.arange(k + 1)
        B, A = np.meshgrid(a, a, indexing="ij")
        self.scalar_dofmap = ((k * cj[:, None] + B.ravel()) * self.lx + k * ci[:, None] + A.ravel())
        self.dofmap = np.hstack([self.scalar_dofmap + c * self.n_scalar for c in range(components)])
        gx, gy = mesh.xs, mesh.ys[j0:j1 + 1]
        if k == 2:
            gx, gy = _refine(gx), _refine(gy)
        X, Y = np.meshgrid(gx, gy)
        self.coords = np.column_stack([X.ravel(), Y.ravel()])
        self.h = mesh.cell_size[self.cells]
        self.origin = mesh.nodes[mesh.cells[self.cells, 0]]
        self.N, self.dN = _tensor_basis(k, self.rule.points)
        self.edge_N, self.edge_dN = zip(*(_tensor_basis(k, _edge_points(e, self.rule.edge_points))
                                          for e in range(4)))
        self._patterns: dict = {}

    # -- bookkeeping ---------------------------------------------------------
    @property
    def n_local(self) -> int:
        return self.scalar_dofmap.shape[1]

    @property
    def n_qp(self) -> int:
        return self.rule.weights.size

    def positions(self, cells=None) -> np.ndarray:
        """Positions in ``self.cells`` of the given mesh cells."""
        if cells is None:
            return np.arange(self.n_cells)
        cells = np.asarray(cells)
        pos = cells - self.cells[0]
        if np.any(pos < 0) or np.any(pos >= self.n_cells):
            raise ValueError("cells outside the support of the space")
        return pos

    def jxw(self, cells=None) -> np.ndarray:
        h = self.h[self.positions(cells)]
        return (h[:, 0] * h[:, 1])[:, None] * self.rule.weights[None, :]

    def qp_coords(self, cells=None) -> np.ndarray:
        p = self.positions(cells)
        return self.origin[p, None, :] + self.h[p, None, :] * self.rule.points[None, :, :]

    def grad_basis(self, cells=None) -> np.ndarray:
        """Physical gradients of the scalar basis, shape ``(C, Q, n_local, 2)``."""
        h = self.h[self.positions(cells)]
        return self.dN[None, :, :, :] / h[:, None, None, :]

    def component_dofs(self, c: int) -> np.ndarray:
        return np.arange(c * self.n_scalar, (c + 1) * self.n_scalar)

    def boundary_dofs(self, tag: FacetTag = FacetTag.GAMMA) -> np.ndarray:
        """Scalar dofs lying on facets with ``tag``."""
        f = self.mesh.facets(tag)
        return np.unique(self.facet_dofs(f)) if f.size else np.zeros(0, dtype=np.int64)

    def facet_dofs(self, facets) -> np.ndarray:
        k = self.degree
        pos = self.positions(self.mesh.facet_cell[facets])
        loc = {0: [a for a in range(k + 1)],
               1: [b * (k + 1) + k for b in range(k + 1)],
               2: [k * (k + 1) + a for a in range(k + 1)],
               3: [b * (k + 1) for b in range(k + 1)]}
        idx = np.array([loc[e] for e in self.mesh.facet_edge[facets]])
        return np.take_along_axis(self.scalar_dofmap[pos], idx, axis=1)

    def normal_constrained_dofs(self) -> np.ndarray:
        """Vector dofs whose normal component vanishes on GAMMA (both at corners)."""
        if self.components != 2:
            raise ValueError("only vector spaces carry normal constraints")
        f = self.mesh.facets(FacetTag.GAMMA)
        n = self.mesh.facet_normal[f]
        fd = self.facet_dofs(f)
        comp = np.where(np.abs(n[:, 0]) > 0.5, 0, 1)
        return np.unique((fd + comp[:, None] * self.n_scalar).ravel())

    # -- evaluation ------------------------------------------------------------
    def _split(self, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (self.n_dofs,):
            raise ValueError(f"expected {self.n_dofs} coefficients, got {coeffs.shape}")
        return coeffs.reshape(self.components, self.n_scalar)

    def values(self, coeffs, cells=None) -> np.ndarray:
        """Values at quadrature points: ``(C, Q)`` or ``(C, Q, 2)`` for vectors."""
        u = self._split(coeffs)
        loc = u[:, self.scalar_dofmap[self.positions(cells)]]  # (comp, C, nl)
        out = np.einsum("kcl,ql->cqk", loc, self.N)
        return out[..., 0] if self.components == 1 else out

    def gradients(self, coeffs, cells=None) -> np.ndarray:
        """Gradients at quadrature points: ``(C, Q, 2)`` or ``(C, Q, 2, 2)`` [component, direction]."""
        u = self._split(coeffs)
        loc = u[:, self.scalar_dofmap[self.positions(cells)]]
        out = np.einsum("kcl,cqld->cqkd", loc, self.grad_basis(cells))
        return out[..., 0, :] if self.components == 1 else out

    def facet_geometry(self, facets):
        """Quadrature points ``(F, E, 2)`` and weights ``(F, E)`` on the given facets."""
        m = self.mesh
        pos = self.positions(m.facet_cell[facets])
        e = m.facet_edge[facets]
        ref = np.stack([_edge_points(k, self.rule.edge_points) for k in range(4)])[e]
        pts = self.origin[pos, None, :] + self.h[pos, None, :] * ref
        length = np.where(e % 2 == 0, self.h[pos, 0], self.h[pos, 1])
        return pts, length[:, None] * self.rule.edge_weights[None, :]

    def _facet_basis(self, facets):
        e = self.mesh.facet_edge[facets]
        N = np.stack(self.edge_N)[e]  # (F, E, nl)
        pos = self.positions(self.mesh.facet_cell[facets])
        dN = np.stack(self.edge_dN)[e] / self.h[pos, None, None, :]
        return N, dN

    def facet_values(self, coeffs, facets) -> np.ndarray:
        u = self._split(coeffs)
        pos = self.positions(self.mesh.facet_cell[facets])
        N, _ = self._facet_basis(facets)
        out = np.einsum("kfl,fel->fek", u[:, self.scalar_dofmap[pos]], N)
        return out[..., 0] if self.components == 1 else out

    def facet_gradients(self, coeffs, facets) -> np.ndarray:
        if self.components != 1:
            raise ValueError("facet gradients are implemented for scalar spaces")
        u = self._split(coeffs)[0]
        pos = self.positions(self.mesh.facet_cell[facets])
        _, dN = self._facet_basis(facets)
        return np.einsum("fl,feld->fed", u[self.scalar_dofmap[pos]], dN)

    # -- assembly plumbing -----------------------------------------------------
    def _pattern(self, trial: "FeSpace"):
        key = id(trial)
        if key not in self._patterns:
            if not np.array_equal(self.cells, trial.cells):
                raise ValueError("test and trial spaces must share their cells")
            nt, ns = self.dofmap.shape[1], trial.dofmap.shape[1]
            rows = np.repeat(self.dofmap[:, :, None], ns, axis=2).ravel()
            cols = np.repeat(trial.dofmap[:, None, :], nt, axis=1).ravel()
            keys = rows * trial.n_dofs + cols
            uniq, inv = np.unique(keys, return_inverse=True)
            offsets = np.zeros(self.n_dofs + 1, dtype=np.int64)
            np.cumsum(np.bincount(uniq // trial.n_dofs, minlength=self.n_dofs), out=offsets[1:])
            self._patterns[key] = (offsets, uniq % trial.n_dofs, inv.reshape(self.n_cells, nt, ns))
        return self._patterns[key]

    def scatter(self, elem, trial: "FeSpace | None" = None, positions=None) -> CsrMatrix:
        """Sum element matrices ``(C, nt, ns)`` into a CSR matrix on the cached pattern."""
        trial = trial or self
        offsets, cols, inv = self._pattern(trial)
        idx = inv if positions is None else inv[positions]
        vals = np.bincount(idx.ravel(), weights=np.asarray(elem).ravel(), minlength=cols.size)
        return CsrMatrix(self.n_dofs, trial.n_dofs, offsets, cols, vals)

    def scatter_vector(self, elem, positions=None) -> np.ndarray:
        dm = self.dofmap if positions is None else self.dofmap[positions]
        return np.bincount(dm.ravel(), weights=np.asarray(elem).ravel(), minlength=self.n_dofs)

    def coefficient(self, coeff, cells=None) -> np.ndarray:
        """Quadrature-point array for a constant, array or callable coefficient."""
        p = self.positions(cells)
        if callable(coeff):
            x = self.qp_coords(cells)
            return np.broadcast_to(np.asarray(coeff(x[..., 0], x[..., 1]), dtype=float),
                                   (p.size, self.n_qp)).copy()
        c = np.asarray(coeff, dtype=float)
        if c.ndim == 0:
            return np.full((p.size, self.n_qp), float(c))
        if c.shape != (p.size, self.n_qp):
            raise ValueError(f"coefficient shape {c.shape} does not match {(p.size, self.n_qp)}")
        return c

    def __repr__(self) -> str:
        sup = "ALL" if self.support is None else self.support.name
        return f"FeSpace(Q{self.degree}^{self.components} on {sup}, {self.n_dofs} dofs)"


def _refine(v):
    out = np.empty(2 * v.size - 1)
    out[0::2] = v
    out[1::2] = 0.5 * (v[:-1] + v[1:])
    return out


def _blockdiag(elem, comps):
    if comps == 1:
        return elem
    C, n, m = elem.shape
    out = np.zeros((C, comps * n, comps * m))
    for c in range(comps):
        out[:, c * n:(c + 1) * n, c * m:(c + 1) * m] = elem
    return out


# -- bilinear forms ------------------------------------------------------------

def assemble_mass(space: FeSpace, coeff=1.0, trial: FeSpace | None = None) -> CsrMatrix:
    """``M_ij = int coeff phi_i phi_j`` (componentwise for vector spaces)."""
    trial = trial or space
    w = space.coefficient(coeff) * space.jxw()
    elem = np.einsum("cq,qa,qb->cab", w, space.N, trial.N)
    return space.scatter(_blockdiag(elem, space.components), trial)


def assemble_stiffness(space: FeSpace, coeff=1.0) -> CsrMatrix:
    """``A_ij = int coeff grad phi_i . grad phi_j``."""
    w = space.coefficient(coeff) * space.jxw()
    G = space.grad_basis()
    elem = np.einsum("cq,cqad,cqbd->cab", w, G, G)
    return space.scatter(_blockdiag(elem, space.components))


def assemble_convection(space: FeSpace, wind, form: str = "grad") -> CsrMatrix:
    """Convection with frozen ``wind`` given at quadrature points ``(C, Q, 2)``.

    ``grad``: ``int (w . grad u) v``.
    ``skew``: ``1/2 int (w . grad u) v - 1/2 int (w . grad v) u``, antisymmetric
    by construction. For ``w . n = 0`` on the boundary it equals the
    ``(w . grad u) v + 1/2 div(w) u v`` form.
    """
    if form not in ("grad", "skew"):
        raise ValueError(f"unknown convection form {form!r}")
    wind = np.asarray(wind, dtype=float)
    G = space.grad_basis()
    jw = space.jxw()
    adv = np.einsum("cqd,cqbd->cqb", wind, G)  # w . grad phi_b
    elem = np.einsum("cq,qa,cqb->cab", jw, space.N, adv)
    if form == "skew":
        elem = 0.5 * (elem - elem.transpose(0, 2, 1))
    return space.scatter(_blockdiag(elem, space.components))


def assemble_boundary_mass(space: FeSpace, tag: FacetTag = FacetTag.GAMMA, coeff=1.0) -> CsrMatrix:
    """``B_ij = int_facets coeff phi_i phi_j``; tangential components for vector spaces.

    ``coeff`` is a constant, a ``(F, E)`` array over ``mesh.facets(tag)``, or ``f(x, y)``.
    """
    m = space.mesh
    f = m.facets(tag)
    pts, wts = space.facet_geometry(f)
    if callable(coeff):
        c = np.asarray(coeff(pts[..., 0], pts[..., 1]), dtype=float)
    else:
        c = np.broadcast_to(np.asarray(coeff, dtype=float), wts.shape)
    N, _ = space._facet_basis(f)
    elem = np.einsum("fe,fea,feb->fab", c * wts, N, N)
    pos = space.positions(m.facet_cell[f])
    if space.components == 2:
        tcomp = np.where(np.abs(m.facet_normal[f][:, 0]) > 0.5, 1, 0)
        nl = space.n_local
        full = np.zeros((f.size, 2 * nl, 2 * nl))
        for comp in (0, 1):
            sel = tcomp == comp
            full[sel, comp * nl:(comp + 1) * nl, comp * nl:(comp + 1) * nl] = elem[sel]
        elem = full
    return space.scatter(elem, positions=pos)


def assemble_divergence(vel: FeSpace, pres: FeSpace) -> CsrMatrix:
    """``B_ij = int q_i div(phi_j)``: pressure rows, velocity columns."""
    if vel.components != 2 or pres.components != 1:
        raise ValueError("expected a vector velocity space and a scalar pressure space")
    G = vel.grad_basis()
    w = vel.jxw()
    elem = np.concatenate([np.einsum("cq,qa,cqb->cab", w, pres.N, G[..., d]) for d in (0, 1)], axis=2)
    return pres.scatter(elem, vel)


def assemble_viscous(space: FeSpace, coeff=1.0) -> CsrMatrix:
    """``A_ij = int coeff S(phi_j) : S(phi_i)`` with ``S`` the symmetric gradient."""
    if space.components != 2:
        raise ValueError("viscous form needs a vector space")
    w = space.coefficient(coeff) * space.jxw()
    G = space.grad_basis()
    gx, gy = G[..., 0], G[..., 1]
    xx = np.einsum("cq,cqa,cqb->cab", w, gx, gx)
    yy = np.einsum("cq,cqa,cqb->cab", w, gy, gy)
    xy = np.einsum("cq,cqa,cqb->cab", w, gx, gy)  # d/dx test, d/dy trial
    nl = space.n_local
    elem = np.zeros((space.n_cells, 2 * nl, 2 * nl))
    # S:S = ux,x wx,x + uy,y wy,y + 1/2 (ux,y + uy,x)(wx,y + wy,x)
    elem[:, :nl, :nl] = xx + 0.5 * yy
    elem[:, nl:, nl:] = yy + 0.5 * xx
    elem[:, :nl, nl:] = 0.5 * np.einsum("cq,cqa,cqb->cab", w, gy, gx)
    elem[:, nl:, :nl] = 0.5 * xy
    return space.scatter(elem)


# -- linear forms ---------------------------------------------------------------

def assemble_load(space: FeSpace, f, cells=None) -> np.ndarray:
    """``b_i = int f . phi_i`` over ``cells`` (default: the whole support).

    ``f`` holds quadrature-point values, ``(C, Q)`` or ``(C, Q, 2)`` for vectors.
    """
    pos = space.positions(cells)
    w = space.jxw(cells)
    f = np.asarray(f, dtype=float)
    if space.components == 1:
        elem = np.einsum("cq,qa->ca", space.coefficient(f, cells) * w, space.N)
    else:
        elem = np.concatenate([np.einsum("cq,qa->ca", f[..., d] * w, space.N) for d in (0, 1)], axis=1)
    return space.scatter_vector(elem, pos)


def assemble_load_grad(space: FeSpace, g, cells=None) -> np.ndarray:
    """``b_i = int g . grad phi_i`` for a scalar space and vector data ``(C, Q, 2)``."""
    pos = space.positions(cells)
    w = space.jxw(cells)
    elem = np.einsum("cq,cqd,cqad->ca", w, np.asarray(g, dtype=float), space.grad_basis(cells))
    return space.scatter_vector(elem, pos)


def assemble_load_div(vel: FeSpace, p) -> np.ndarray:
    """``b_i = int p div(phi_i)`` with ``p`` at quadrature points ``(C, Q)``."""
    G = vel.grad_basis()
    w = vel.jxw() * np.asarray(p, dtype=float)
    elem = np.concatenate([np.einsum("cq,cqa->ca", w, G[..., d]) for d in (0, 1)], axis=1)
    return vel.scatter_vector(elem)


def assemble_boundary_load(space: FeSpace, g, tag: FacetTag = FacetTag.GAMMA) -> np.ndarray:
    """``b_i = int_facets g phi_i``; for vector spaces ``g`` multiplies the tangential component."""
    m = space.mesh
    f = m.facets(tag)
    _, wts = space.facet_geometry(f)
    N, _ = space._facet_basis(f)
    elem = np.einsum("fe,fea->fa", np.broadcast_to(np.asarray(g, dtype=float), wts.shape) * wts, N)
    pos = space.positions(m.facet_cell[f])
    if space.components == 2:
        t = tangent_of(m.facet_normal[f])
        elem = np.concatenate([elem * t[:, 0:1], elem * t[:, 1:2]], axis=1)
    return space.scatter_vector(elem, pos)


def tangential_trace(space: FeSpace, coeffs, tag: FacetTag = FacetTag.GAMMA) -> np.ndarray:
    """``u . t`` at facet quadrature points, ``t`` the counter-clockwise tangent."""
    f = space.mesh.facets(tag)
    u = space.facet_values(coeffs, f)
    t = tangent_of(space.mesh.facet_normal[f])
    return np.einsum("fek,fk->fe", u, t)


def assemble_tangential_boundary(space: FeSpace, coeff, tag: FacetTag = FacetTag.GAMMA) -> CsrMatrix:
    """``int_facets coeff (u . t)(w . t)``; identical to the tangential boundary mass."""
    return assemble_boundary_mass(space, tag, coeff)


# -- interpolation and integration --------------------------------------------------

def interpolate(space: FeSpace, f) -> np.ndarray:
    """Nodal interpolant of ``f(x, y)`` (vector spaces: ``f`` returns a pair)."""
    x, y = space.coords[:, 0], space.coords[:, 1]
    if space.components == 1:
        return np.broadcast_to(np.asarray(f(x, y), dtype=float), (space.n_scalar,)).copy()
    fx, fy = f(x, y)
    return np.concatenate([np.broadcast_to(np.asarray(fx, dtype=float), (space.n_scalar,)),
                           np.broadcast_to(np.asarray(fy, dtype=float), (space.n_scalar,))])


def integrate(space: FeSpace, coeffs=None, integrand: str = "value", cells=None) -> float:
    """Integrate a derived quantity of a finite-element function over ``cells``.

    ``integrand`` is one of ``value`` (scalar spaces), ``square``, ``grad_square``,
    ``grad_norm`` or ``one``.
    """
    w = space.jxw(cells)
    if integrand == "one":
        return float(w.sum())
    if integrand == "value":
        if space.components != 1:
            raise ValueError("'value' needs a scalar space")
        q = space.values(coeffs, cells)
    elif integrand == "square":
        v = space.values(coeffs, cells)
        q = v ** 2 if space.components == 1 else (v ** 2).sum(-1)
    elif integrand in ("grad_square", "grad_norm"):
        g = space.gradients(coeffs, cells)
        s = (g ** 2).sum(-1) if space.components == 1 else (g ** 2).sum((-1, -2))
        q = s if integrand == "grad_square" else np.sqrt(s)
    else:
        raise ValueError(f"unknown integrand {integrand!r}")
    return float((q * w).sum())


def integrate_qp(space: FeSpace, f, cells=None) -> float:
    """Integral of quadrature-point data ``(C, Q)``."""
    return float((np.asarray(f) * space.jxw(cells)).sum())


def lumped_mass(space: FeSpace) -> np.ndarray:
    """Row sums of the mass matrix, i.e. ``int phi_i``."""
    return assemble_load(space, np.ones((space.n_cells, space.n_qp)))


def interpolation_matrix(source: FeSpace, target: FeSpace) -> CsrMatrix:
    """Matrix mapping coefficients of ``source`` to nodal values in ``target``.

    Used to restrict the all-cells Q1 voltage to the fluid Q2 space (exact,
    since Q1 is contained in Q2 cell by cell).
    """
    if source.components != 1 or target.components != 1:
        raise ValueError("scalar spaces only")
    m = source.mesh
    ix = np.clip(np.searchsorted(m.xs, target.coords[:, 0], side="right") - 1, 0, m.nx - 1)
    jy = np.clip(np.searchsorted(m.ys, target.coords[:, 1], side="right") - 1,
                 source.rows[0], source.rows[1] - 1)
    jy = np.clip(jy, target.rows[0], target.rows[1] - 1) if target.support is not None else jy
    cells = jy * m.nx + ix
    pos = source.positions(cells)
    ref = (target.coords - source.origin[pos]) / source.h[pos]
    vs, _ = lagrange_1d(source.degree, ref[:, 0])
    vt, _ = lagrange_1d(source.degree, ref[:, 1])
    vals = np.einsum("nb,na->nba", vt, vs).reshape(len(cells), -1)
    rows = np.repeat(np.arange(target.n_scalar), vals.shape[1])
    A = CsrMatrix.from_coo(rows, source.scalar_dofmap[pos].ravel(), vals.ravel(),
                           (target.n_scalar, source.n_scalar))
    return A.with_values(np.where(np.abs(A.values) < 1e-14, 0.0, A.values))


@dataclass
class Spaces:
    """The four spaces of the scheme: voltage, scalar fluid fields, velocity, pressure."""

    W: FeSpace
    Q: FeSpace
    X: FeSpace
    P: FeSpace

    @classmethod
    def for_mesh(cls, mesh: Mesh) -> "Spaces":
        return cls(FeSpace(mesh, 1), FeSpace(mesh, 2, Region.FLUID),
                   FeSpace(mesh, 2, Region.FLUID, components=2), FeSpace(mesh, 1, Region.FLUID))
