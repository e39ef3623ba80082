import numpy as np
import pytest
import scipy.linalg
import sympy as sy
from hypothesis import given, settings
from hypothesis import strategies as st

from ewod import fespace as fe
from ewod.mesh import FacetTag, Mesh, Region, build_channel_mesh, refine_uniform

from conftest import move_geometry

X, Y = sy.symbols("x y")


def sympy_basis(degree, hx, hy):
    """Tensor Lagrange basis on [0,hx]x[0,hy], ordered x-fastest."""
    def lag(nodes, s):
        out = []
        for i, ni in enumerate(nodes):
            p = sy.Integer(1)
            for j, nj in enumerate(nodes):
                if j != i:
                    p *= (s - nj) / (ni - nj)
            out.append(sy.expand(p))
        return out
    t = [sy.Rational(k, degree) for k in range(degree + 1)]
    bx = lag([hx * k for k in t], X)
    by = lag([hy * k for k in t], Y)
    return [bx[a] * by[b] for b in range(degree + 1) for a in range(degree + 1)]


def sympy_matrix(degree, hx, hy, form):
    B = sympy_basis(degree, hx, hy)
    n = len(B)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if form == "mass":
                e = B[i] * B[j]
            else:
                e = sy.diff(B[i], X) * sy.diff(B[j], X) + sy.diff(B[i], Y) * sy.diff(B[j], Y)
            out[i, j] = float(sy.integrate(e, (X, 0, hx), (Y, 0, hy)))
    return out


def unit_square(degree=1, components=1):
    return fe.FeSpace(Mesh.from_coordinates([0.0, 1.0], [0.0, 1.0]), degree, components=components)


def fluid_mesh(nx=4, ny=4):
    return Mesh.from_coordinates(np.linspace(0, 1, nx + 1), np.linspace(0, 1, ny + 1))


# -- element matrices ---------------------------------------------------------------

def test_q1_mass_unit_square():
    M = fe.assemble_mass(unit_square()).to_dense()
    assert np.allclose(np.diag(M), 1 / 9)
    assert np.isclose(M[0, 1], 1 / 18) and np.isclose(M[0, 2], 1 / 18)  # edge neighbours (x-fastest)
    assert np.isclose(M[0, 3], 1 / 36)
    assert np.isclose(M.sum(), 1.0)
    assert np.allclose(fe.assemble_mass(unit_square(), 0.0).to_dense(), 0.0)


def test_q1_stiffness_unit_square():
    A = fe.assemble_stiffness(unit_square()).to_dense()
    assert np.allclose(np.diag(A), 2 / 3)
    assert np.isclose(A[0, 1], -1 / 6) and np.isclose(A[0, 3], -1 / 3)
    assert np.allclose(A.sum(axis=1), 0.0)
    assert np.allclose(fe.assemble_stiffness(unit_square(), 2.5).to_dense(), 2.5 * A)


@pytest.mark.parametrize("degree", [1, 2])
@pytest.mark.parametrize("form", ["mass", "stiffness"])
def test_element_matrices_match_symbolic(degree, form):
    hx, hy = sy.Rational(2), sy.Rational(1, 2)
    m = Mesh.from_coordinates([1.0, 3.0], [0.25, 0.75])
    S = fe.FeSpace(m, degree)
    A = (fe.assemble_mass(S) if form == "mass" else fe.assemble_stiffness(S)).to_dense()
    assert np.allclose(A, sympy_matrix(degree, hx, hy, form), rtol=1e-12, atol=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5))
def test_mass_sum_is_integral(a, b, c):
    Q = fe.FeSpace(fluid_mesh(3, 2), 2)
    coeff = lambda x, y: a + b * x + c * y * y
    M = fe.assemble_mass(Q, coeff).to_dense()
    exact = a + b / 2 + c / 3
    assert np.isclose(M.sum(), exact, atol=1e-12)


def test_edge_mass():
    S = unit_square()
    B = fe.assemble_boundary_mass(S, FacetTag.GAMMA, lambda x, y: (y == 0.0).astype(float)).to_dense()
    assert np.allclose(B[:2, :2], [[1 / 3, 1 / 6], [1 / 6, 1 / 3]])
    assert np.allclose(B[2:, :], 0.0)
    full = fe.assemble_boundary_mass(S).to_dense()
    assert np.isclose(full.sum(), 4.0)
    assert np.allclose(fe.assemble_boundary_mass(S, coeff=0.0).to_dense(), 0.0)


# -- convection ---------------------------------------------------------------------

def test_convection_zero_wind_and_bad_form():
    Q = fe.FeSpace(fluid_mesh(), 2)
    assert np.allclose(fe.assemble_convection(Q, np.zeros((Q.n_cells, Q.n_qp, 2))).to_dense(), 0.0)
    with pytest.raises(ValueError):
        fe.assemble_convection(Q, np.zeros((Q.n_cells, Q.n_qp, 2)), "upwind")


def test_skew_form_identity(rng):
    """Skew form is antisymmetric and equals grad + 1/2 div form when w.n = 0 (exact on Q1)."""
    S = fe.FeSpace(fluid_mesh(), 1)
    xq = S.qp_coords()
    x, y = xq[..., 0], xq[..., 1]
    wind = np.stack([x * (1 - x), y * (1 - y)], axis=-1)
    C = fe.assemble_convection(S, wind, "skew").to_dense()
    for _ in range(5):
        v = rng.standard_normal(S.n_dofs)
        assert abs(v @ C @ v) < 1e-13 * (v @ v)
    G = fe.assemble_convection(S, wind, "grad").to_dense()
    D = fe.assemble_mass(S, (1 - 2 * x) + (1 - 2 * y)).to_dense()
    assert np.allclose(C, G + 0.5 * D, atol=1e-14)


def test_grad_form_of_x_gives_lumped_mass():
    Q = fe.FeSpace(fluid_mesh(), 2)
    wind = np.zeros((Q.n_cells, Q.n_qp, 2))
    wind[..., 0] = 1.0
    C = fe.assemble_convection(Q, wind, "grad")
    phi = fe.interpolate(Q, lambda x, y: x)
    assert np.allclose(C @ phi, fe.lumped_mass(Q), atol=1e-14)


# -- divergence and viscous ---------------------------------------------------------

def taylor_hood(nx=4, ny=4):
    m = fluid_mesh(nx, ny)
    return fe.FeSpace(m, 2, components=2), fe.FeSpace(m, 1)


def test_divergence_examples():
    Xs, P = taylor_hood()
    B = fe.assemble_divergence(Xs, P)
    assert np.allclose(B @ fe.interpolate(Xs, lambda x, y: (np.ones_like(x), 2 * np.ones_like(x))), 0)
    assert np.allclose(B @ fe.interpolate(Xs, lambda x, y: (x, -y)), 0.0, atol=1e-14)
    assert np.allclose(B @ fe.interpolate(Xs, lambda x, y: (x, 0 * x)), fe.lumped_mass(P))


def test_viscous_rigid_motion_and_shear():
    Xs, _ = taylor_hood()
    A = fe.assemble_viscous(Xs, 3.0)
    rot = fe.interpolate(Xs, lambda x, y: (-y, x))
    assert np.allclose(A @ rot, 0.0, atol=1e-13)
    shear = fe.interpolate(Xs, lambda x, y: (y, 0 * x))
    assert np.isclose(shear @ (A @ shear), 3.0 * 0.5)  # S:S = 1/2
    assert np.allclose(A.to_dense(), A.to_dense().T)


# -- interpolation, integration and patch tests -----------------------------------

def test_interpolate_and_integrate():
    Q = fe.FeSpace(build_channel_mesh(move_geometry(), 10, 2, 1), 2, Region.FLUID)
    c = fe.interpolate(Q, lambda x, y: 3.0)
    assert np.all(c == 3.0) and np.isclose(fe.integrate(Q, c), 30.0)
    x = fe.interpolate(Q, lambda x, y: x)
    assert abs(fe.integrate(Q, x)) < 1e-13
    assert np.isclose(fe.integrate(Q, x, "grad_square"), 10.0)
    assert np.isclose(fe.integrate(Q, None, "one"), 10.0)


@pytest.mark.parametrize("degree", [1, 2])
def test_patch_reproduction(degree):
    m = Mesh.from_coordinates([0.0, 0.3, 1.0, 1.2], [0.0, 0.5, 0.6])
    S = fe.FeSpace(m, degree)
    f = (lambda x, y: 1 + 2 * x - y) if degree == 1 else (lambda x, y: x * x - 3 * x * y + y * y)
    u = fe.interpolate(S, f)
    xq = S.qp_coords()
    assert np.allclose(S.values(u), f(xq[..., 0], xq[..., 1]), atol=1e-13)
    # affine field: stiffness action vanishes at interior dofs
    a = fe.interpolate(S, lambda x, y: 1 + 2 * x - y)
    r = fe.assemble_stiffness(S) @ a
    interior = np.setdiff1d(np.arange(S.n_dofs), S.boundary_dofs())
    assert np.allclose(r[interior], 0.0, atol=1e-13)


@pytest.mark.parametrize("degree", [1, 2])
def test_interpolation_order(degree):
    f = lambda x, y: np.sin(2 * x) * np.cos(3 * y)
    errs, m = [], Mesh.from_coordinates(np.linspace(0, 1, 5), np.linspace(0, 1, 5))
    for _ in range(3):
        S = fe.FeSpace(m, degree)
        u = fe.interpolate(S, f)
        xq = S.qp_coords()
        errs.append(np.sqrt(fe.integrate_qp(S, (S.values(u) - f(xq[..., 0], xq[..., 1])) ** 2)))
        m = refine_uniform(m)
    rates = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(rates >= degree + 0.9), rates


def test_compatibility_q1_in_q2():
    S = fe.Spaces.for_mesh(build_channel_mesh(move_geometry(), 6, 2, 2))
    I = fe.interpolation_matrix(S.W, S.Q)
    V = fe.interpolate(S.W, lambda x, y: 1 + x * y - 2 * y)
    assert np.allclose(I @ V, fe.interpolate(S.Q, lambda x, y: 1 + x * y - 2 * y), atol=1e-13)


def test_normal_constraint(rng):
    S = fe.Spaces.for_mesh(build_channel_mesh(move_geometry(), 6, 3, 1))
    Xs = S.X
    u = rng.standard_normal(Xs.n_dofs)
    u[Xs.normal_constrained_dofs()] = 0.0
    f = Xs.mesh.facets(FacetTag.GAMMA)
    un = np.einsum("fek,fk->fe", Xs.facet_values(u, f), Xs.mesh.facet_normal[f])
    assert np.max(np.abs(un)) < 1e-14
    # corners: both components pinned
    corner = np.flatnonzero(np.all(np.isclose(np.abs(Xs.coords - [0, 0.5]), [5, 0.5]), axis=1))
    con = set(Xs.normal_constrained_dofs())
    assert all(c in con and c + Xs.n_scalar in con for c in corner)


def inf_sup(nx, ny):
    m = Mesh.from_coordinates(np.linspace(0, 2, nx + 1), np.linspace(0, 1, ny + 1))
    Xs, P = fe.FeSpace(m, 2, components=2), fe.FeSpace(m, 1)
    free = np.setdiff1d(np.arange(Xs.n_dofs), Xs.normal_constrained_dofs())
    A = (fe.assemble_stiffness(Xs) + fe.assemble_mass(Xs)).to_dense()[np.ix_(free, free)]
    B = fe.assemble_divergence(Xs, P).to_dense()[:, free]
    Mp = fe.assemble_mass(P).to_dense()
    w = fe.lumped_mass(P)
    # zero-mean pressure basis
    Z = scipy.linalg.null_space(w[None, :])
    S = Z.T @ B @ np.linalg.solve(A, B.T) @ Z
    lam = scipy.linalg.eigh(S, Z.T @ Mp @ Z, eigvals_only=True)
    return np.sqrt(lam.min())


def test_lbb_sanity():
    b0, b1 = inf_sup(8, 4), inf_sup(16, 8)
    assert b0 > 0.1 and b1 > 0.1
    assert b1 > 0.7 * b0
