"""Time marching for the coupled electrowetting system.

Two modes share the same assembly:

* ``split``: the linear fractional-step sequence potential -> charge ->
  (phase, chemical potential) -> velocity -> pressure increment.
* ``coupled``: the fully discrete nonlinear step solved by Picard iteration
  with Gauss-Seidel sweeps; velocity and pressure are solved together so the
  discrete divergence constraint holds exactly.

Tangential-derivative terms on the wall use ``sgn(d_t phi^n) psi(phi^n)`` in
place of ``d_t phi``, which keeps the weak form independent of the tangent's
orientation (and hence mirror-equivariant).
"""

from __future__ import annotations

import copy
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.sparse.linalg import splu

from . import fespace as fe
from .la import (CsrMatrix, SolverReport, apply_dirichlet, bicgstab_solve, bmat, cg_solve,
                 project_zero_mean)
from .materials import (MaterialParams, double_well, perm_diff_quotient, psi_eval, slip_coefficient,
                        stabilization_bounds, theta_fs)
from .mesh import ChannelGeometry, FacetTag, Mesh

SPLIT, COUPLED = "split", "coupled"


@dataclass
class SchemeParams:
    dt: float = 1e-3
    A_stab: float | None = None  # None -> lower bound from the materials
    B_stab: float | None = None
    mode: str = SPLIT
    picard_tol: float = 1e-10
    picard_max: int = 200
    tol_spd: float = 1e-10
    tol_nonsym: float = 1e-9
    tol_charge: float = 1e-13
    max_iter: int = 20000
    flow: bool = True  # False keeps u = 0
    cfl_c1: float = 0.5
    cfl_c2: float = 0.5

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.mode not in (SPLIT, COUPLED):
            raise ValueError(f"unknown mode {self.mode!r}")

    def stabilization(self, material: MaterialParams) -> tuple[float, float]:
        a_min, b_min = stabilization_bounds(material)
        A = a_min if self.A_stab is None else self.A_stab
        B = b_min if self.B_stab is None else self.B_stab
        if A < a_min or B < b_min - 1e-15:
            warnings.warn(f"stabilization ({A}, {B}) below the bound ({a_min}, {b_min})", stacklevel=3)
        return A, B


@dataclass
class State:
    V: np.ndarray
    q: np.ndarray
    phi: np.ndarray
    mu: np.ndarray
    u: np.ndarray
    p: np.ndarray
    xi: np.ndarray
    t: float = 0.0
    n: int = 0

    FIELDS = ("V", "q", "phi", "mu", "u", "p", "xi")

    def copy(self) -> "State":
        return replace(self, **{k: getattr(self, k).copy() for k in self.FIELDS})

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(getattr(self, k))) for k in self.FIELDS)


@dataclass
class StepReport:
    iterations: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)
    picard_iterations: int = 0
    picard_change: float = 0.0


class SolverFailure(RuntimeError):
    def __init__(self, step: str, report: SolverReport | None = None, n: int | None = None,
                 message: str = ""):
        self.step, self.report, self.n = step, report, n
        detail = message or (f"residual {report.final_residual:.3e} after {report.iterations} iterations"
                             if report else "")
        super().__init__(f"{step} solve failed" + (f" at step {n}" if n is not None else "") + f": {detail}")


# -- droplet primitives --------------------------------------------------------

@dataclass(frozen=True)
class Circle:
    cx: float
    cy: float
    r: float
    sign: int = 1

    def sdf(self, x, y):
        return self.r - np.hypot(x - self.cx, y - self.cy)


@dataclass(frozen=True)
class Ellipse:
    cx: float
    cy: float
    a: float
    b: float
    sign: int = 1
    samples: int = 4096

    def sdf(self, x, y):
        t = np.linspace(0.0, 2.0 * np.pi, self.samples, endpoint=False)
        ex, ey = self.a * np.cos(t), self.b * np.sin(t)
        px, py = np.ravel(x) - self.cx, np.ravel(y) - self.cy
        d = np.empty(px.size)
        for s in range(0, px.size, 512):
            dx = px[s:s + 512, None] - ex[None, :]
            dy = py[s:s + 512, None] - ey[None, :]
            d[s:s + 512] = np.sqrt((dx * dx + dy * dy).min(axis=1))
        inside = (px / self.a) ** 2 + (py / self.b) ** 2 < 1.0
        return np.where(inside, d, -d).reshape(np.shape(x))


@dataclass(frozen=True)
class HalfPlane:
    """Region ``(x - p) . n <= 0`` with ``n`` the outward normal."""

    px: float
    py: float
    nx: float
    ny: float
    sign: int = 1

    def sdf(self, x, y):
        norm = math.hypot(self.nx, self.ny)
        return -((x - self.px) * self.nx + (y - self.py) * self.ny) / norm


def droplet_distance(primitives: Sequence, x, y):
    """Signed distance, positive inside the droplet phase."""
    if not primitives:
        raise ValueError("droplet specification is empty")
    add = [p.sdf(x, y) for p in primitives if p.sign > 0]
    cut = [p.sdf(x, y) for p in primitives if p.sign < 0]
    d = np.max(add, axis=0) if add else np.full(np.shape(x), -np.inf)
    if cut:
        dc = np.max(cut, axis=0)
        if np.any((d > 0) & (dc > 0)):
            raise ValueError("droplet primitives with opposite signs overlap")
        d = np.minimum(d, -dc)
    return d


# -- problem context ---------------------------------------------------------------

class Problem:
    """Mesh, spaces, parameters and the matrices that do not change in time."""

    def __init__(self, mesh: Mesh, material: MaterialParams, scheme: SchemeParams | None = None,
                 geometry: ChannelGeometry | None = None, body_force: Callable | None = None):
        self.mesh, self.material = mesh, material
        self.scheme = scheme or SchemeParams()
        self.geometry = geometry or mesh.geometry
        self.body_force = body_force
        self.spaces = S = fe.Spaces.for_mesh(mesh)
        self.A_stab, self.B_stab = self.scheme.stabilization(material)
        self.fluid_cells = mesh.fluid_cells
        self.gamma_facets = mesh.facets(FacetTag.GAMMA)
        self.tangent = fe.tangent_of(mesh.facet_normal[self.gamma_facets])
        self.M_Q = fe.assemble_mass(S.Q)
        self.S_Q = fe.assemble_stiffness(S.Q)
        self.G_Q = fe.assemble_boundary_mass(S.Q, FacetTag.GAMMA)
        self.S_P = fe.assemble_stiffness(S.P)
        self.mass_P = fe.lumped_mass(S.P)
        self.B = fe.assemble_divergence(S.X, S.P)
        self.constrained = S.X.normal_constrained_dofs()
        free = np.ones(S.X.n_dofs, dtype=bool)
        free[self.constrained] = False
        self.free = free
        # B with constrained velocity columns removed
        self.Bc = self.B.with_values(np.where(free[self.B.col_indices], self.B.values, 0.0))
        self.BcT = self.Bc.transpose()
        self.dir_nodes, self.dir_values = mesh.dirichlet_values(self.geometry)
        lift = np.zeros(S.W.n_dofs)
        lift[self.dir_nodes] = self.dir_values
        self.V_lift = lift

    @property
    def dt(self) -> float:
        return self.scheme.dt

    # quadrature-point helpers
    def q_values(self, x):
        return self.spaces.Q.values(x)

    def q_grad(self, x):
        return self.spaces.Q.gradients(x)

    def grad_V(self, V):
        return self.spaces.W.gradients(V, cells=self.fluid_cells)

    def eps_star(self, phi) -> np.ndarray:
        W = self.spaces.W
        e = np.full((W.n_cells, W.n_qp), self.material.eps_D)
        e[self.fluid_cells] = self.material.eps(self.q_values(phi))
        return e

    def signed_psi(self, phi) -> np.ndarray:
        """``sgn(d_t phi) psi(phi)`` at the wall quadrature points."""
        Q, f = self.spaces.Q, self.gamma_facets
        val = Q.facet_values(phi, f)
        dt = np.einsum("fed,fd->fe", Q.facet_gradients(phi, f), self.tangent)
        return np.sign(dt) * psi_eval(val, self.material.delta)

    def wall_phi(self, phi) -> np.ndarray:
        return self.spaces.Q.facet_values(phi, self.gamma_facets)

    def wall_ut(self, u) -> np.ndarray:
        return fe.tangential_trace(self.spaces.X, u)

    def wall_shear(self, u) -> np.ndarray:
        """``t . S(u) n`` at the wall quadrature points."""
        Q, f, n = self.spaces.Q, self.gamma_facets, self.mesh.facet_normal[self.gamma_facets]
        m = Q.n_scalar
        gx, gy = Q.facet_gradients(u[:m], f), Q.facet_gradients(u[m:], f)
        grad = np.stack([gx, gy], axis=-2)  # (F, E, comp, dir)
        S = 0.5 * (grad + np.swapaxes(grad, -1, -2))
        return np.einsum("fi,feij,fj->fe", self.tangent, S, n)

    def slip(self, phi, u) -> np.ndarray:
        m = self.material
        shear = self.wall_shear(u) if m.pinning is not None else 0.0
        return slip_coefficient(self.wall_phi(phi), shear, m)

    def wall_phi_rate(self, phi_new, phi_old) -> np.ndarray:
        return self.spaces.Q.facet_values(phi_new - phi_old, self.gamma_facets) / self.scheme.dt

    def body_load(self, t):
        if self.body_force is None:
            return 0.0
        X = self.spaces.X
        x = X.qp_coords()
        fx, fy = self.body_force(x[..., 0], x[..., 1], t)
        f = np.stack(np.broadcast_arrays(fx, fy), axis=-1)
        return fe.assemble_load(X, f)


def lu_preconditioner(A: CsrMatrix) -> Callable[[np.ndarray], np.ndarray]:
    """Sparse LU of ``A`` used as a preconditioner for stiff nonsymmetric blocks."""
    lu = splu(A.to_scipy().tocsc())
    return lu.solve


def _check(step: str, rep: SolverReport, n: int, tol: float | None = None, slack: float = 10.0):
    # a residual stalled within ``slack * tol`` is a round-off floor, not a failure
    if not rep.converged and tol is not None and rep.final_residual <= slack * tol:
        rep.converged = True
    if not rep.converged:
        raise SolverFailure(step, rep, n)


# -- initial data ------------------------------------------------------------------

def init_state(problem: Problem, droplets: Sequence, solve_potential: bool = False) -> State:
    """Phase field ``tanh(d / (sqrt(2) delta))`` from the droplet primitives, rest zero."""
    S = problem.spaces
    d = droplet_distance(droplets, S.Q.coords[:, 0], S.Q.coords[:, 1])
    phi = np.tanh(d / (math.sqrt(2.0) * problem.material.delta))
    z = np.zeros
    st = State(V=z(S.W.n_dofs), q=z(S.Q.n_dofs), phi=phi, mu=z(S.Q.n_dofs), u=z(S.X.n_dofs),
               p=z(S.P.n_dofs), xi=z(S.P.n_dofs))
    if solve_potential:
        st.V, _ = potential_solve(problem, st.phi, st.q, st.V, 0)
    return st


# -- subproblems -------------------------------------------------------------------

def potential_solve(pb: Problem, phi, q, V0, n=0):
    W = pb.spaces.W
    A = fe.assemble_stiffness(W, pb.eps_star(phi))
    b = fe.assemble_load(W, pb.q_values(q), cells=pb.fluid_cells)
    A, b = apply_dirichlet(A, b, pb.dir_nodes, pb.dir_values)
    V, rep = cg_solve(A, b, x0=V0, tol=pb.scheme.tol_spd, max_iter=pb.scheme.max_iter)
    _check("potential", rep, n, pb.scheme.tol_spd)
    return V, rep


def charge_solve(pb: Problem, st: State, q_conv, u_conv, V_new, n=0):
    """Charge update with convective flux ``q_conv * u_conv`` (lagged)."""
    Q, m = pb.spaces.Q, pb.material
    K = m.K(pb.q_values(st.phi))
    A = pb.M_Q * (1.0 / pb.dt) + fe.assemble_stiffness(Q, K) * m.lam
    flux = pb.q_values(q_conv)[..., None] * pb.spaces.X.values(u_conv)
    b = (pb.M_Q @ st.q) / pb.dt + fe.assemble_load_grad(Q, flux) \
        - fe.assemble_load_grad(Q, K[..., None] * pb.grad_V(V_new))
    q, rep = cg_solve(A, b, x0=st.q, tol=pb.scheme.tol_charge, max_iter=pb.scheme.max_iter)
    _check("charge", rep, n, pb.scheme.tol_charge, slack=1e3)
    return q, rep


def phase_matrix(pb: Problem, phi_n) -> CsrMatrix:
    m, tau = pb.material, pb.dt
    g, d = m.gamma, m.delta
    S_M = fe.assemble_stiffness(pb.spaces.Q, m.M(pb.q_values(phi_n)))
    L = pb.M_Q * (g * pb.A_stab / d) + pb.S_Q * (g * d) + pb.G_Q * (m.alpha / tau + g * pb.B_stab)
    return bmat([[pb.M_Q * (1.0 / tau), S_M], [-L, pb.M_Q]])


def phase_solve(pb: Problem, st: State, u_conv, elec, kin, u_wall, guess=None, A=None, pc=None, n=0):
    """Solve for ``(phi, mu)``.

    ``elec`` and ``kin`` are the quadrature values of the electric and kinetic
    forcing in the chemical potential; ``u_conv`` transports ``phi^n`` and
    ``u_wall`` enters the wall relaxation term.
    """
    Q, m, tau = pb.spaces.Q, pb.material, pb.dt
    g, d = m.gamma, m.delta
    phi_n = st.phi
    pq = pb.q_values(phi_n)
    _, dW, _ = double_well(pq)
    conv = np.einsum("cqd,cqd->cq", pb.spaces.X.values(u_conv), pb.q_grad(phi_n))
    rhs1 = (pb.M_Q @ phi_n) / tau - fe.assemble_load(Q, conv)
    bulk = (g / d) * (dW - pb.A_stab * pq) - 0.5 * elec + 0.5 * kin
    wp = pb.wall_phi(phi_n)
    _, dT, _ = theta_fs(wp, m.theta_s)
    wall = m.alpha * (-wp / tau + pb.wall_ut(u_wall) * pb.signed_psi(phi_n)) + g * (dT - pb.B_stab * wp)
    rhs2 = fe.assemble_load(Q, bulk) + fe.assemble_boundary_load(Q, wall)
    A = phase_matrix(pb, phi_n) if A is None else A
    b = np.concatenate([rhs1, rhs2])
    x0 = np.concatenate([phi_n, st.mu]) if guess is None else guess
    if pc is None:
        pc = lu_preconditioner(A)
    x, rep = bicgstab_solve(A, b, x0=x0, tol=pb.scheme.tol_nonsym, max_iter=pb.scheme.max_iter, precond=pc)
    _check("phase", rep, n, pb.scheme.tol_nonsym)
    k = Q.n_dofs
    return x[:k], x[k:], rep


def momentum_system(pb: Problem, st: State, phi_new, mu_new, q_new, V_new, q_force):
    """Velocity operator and right-hand side without the pressure term."""
    X, m, tau = pb.spaces.X, pb.material, pb.dt
    pq = pb.q_values(st.phi)
    rho_n = m.rho(pq)
    rho_bar = 0.5 * (m.rho(pb.q_values(phi_new)) + rho_n)
    un = X.values(st.u)
    spsi = pb.signed_psi(st.phi)
    beta = pb.slip(st.phi, st.u)
    A = fe.assemble_mass(X, rho_bar) * (1.0 / tau) \
        + fe.assemble_convection(X, rho_n[..., None] * un, "skew") \
        + fe.assemble_viscous(X, m.eta(pq)) \
        + fe.assemble_boundary_mass(X, FacetTag.GAMMA, beta + m.alpha * spsi ** 2)
    dphi = pb.q_values(phi_new - st.phi) / tau
    zeta = m.lam * pb.q_grad(q_new) + pb.grad_V(V_new)
    f = (rho_n / tau)[..., None] * un \
        + pb.q_values(mu_new)[..., None] * pb.q_grad(st.phi) \
        - pb.q_values(q_force)[..., None] * zeta \
        + (0.5 * m.drho(pq) * dphi)[..., None] * un
    b = fe.assemble_load(X, f) \
        - fe.assemble_boundary_load(X, m.alpha * pb.wall_phi_rate(phi_new, st.phi) * spsi) \
        + pb.body_load(st.t + tau)
    return A, b


def velocity_solve(pb: Problem, st: State, phi_new, mu_new, q_new, V_new, n=0):
    A, b = momentum_system(pb, st, phi_new, mu_new, q_new, V_new, st.q)
    p_sharp = pb.spaces.P.values(st.p + st.xi)
    b = b + fe.assemble_load_div(pb.spaces.X, p_sharp)
    A, b = apply_dirichlet(A, b, pb.constrained)
    u, rep = bicgstab_solve(A, b, x0=st.u, tol=pb.scheme.tol_nonsym, max_iter=pb.scheme.max_iter)
    _check("velocity", rep, n, pb.scheme.tol_nonsym)
    return u, rep


def pressure_solve(pb: Problem, st: State, u_new, n=0):
    b = -(pb.material.rho_min / pb.dt) * (pb.B @ u_new)
    xi, rep = cg_solve(pb.S_P, b, tol=pb.scheme.tol_spd, max_iter=pb.scheme.max_iter,
                       zero_mean_weights=pb.mass_P)
    _check("pressure", rep, n, pb.scheme.tol_spd, slack=1e3)
    xi = project_zero_mean(xi, pb.mass_P)
    p = project_zero_mean(st.p + xi, pb.mass_P)
    return xi, p, rep


# -- split scheme --------------------------------------------------------------------

def step_potential(pb: Problem, st: State):
    return potential_solve(pb, st.phi, st.q, st.V, st.n)


def step_charge(pb: Problem, st: State, V_new):
    return charge_solve(pb, st, st.q, st.u, V_new, st.n)


def step_phase(pb: Problem, st: State, V_new):
    m = pb.material
    pq = pb.q_values(st.phi)
    gv = pb.grad_V(V_new)
    elec = m.deps(pq) * (gv ** 2).sum(-1)
    un = pb.spaces.X.values(st.u)
    kin = m.drho(pq) * (un ** 2).sum(-1)
    return phase_solve(pb, st, st.u, elec, kin, st.u, n=st.n)


def step_velocity(pb: Problem, st: State, phi_new, mu_new, q_new, V_new):
    return velocity_solve(pb, st, phi_new, mu_new, q_new, V_new, st.n)


def step_pressure(pb: Problem, st: State, u_new):
    return pressure_solve(pb, st, u_new, st.n)


def advance(pb: Problem, st: State) -> tuple[State, StepReport]:
    """One step of the fractional-step scheme."""
    rep = StepReport()
    V, r = step_potential(pb, st)
    rep.iterations["potential"] = r.iterations
    q, r = step_charge(pb, st, V)
    rep.iterations["charge"] = r.iterations
    phi, mu, r = step_phase(pb, st, V)
    rep.iterations["phase"] = r.iterations
    u, p, xi = st.u, st.p, st.xi
    if pb.scheme.flow:
        u, r = step_velocity(pb, st, phi, mu, q, V)
        rep.iterations["velocity"] = r.iterations
        xi, p, r = step_pressure(pb, st, u)
        rep.iterations["pressure"] = r.iterations
    new = State(V=V, q=q, phi=phi, mu=mu, u=u, p=p, xi=xi, t=st.t + pb.dt, n=st.n + 1)
    if not new.is_finite():
        raise SolverFailure("advance", n=st.n, message="non-finite field")
    return new, rep


# -- coupled scheme ------------------------------------------------------------------

class _SaddleSolver:
    """Velocity-pressure solve ``A u - B^T p = f, B u = 0`` by a Schur-complement Krylov method.

    The Schur operator is preconditioned with ``(1/dt) L_{1/rho}^{-1} + M_{1/eta}^{-1}``
    (Laplacian with weight ``1/rho``, lumped mass with weight ``1/eta``).
    """

    def __init__(self, pb: Problem, A: CsrMatrix, rho, eta, n: int):
        self.pb, self.n = pb, n
        self.A, _ = apply_dirichlet(A, np.zeros(A.n_rows), pb.constrained)
        P = pb.spaces.P
        self.L = fe.assemble_stiffness(P, 1.0 / rho)
        self.Meta = fe.lumped_mass(P) if eta is None else fe.assemble_load(P, 1.0 / eta)
        self.inner_tol = min(1e-13, pb.scheme.picard_tol * 1e-3)
        self.u_guess = None
        self.iters = 0

    def solve_A(self, rhs):
        pb = self.pb
        rhs = rhs.copy()
        rhs[pb.constrained] = 0.0
        x, rep = bicgstab_solve(self.A, rhs, x0=self.u_guess, tol=self.inner_tol,
                                max_iter=pb.scheme.max_iter)
        if not rep.converged and rep.final_residual > 1e3 * self.inner_tol:
            raise SolverFailure("velocity", rep, self.n)
        self.iters += rep.iterations
        return x

    def precond(self, r):
        pb = self.pb
        r = r - r.mean()
        z1, _ = cg_solve(self.L, r, tol=1e-13, max_iter=pb.scheme.max_iter, zero_mean_weights=pb.mass_P)
        z = z1 / pb.dt + r / self.Meta
        return z - np.dot(pb.mass_P, z) / pb.mass_P.sum()

    def solve(self, f, p0):
        pb = self.pb
        Bc, BcT = pb.Bc, pb.BcT

        def schur(p):
            return Bc @ self.solve_A(BcT @ p)

        u_f = self.solve_A(f)
        rhs = -(Bc @ u_f)
        rhs -= rhs.mean()
        p, rep = bicgstab_solve(schur, rhs, x0=p0,
                                tol=max(self.inner_tol * 10, 1e-12), max_iter=2000,
                                precond=self.precond)
        p = project_zero_mean(p, pb.mass_P)
        u = self.solve_A(f + BcT @ p)
        return u, p, rep


def coupled_step(pb: Problem, st: State) -> tuple[State, StepReport]:
    """One step of the fully discrete nonlinear scheme by damped Picard iteration."""
    sc, m, X = pb.scheme, pb.material, pb.spaces.X
    # inner solves must resolve changes well below the Picard tolerance
    inner = 1e-2 * sc.picard_tol
    pb = copy.copy(pb)
    pb.scheme = replace(sc, tol_spd=min(sc.tol_spd, inner), tol_nonsym=min(sc.tol_nonsym, inner),
                        tol_charge=min(sc.tol_charge, inner))
    rep = StepReport()
    n = st.n
    pq_n = pb.q_values(st.phi)
    kin_w = m.drho(pq_n)[..., None] * X.values(st.u)  # 1/2 rho'(phi^n) u^n . u^k, without the 1/2
    A_phase = phase_matrix(pb, st.phi)
    it = dict(potential=0, charge=0, phase=0, velocity=0, pressure=0)
    cur = dict(V=st.V, q=st.q, phi=st.phi, mu=st.mu, u=st.u, p=st.p)
    omega, prev_change = 1.0, np.inf
    for k in range(1, sc.picard_max + 1):
        V, r = potential_solve(pb, cur["phi"], cur["q"], cur["V"], n)
        it["potential"] += r.iterations
        q, r = charge_solve(pb, st, st.q, cur["u"], V, n)
        it["charge"] += r.iterations
        gv = pb.grad_V(V)
        elec = perm_diff_quotient(pb.q_values(cur["phi"]), pq_n, m) * (gv ** 2).sum(-1)
        kin = np.einsum("cqd,cqd->cq", kin_w, X.values(cur["u"]))
        phi, mu, r = phase_solve(pb, st, cur["u"], elec, kin, cur["u"],
                                 guess=np.concatenate([cur["phi"], cur["mu"]]), A=A_phase, n=n)
        it["phase"] += r.iterations
        if sc.flow:
            A, f = momentum_system(pb, st, phi, mu, q, V, st.q)
            rho = m.rho(pb.q_values(0.5 * (phi + st.phi)))
            saddle = _SaddleSolver(pb, A, rho, m.eta(pq_n), n)
            saddle.u_guess = cur["u"]
            u, p, r = saddle.solve(f, cur["p"])
            it["velocity"] += saddle.iters
            it["pressure"] += r.iterations
        else:
            u, p = cur["u"], cur["p"]
        cand = dict(V=V, q=q, phi=phi, mu=mu, u=u, p=p)
        change = max(_rel_change(cand[k_], cur[k_]) for k_ in cand)
        if change > prev_change and omega == 1.0:
            omega = 0.5
        if omega != 1.0:
            cand = {k_: cur[k_] + omega * (cand[k_] - cur[k_]) for k_ in cand}
        cur, prev_change = cand, change
        rep.picard_iterations, rep.picard_change = k, change
        if change <= sc.picard_tol:
            break
        if not np.isfinite(change):
            break
    rep.iterations = it
    rep.iterations["picard"] = rep.picard_iterations
    if not (rep.picard_change <= sc.picard_tol):
        raise SolverFailure("picard", n=n,
                            message=f"change {rep.picard_change:.3e} after {rep.picard_iterations} iterations")
    new = State(V=cur["V"], q=cur["q"], phi=cur["phi"], mu=cur["mu"], u=cur["u"], p=cur["p"],
                xi=np.zeros_like(st.xi), t=st.t + pb.dt, n=n + 1)
    return new, rep


def _rel_change(a, b) -> float:
    d = np.linalg.norm(a - b)
    if d == 0.0:
        return 0.0
    return float(d / max(np.linalg.norm(a), 1e-300))


def step(pb: Problem, st: State) -> tuple[State, StepReport]:
    return coupled_step(pb, st) if pb.scheme.mode == COUPLED else advance(pb, st)


def cfl_suggest(params: SchemeParams, material: MaterialParams, mesh: Mesh, u_max: float = 0.0) -> float:
    """Advisory time-step bound ``min(c1 delta h, c2 h / u_max)``."""
    h = mesh.h_min()
    bound = params.cfl_c1 * material.delta * h
    if u_max > 0:
        bound = min(bound, params.cfl_c2 * h / u_max)
    return bound
