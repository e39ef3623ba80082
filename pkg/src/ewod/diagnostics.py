"""Energy, dissipation and geometric observables of a discrete state."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage

from . import fespace as fe
from .materials import double_well, theta_fs
from .scheme import Problem, State


@dataclass
class EnergyBreakdown:
    kinetic: float
    charge: float
    cahn_hilliard: float
    electrostatic: float
    wall: float

    @property
    def total(self) -> float:
        return self.kinetic + self.charge + self.cahn_hilliard + self.electrostatic + self.wall

    def as_dict(self) -> dict:
        return asdict(self) | {"total": self.total}


@dataclass
class DissipationBreakdown:
    viscous: float
    mobility: float
    ohmic: float
    slip: float
    boundary_relax: float

    @property
    def total(self) -> float:
        return self.viscous + self.mobility + self.ohmic + self.slip + self.boundary_relax

    def as_dict(self) -> dict:
        return asdict(self)


def _wsum(space: fe.FeSpace, f, cells=None) -> float:
    return float(np.sum(space.jxw(cells) * f))


def _fsum(pb: Problem, f) -> float:
    _, w = pb.spaces.Q.facet_geometry(pb.gamma_facets)
    return float(np.sum(w * f))


def _electric(pb: Problem, phi, V) -> float:
    """``int over the whole domain of eps*(phi) |grad V|^2``."""
    W = pb.spaces.W
    g = W.gradients(V)
    return _wsum(W, pb.eps_star(phi) * (g ** 2).sum(-1))


def energy_total(pb: Problem, st: State) -> EnergyBreakdown:
    m, S = pb.material, pb.spaces
    pq = pb.q_values(st.phi)
    uq = S.X.values(st.u)
    W, _, _ = double_well(pq)
    T, _, _ = theta_fs(pb.wall_phi(st.phi), m.theta_s)
    grad2 = (pb.q_grad(st.phi) ** 2).sum(-1)
    return EnergyBreakdown(
        kinetic=0.5 * _wsum(S.Q, m.rho(pq) * (uq ** 2).sum(-1)),
        charge=0.5 * m.lam * _wsum(S.Q, pb.q_values(st.q) ** 2),
        cahn_hilliard=m.gamma * _wsum(S.Q, 0.5 * m.delta * grad2 + W / m.delta),
        electrostatic=0.5 * _electric(pb, st.phi, st.V),
        wall=m.gamma * _fsum(pb, T),
    )


def dissipation_total(pb: Problem, old: State, new: State) -> DissipationBreakdown:
    """Dissipation rates of the step ``old -> new`` (coefficients frozen at ``old``)."""
    m, S = pb.material, pb.spaces
    pq = pb.q_values(old.phi)
    G = S.X.gradients(new.u)  # (C, Q, comp, dir)
    sym = 0.5 * (G + np.swapaxes(G, -1, -2))
    zeta = m.lam * pb.q_grad(new.q) + pb.grad_V(new.V)
    ut = pb.wall_ut(new.u)
    rate = pb.wall_phi_rate(new.phi, old.phi) + ut * pb.signed_psi(old.phi)
    return DissipationBreakdown(
        viscous=_wsum(S.Q, m.eta(pq) * (sym ** 2).sum((-1, -2))),
        mobility=_wsum(S.Q, m.M(pq) * (pb.q_grad(new.mu) ** 2).sum(-1)),
        ohmic=_wsum(S.Q, m.K(pq) * (zeta ** 2).sum(-1)),
        slip=_fsum(pb, pb.slip(old.phi, old.u) * ut ** 2),
        boundary_relax=m.alpha * _fsum(pb, rate ** 2),
    )


def step_energy_terms(pb: Problem, old: State, new: State) -> dict:
    """Left and right members of the discrete energy law for one step."""
    m, S, tau = pb.material, pb.spaces, pb.dt
    pq0, pq1 = pb.q_values(old.phi), pb.q_values(new.phi)
    u0, u1 = S.X.values(old.u), S.X.values(new.u)
    q0, q1 = pb.q_values(old.q), pb.q_values(new.q)
    g0, g1 = pb.q_grad(old.phi), pb.q_grad(new.phi)
    W0, _, _ = double_well(pq0)
    W1, _, _ = double_well(pq1)
    T0, _, _ = theta_fs(pb.wall_phi(old.phi), m.theta_s)
    T1, _, _ = theta_fs(pb.wall_phi(new.phi), m.theta_s)
    Wsp = S.W
    eps0 = pb.eps_star(old.phi)
    gV0, gV1 = Wsp.gradients(old.V), Wsp.gradients(new.V)
    D = dissipation_total(pb, old, new)
    lhs = {
        "kinetic": _wsum(S.Q, m.rho(pq1) * (u1 ** 2).sum(-1) - m.rho(pq0) * (u0 ** 2).sum(-1)),
        "kinetic_increment": _wsum(S.Q, m.rho(pq0) * ((u1 - u0) ** 2).sum(-1)),
        "charge": m.lam * _wsum(S.Q, q1 ** 2 - q0 ** 2 + 0.5 * (q1 - q0) ** 2),
        "gradient": m.gamma * m.delta * _wsum(S.Q, (g1 ** 2).sum(-1) - (g0 ** 2).sum(-1)
                                              + ((g1 - g0) ** 2).sum(-1)),
        "well": 2.0 * m.gamma / m.delta * _wsum(S.Q, W1 - W0),
        "electric": _electric(pb, new.phi, new.V) - _electric(pb, old.phi, old.V),
        "electric_increment": _wsum(Wsp, eps0 * ((gV1 - gV0) ** 2).sum(-1)),
        "wall": 2.0 * m.gamma * _fsum(pb, T1 - T0),
        "dissipation": 2.0 * tau * D.total,
    }
    # boundary data V0: the Dirichlet lift
    lift = pb.V_lift
    gL = Wsp.gradients(lift)
    flux = pb.eps_star(new.phi)[..., None] * gV1 - eps0[..., None] * gV0
    rhs = -2.0 * _wsum(S.Q, (q1 - q0) * Wsp.values(lift, cells=pb.fluid_cells)) \
        + 2.0 * _wsum(Wsp, (flux * gL).sum(-1))
    return {"lhs": lhs, "lhs_total": sum(lhs.values()), "rhs": rhs}


def energy_law_residual(pb: Problem, old: State, new: State) -> float:
    """``LHS - RHS`` of the per-step energy law; nonpositive up to round-off."""
    t = step_energy_terms(pb, old, new)
    return t["lhs_total"] - t["rhs"]


def count_droplets(pb: Problem, phi) -> int:
    """Connected components of ``{phi > 0}`` on the nodal lattice of the phase space."""
    Q = pb.spaces.Q
    grid = np.asarray(phi).reshape(Q.ly, Q.lx) > 0.0
    _, n = ndimage.label(grid)
    return int(n)


def observables(pb: Problem, st: State) -> dict:
    Q, X, m = pb.spaces.Q, pb.spaces.X, pb.material
    pq = pb.q_values(st.phi)
    w = np.clip(0.5 * (1.0 + pq), 0.0, 1.0)
    xq = Q.qp_coords()
    wsum = _wsum(Q, w)
    G = X.gradients(st.u)
    div = G[..., 0, 0] + G[..., 1, 1]
    if wsum > 0:
        cx, cy = _wsum(Q, w * xq[..., 0]) / wsum, _wsum(Q, w * xq[..., 1]) / wsum
    else:
        cx = cy = math.nan
    return {
        "phase_mass": _wsum(Q, pq),
        "total_charge": _wsum(Q, pb.q_values(st.q)),
        "div_norm": math.sqrt(_wsum(Q, div ** 2)),
        "centroid_x": cx,
        "centroid_y": cy,
        # equilibrium profile: int |grad phi|^2 across the interface is 4 / (3 sqrt(2) delta)
        "interface_length": _wsum(Q, (pb.q_grad(st.phi) ** 2).sum(-1)) * 3.0 * m.delta / (2.0 * math.sqrt(2.0)),
        "droplet_count": count_droplets(pb, st.phi),
    }
