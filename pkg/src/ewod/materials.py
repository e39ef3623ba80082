"""Constitutive laws, potentials, stabilization bounds and dimensionless groups.

All functions are vectorized over ``phi`` and work in nondimensional units.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class PinningParams:
    T_p: float = 1.0
    transition_width: float = 1.0  # in octaves of |S|/T_p

    def __post_init__(self):
        if not (self.T_p > 0 and self.transition_width > 0):
            raise ValueError("pinning threshold and width must be positive")


@dataclass(frozen=True)
class MaterialParams:
    """Bulk values for phase 1 (``phi = +1``) and phase 2 (``phi = -1``)."""

    rho1: float = 100.0
    rho2: float = 1.0
    eta1: float = 10.0
    eta2: float = 1.0
    K1: float = 10.0
    K2: float = 1.0
    eps1: float = 5.0
    eps2: float = 1.0
    eps_D: float = 100.0
    gamma: float = 50.0
    delta: float = 0.1
    lam: float = 0.5
    M_mobility: float = 1e-2
    alpha: float = 1e-3
    beta_const: float = 10.0
    theta_s: float = 2.0 * math.pi / 3.0
    pinning: PinningParams | None = None
    K_slaved: bool = True
    M_slaved: bool = False
    M2: float | None = None  # second bulk mobility when M_slaved

    def __post_init__(self):
        positive = ("rho1", "rho2", "eta1", "eta2", "K1", "K2", "eps1", "eps2", "eps_D",
                    "gamma", "delta", "lam", "M_mobility", "alpha", "beta_const")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def check_scale(self, channel_height: float) -> None:
        if self.delta > 0.25 * channel_height:
            warnings.warn(f"interface thickness {self.delta} is large compared with the channel",
                          stacklevel=2)

    def with_(self, **kw) -> "MaterialParams":
        return replace(self, **kw)

    # slaved coefficients
    def rho(self, phi):
        return slave_eval(self.rho1, self.rho2, self.delta, phi)

    def drho(self, phi):
        return slave_deriv(self.rho1, self.rho2, self.delta, phi)

    def eta(self, phi):
        return slave_eval(self.eta1, self.eta2, self.delta, phi)

    def eps(self, phi):
        return slave_eval(self.eps1, self.eps2, self.delta, phi)

    def deps(self, phi):
        return slave_deriv(self.eps1, self.eps2, self.delta, phi)

    def K(self, phi):
        if self.K_slaved:
            return slave_eval(self.K1, self.K2, self.delta, phi)
        return np.full_like(np.asarray(phi, dtype=float), self.K1)

    def M(self, phi):
        if self.M_slaved:
            return slave_eval(self.M_mobility, self.M2 or self.M_mobility, self.delta, phi)
        return np.full_like(np.asarray(phi, dtype=float), self.M_mobility)

    @property
    def rho_min(self) -> float:
        return min(self.rho1, self.rho2)


def slave_eval(v1, v2, delta, phi):
    """Smooth interpolation between ``v2`` (``phi -> -inf``) and ``v1`` (``phi -> +inf``)."""
    phi = np.asarray(phi, dtype=float)
    return 0.5 * (v1 - v2) * (2.0 / np.pi) * np.arctan(phi / delta) + 0.5 * (v1 + v2)


def slave_deriv(v1, v2, delta, phi):
    phi = np.asarray(phi, dtype=float)
    return (v1 - v2) / (np.pi * delta) / (1.0 + (phi / delta) ** 2)


def double_well(phi):
    """Quartic well with quadratic tails: returns ``(W, W', W'')``."""
    phi = np.asarray(phi, dtype=float)
    lo, hi = phi < -1.0, phi > 1.0
    W = np.where(lo, (phi + 1.0) ** 2, np.where(hi, (phi - 1.0) ** 2, 0.25 * (1.0 - phi ** 2) ** 2))
    dW = np.where(lo, 2.0 * (phi + 1.0), np.where(hi, 2.0 * (phi - 1.0), phi ** 3 - phi))
    d2W = np.where(lo | hi, 2.0, 3.0 * phi ** 2 - 1.0)
    return W, dW, d2W


def theta_fs(phi, theta_s):
    """Wall energy density and derivatives; constant outside ``[-1, 1]``."""
    c = 0.5 * math.cos(theta_s)
    x = np.clip(np.asarray(phi, dtype=float), -1.0, 1.0)
    inside = np.abs(np.asarray(phi, dtype=float)) <= 1.0
    a = 0.5 * np.pi
    T = c * np.sin(a * x)
    dT = np.where(inside, c * a * np.cos(a * x), 0.0)
    d2T = np.where(inside, -c * a * a * np.sin(a * x), 0.0)
    return T, dT, d2T


def psi_eval(phi, delta):
    phi = np.asarray(phi, dtype=float)
    return np.exp(-phi ** 2 / (2.0 * delta)) / delta


def psi_deriv(phi, delta):
    phi = np.asarray(phi, dtype=float)
    return -phi / delta * psi_eval(phi, delta)


def _smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3.0 - 2.0 * x)


def slip_coefficient(phi, S_ntau, params: MaterialParams):
    """Slip coefficient ``beta``; stress-dependent when pinning is enabled.

    The length factor moves from ``1/delta`` (ratio ``|S|/T_p <= 1/2``)
    through ``1`` (ratio 1) to ``delta`` (ratio ``>= 2``) by smoothsteps in
    ``log2`` of the ratio, and is ``1/delta`` wherever ``|phi| > 1/2``.
    """
    phi = np.asarray(phi, dtype=float)
    pin = params.pinning
    if pin is None:
        return np.full_like(phi, params.beta_const)
    d = params.delta
    ratio = np.abs(np.asarray(S_ntau, dtype=float)) / pin.T_p
    s = np.log2(np.maximum(ratio, 1e-300)) / pin.transition_width
    # log of the length factor: log(1/d) at s <= -1, 0 at s = 0, log(d) at s >= 1
    log_l = -math.log(d) * (1.0 - _smoothstep(s + 1.0)) + math.log(d) * _smoothstep(s)
    ell = np.where(np.abs(phi) > 0.5, 1.0 / d, np.exp(log_l))
    return params.eta(phi) * ell


def perm_diff_quotient(phi1, phi2, params: MaterialParams):
    """Average of ``eps'`` on the segment ``[phi2, phi1]``."""
    a = np.asarray(phi1, dtype=float)
    b = np.asarray(phi2, dtype=float)
    diff = a - b
    far = np.abs(diff) > 1e-12 * (1.0 + np.abs(a) + np.abs(b))
    safe = np.where(far, diff, 1.0)
    return np.where(far, (params.eps(a) - params.eps(b)) / safe, params.deps(a))


def stabilization_bounds(params: MaterialParams) -> tuple[float, float]:
    """Smallest admissible convex-splitting constants ``(A_min, B_min)``."""
    return 1.0, math.pi ** 2 * abs(math.cos(params.theta_s)) / 16.0


@dataclass(frozen=True)
class PhysicalScales:
    rho_scale: float
    eta_scale: float
    L_scale: float
    u_scale: float
    V_scale: float
    eps_scale: float
    M_scale: float
    K_scale: float
    gamma: float
    lam: float
    alpha: float

    def __post_init__(self):
        for k, v in self.__dict__.items():
            if not v > 0:
                raise ValueError(f"{k} must be positive")


@dataclass(frozen=True)
class NonDimGroups:
    Ca: float
    Re: float
    We: float
    Bo_EW: float
    Ie: float
    St_ph: float
    Mo: float
    Ko: float
    Ch: float


def nondim_groups(s: PhysicalScales) -> NonDimGroups:
    q = s.V_scale / s.lam
    t = s.L_scale / s.u_scale
    return NonDimGroups(
        Ca=s.eta_scale * s.u_scale / s.gamma,
        Re=s.rho_scale * s.u_scale * s.L_scale / s.eta_scale,
        We=s.rho_scale * s.u_scale ** 2 * s.L_scale / s.gamma,
        Bo_EW=s.eps_scale * s.V_scale ** 2 / (s.L_scale * s.gamma),
        Ie=s.rho_scale * s.u_scale ** 2 / (q * s.V_scale),
        St_ph=s.gamma / (s.alpha / t),
        Mo=s.gamma * s.M_scale / (s.L_scale ** 2 * s.u_scale),
        Ko=s.V_scale * s.K_scale / (s.L_scale * q * s.u_scale),
        Ch=q * s.L_scale ** 2 / (s.V_scale * s.eps_scale),
    )
