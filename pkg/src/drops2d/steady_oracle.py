"""Exact steady states of a single surfactant-covered bubble in extension.

A two-term conformal map z = A0/zeta + b*zeta (|zeta| = 1, constant area
A0^2 - b^2 = 1) describes the steady shape; the surfactant concentration
and the capillary number that sustains the shape follow in closed form
up to one quadrature.  The linear equation of state and Pe = inf are
assumed throughout.

The parametrization used here puts the long axis on the x axis and
traverses the interface clockwise with nu = 0 at the positive-x tip, so
oracle output can be compared pointwise against simulations driven by a
positive extensional rate Q.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .spectral import antiderivative, uniform_alpha

QUAD_POINTS = 2048


@dataclass(frozen=True)
class SteadyMap:
    """Conformal-map parameters; a < 0, b >= 0 with a^2 - b^2 = 1."""

    a: float
    b: float

    def __post_init__(self):
        if self.a >= 0 or self.b < 0:
            raise ValueError("need a < 0 and b >= 0")
        if abs(self.a**2 - self.b**2 - 1.0) > 1e-12:
            raise ValueError("constant-area constraint a^2 - b^2 = 1 violated")

    @classmethod
    def from_b(cls, b: float) -> "SteadyMap":
        return cls(a=-np.sqrt(1.0 + b * b), b=b)


def _B_profile(b: float, nu: np.ndarray) -> np.ndarray:
    return 1.0 + 2.0 * b * b - 2.0 * np.sqrt(1.0 + b * b) * b * np.cos(2.0 * nu)


def _A_coefficient(b: float, E: float, m: int = QUAD_POINTS) -> float:
    nu = uniform_alpha(m)
    B = _B_profile(b, nu)
    h = 2.0 * np.pi / m
    int_sqrtB = np.sum(np.sqrt(B)) * h
    int_B = np.sum(B) * h
    return (int_sqrtB - 2.0 * np.pi * E) / int_B


def steady_q(b: float, E: float) -> float:
    """Capillary number sustaining the steady shape with parameter b."""
    A = _A_coefficient(b, E)
    return A * b / np.sqrt(1.0 + b * b)


def steady_solution(mp: SteadyMap, E: float, M: int = 256) -> dict:
    """Shape, concentration and capillary number of the steady state.

    Returns z(nu_j), rho(nu_j), the deformation number D, the capillary
    number Q, and the equal-arclength parameters alphaV(nu_j) used to
    compare against simulation output.
    """
    if M < 64:
        raise ValueError("need at least 64 points")
    a, b = mp.a, mp.b
    nu = uniform_alpha(M)
    zeta = np.exp(1j * nu)
    z = -a / zeta + b * zeta
    z_nu = 1j * (a / zeta + b * zeta)
    B = _B_profile(b, nu)
    A = _A_coefficient(b, E)
    rho = (1.0 - A * np.sqrt(B)) / E
    if np.any(rho <= 0):
        raise ValueError("flow too strong: steady concentration not positive")
    r = np.abs(z)
    D = (r.max() - r.min()) / (r.max() + r.min())
    Q = A * b / np.sqrt(1.0 + b * b)
    sp = np.abs(z_nu)
    L = sp.mean() * 2.0 * np.pi
    osc = antiderivative(sp - sp.mean())
    S = sp.mean() * nu + (osc - osc[0])
    alphaV = S * 2.0 * np.pi / L
    return {"nu": nu, "z": z, "z_nu": z_nu, "rho": rho, "D": D, "Q": Q,
            "A": A, "alphaV": alphaV, "length": L}


def b_from_q(Q: float, E: float, b_max: float = 2.0) -> float:
    """Invert Q(b) on the lower (stable) branch."""
    if Q == 0.0:
        return 0.0
    bs = np.linspace(1e-6, b_max, 400)
    qs = np.array([steady_q(b, E) for b in bs])
    peak = int(np.argmax(qs))
    if Q > qs[peak]:
        raise ValueError(f"no steady state at Q={Q} (max Q ~ {qs[peak]:.4f})")
    return brentq(lambda b: steady_q(b, E) - Q, 1e-9, bs[peak], xtol=1e-14)


def d_q_curve(E: float, b_values) -> np.ndarray:
    """Deformation vs capillary number along a sweep of map parameters."""
    rows = []
    for b in np.asarray(b_values, dtype=float):
        mp = SteadyMap.from_b(b)
        sol = steady_solution(mp, E, M=128)
        rows.append((sol["Q"], sol["D"], b))
    return np.array(rows)
