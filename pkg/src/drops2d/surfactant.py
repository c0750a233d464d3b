"""Insoluble surfactant transport on drop interfaces.

Concentration lives on the same equidistant parameter grid as the
interface.  Convection and stretching are treated explicitly and
pseudo-spectrally (3/2 zero-padding for products, Krasny filter), surface
diffusion implicitly; with Pe = inf the implicit stage is skipped
entirely.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .geometry import Interface, VelocityDecomposition, curvature
from .spectral import (krasny_filter, modes, resample, spectral_derivative,
                       trapezoid)


@dataclass(frozen=True)
class SurfactantField:
    """Concentration samples plus the constitutive parameters."""

    rho: np.ndarray
    E: float = 0.5
    Pe: float = np.inf
    eos: str = "linear"

    def __post_init__(self):
        vals = np.asarray(self.rho, dtype=float)
        object.__setattr__(self, "rho", vals)
        if np.any(vals < 0):
            raise ValueError("surfactant concentration must be nonnegative")
        if self.eos == "langmuir" and np.any(vals >= 1):
            raise ValueError("langmuir equation of state needs rho < 1")
        if self.eos not in ("linear", "langmuir"):
            raise ValueError("unknown equation of state")

    @property
    def n(self):
        return self.rho.shape[0]


def surface_tension(f: SurfactantField) -> np.ndarray:
    """sigma(rho): 1 - E rho (linear) or 1 + E log(1 - rho) (langmuir)."""
    if f.eos == "linear":
        sig = 1.0 - f.E * f.rho
    else:
        sig = 1.0 + f.E * np.log(1.0 - f.rho)
    if np.any(sig <= 0):
        raise ValueError("surface tension dropped to zero or below")
    return sig


def _dealiased_product(a, b):
    """Pointwise product computed on a 3/2 zero-padded grid."""
    n = a.shape[0]
    m = 3 * n // 2
    prod = resample(a, m) * resample(b, m)
    return krasny_filter(resample(prod, n))


def rhs_explicit(iface: Interface, f: SurfactantField,
                 decomp: VelocityDecomposition) -> np.ndarray:
    """Convection and stretching terms of the transport equation.

    f_E = (u_t_mod/s_a) rho_a - (1/s_a) (rho u_t)_a - rho u_n kappa,
    with s_a = L/(2 pi); products are de-aliased by 3/2 padding.
    """
    s_a = iface.length() / (2 * np.pi)
    rho_a = spectral_derivative(f.rho, 1)
    kap = curvature(iface)
    t1 = _dealiased_product(decomp.u_t_mod, rho_a) / s_a
    t2 = spectral_derivative(_dealiased_product(f.rho, decomp.u_t), 1) / s_a
    t3 = _dealiased_product(f.rho, _dealiased_product(decomp.u_n, kap))
    return krasny_filter(t1 - t2 - t3)


def implicit_factor(n: int, s_alpha: float, Pe: float, dt_coeff: float) -> np.ndarray:
    """Fourier multipliers of (1 - dt_coeff * diffusion)^{-1}."""
    if not np.isfinite(Pe):
        return np.ones(n)
    j = modes(n)
    return 1.0 / (1.0 + dt_coeff * j.astype(float) ** 2 / (Pe * s_alpha**2))


def rhs_implicit_solve(rhs_samples, s_alpha: float, Pe: float,
                       dt_coeff: float) -> np.ndarray:
    """Mode-wise exact solve of (1 - dt_coeff * D) rho = rhs."""
    vals = np.asarray(rhs_samples, dtype=float)
    if not np.isfinite(Pe):
        return vals.copy()
    coef = np.fft.fft(vals) * implicit_factor(vals.shape[0], s_alpha, Pe, dt_coeff)
    return np.fft.ifft(coef).real


def rhs_implicit_apply(f: SurfactantField, s_alpha: float) -> np.ndarray:
    """Diffusion term (1/(Pe s_a^2)) rho_aa; zero when Pe = inf."""
    if not np.isfinite(f.Pe):
        return np.zeros(f.n)
    return spectral_derivative(f.rho, 2) / (f.Pe * s_alpha**2)


def surfactant_mass(iface: Interface, f: SurfactantField) -> float:
    """Trapezoidal surface integral of rho, spectrally accurate."""
    sp = np.abs(iface.z_alpha())
    return float(np.real(trapezoid(f.rho * sp)))


def with_rho(f: SurfactantField, rho) -> SurfactantField:
    return replace(f, rho=np.asarray(rho, dtype=float))
