"""Fixed-boundary Stokes Dirichlet problem used for quadrature studies.

A counterclockwise star-shaped contour encloses the domain; boundary
velocity data comes from an exact Stokes field built from rational
Goursat functions with poles outside the closure.  The integral equation
takes stream-gradient data (i times the complex velocity); the velocity
anywhere inside follows from the same kernels.  This problem isolates the
near-singular evaluation error studied by the remainder estimates: the
density solve is accurate everywhere, so all error comes from evaluating
the velocity close to the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from . import neareval
from .spectral import panel_grid


def star_contour(n_panels: int, amplitude: float = 0.3, mode: int = 3):
    """Composite-GL discretization of z(a) = (1 + amplitude cos(mode a)) e^{ia}."""
    grid = panel_grid(n_panels)
    a = grid.alpha
    r = 1 + amplitude * np.cos(mode * a)
    dr = -amplitude * mode * np.sin(mode * a)
    ddr = -amplitude * mode**2 * np.cos(mode * a)
    e = np.exp(1j * a)
    z = r * e
    zp = (dr + 1j * r) * e
    zpp = (ddr + 2j * dr - r) * e
    edges_a = grid.endpoints
    r_e = 1 + amplitude * np.cos(mode * edges_a)
    z_edges = r_e * np.exp(1j * edges_a)
    return grid, z, zp, zpp, z_edges


@dataclass(frozen=True)
class GoursatReference:
    """Exact Stokes velocity -phi + z conj(phi') + conj(psi) from simple poles."""

    pole1: complex = 1.8 + 1.6j
    pole2: complex = -2.0 - 1.1j

    def velocity(self, z):
        z = np.asarray(z, dtype=complex)
        phi = 1.0 / (z - self.pole1)
        dphi = -1.0 / (z - self.pole1) ** 2
        psi = 1.0 / (z - self.pole2) ** 2
        return -phi + z * np.conj(dphi) + np.conj(psi)


@dataclass
class DirichletSolution:
    grid: object
    z: np.ndarray
    zp: np.ndarray
    zpp: np.ndarray
    w: np.ndarray
    mu: np.ndarray
    panels: list
    residual: float


def solve_dirichlet(n_panels: int, boundary_velocity, amplitude: float = 0.3,
                    mode: int = 3, tol: float = 1e-13) -> DirichletSolution:
    """Solve the interior Dirichlet problem for the given velocity trace."""
    grid, z, zp, zpp, z_edges = star_contour(n_panels, amplitude, mode)
    w = grid.weights
    n = z.shape[0]
    dz = z[None, :] - z[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        M1 = np.imag(zp[None, :] / dz)
        cj = np.conj(dz)
        M2 = np.imag(zp[None, :] * cj) / cj**2
    idx = np.arange(n)
    M1[idx, idx] = np.imag(zpp / (2 * zp))
    M2[idx, idx] = np.imag(zpp * np.conj(zp)) / (2 * np.conj(zp) ** 2)
    M1w = M1 * w[None, :]
    M2w = M2 * w[None, :]

    u_b = boundary_velocity(z)
    data = 1j * u_b  # stream-gradient form of the velocity data

    def matvec(x):
        mu = x[:n] + 1j * x[n:]
        out = mu + (M1w @ mu) / np.pi - (M2w @ np.conj(mu)) / np.pi
        return np.concatenate([out.real, out.imag])

    A = LinearOperator((2 * n, 2 * n), matvec=matvec)
    b = np.concatenate([data.real, data.imag])
    x, info = gmres(A, b, rtol=tol, atol=0.0, maxiter=600, restart=600)
    res = float(np.abs(A @ x - b).max())
    mu = x[:n] + 1j * x[n:]
    panels = []
    for p in range(n_panels):
        sl = slice(16 * p, 16 * (p + 1))
        panels.append(neareval.prepare_panel(z[sl], zp[sl], w[sl],
                                             z_edges[p], z_edges[p + 1]))
    return DirichletSolution(grid=grid, z=z, zp=zp, zpp=zpp, w=w, mu=mu,
                             panels=panels, residual=res)


def _plain_kernel_value(sol: DirichletSolution, z0: complex) -> complex:
    d = sol.z - z0
    base = sol.w * sol.zp
    J1 = np.sum(sol.mu * np.imag(base / d))
    J2 = np.sum(np.conj(sol.mu) * np.imag(base * np.conj(d)) / np.conj(d) ** 2)
    return (-1j / np.pi) * J1 + (1j / np.pi) * J2


def evaluate_velocity(sol: DirichletSolution, targets, corrected: bool = True):
    """Interior velocity; near-panel contributions use the special rule."""
    t = np.atleast_1d(np.asarray(targets, dtype=complex))
    out = np.empty(t.shape[0], dtype=complex)
    mu_inf = [np.abs(sol.mu[16 * p:16 * (p + 1)]).max()
              for p in range(len(sol.panels))]
    for k, z0 in enumerate(t):
        val = _plain_kernel_value(sol, z0)
        if corrected:
            for ip, panel in enumerate(sol.panels):
                frame = neareval.needs_correction(panel, z0, mu_inf[ip])
                if frame is None:
                    continue
                sl = slice(16 * ip, 16 * (ip + 1))
                mu_p = sol.mu[sl]
                r1, rJ2, rJ3 = neareval.kernel_rows(panel, frame)
                p1, pJ2, pJ3 = neareval.plain_rows(panel, z0)
                # J1-part carries Im of the Cauchy integral; the conjugate
                # kernel splits into the two special integrals
                dI1 = (r1 - p1) @ mu_p
                dI1c = np.conj((r1 - p1) @ np.conj(mu_p))
                dJ1 = (dI1 - dI1c) / 2j
                dJ2 = 0.5j * (np.conj((rJ2 - pJ2) @ mu_p)
                              + np.conj((rJ3 - pJ3) @ mu_p))
                val += (-1j / np.pi) * dJ1 + (1j / np.pi) * dJ2
        out[k] = val
    return out


def estimate_field(sol: DirichletSolution, targets):
    """Summed per-panel remainder estimates at each target."""
    t = np.atleast_1d(np.asarray(targets, dtype=complex))
    mu_inf = [np.abs(sol.mu[16 * p:16 * (p + 1)]).max()
              for p in range(len(sol.panels))]
    out = np.zeros(t.shape[0])
    for k, z0 in enumerate(t):
        tot = 0.0
        for ip, panel in enumerate(sol.panels):
            dmin = np.min(np.abs(panel.z_nodes - z0))
            if dmin > neareval.CULL_FACTOR * panel.length:
                continue
            frame = neareval.locate_preimage(panel, z0)
            if not frame.newton_ok:
                continue
            est = neareval.estimate_error(panel, frame, mu_inf[ip])
            if np.isfinite(est):
                tot += est
        out[k] = tot
    return out


def inside_star(points, amplitude: float = 0.3, mode: int = 3,
                margin: float = 0.0) -> np.ndarray:
    """Mask of points strictly inside the star contour (radial test)."""
    pts = np.atleast_1d(np.asarray(points, dtype=complex))
    th = np.angle(pts)
    r_b = 1 + amplitude * np.cos(mode * th)
    return np.abs(pts) < r_b - margin
