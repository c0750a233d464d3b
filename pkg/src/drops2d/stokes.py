"""Sherman-Lauricella boundary integral solver for 2D multiphase Stokes flow.

Solves for the complex layer density mu on composite 16-point
Gauss-Legendre grids, then evaluates interfacial and off-grid velocities.
Interfaces are stored clockwise; with that orientation the correctly
oriented system reads

    mu - (beta/pi) [M1 mu + M2 conj(mu)] + beta sum_j mu_j w_j |z'_j|
        = -(sigma gamma / 2) z'/|z'| - beta (B - iQ) conj(z)

and the interfacial velocity is

    u = -(w/pi) mu' - (1/pi) sum_{j!=i} (mu_j - mu_i) w_j Re{z'_j/(z_j-z_i)}
        - (1/(i pi)) sum_j conj(mu_j) M2_ij + (Q + iB) conj(z) - (iG/2) z.

The minus signs on the integral sums are the orientation cost of storing
interfaces clockwise; right-hand side and velocity formula keep their
conventional form.  The sign set is pinned by four independent physical
checks: a circular interface under uniform tension is stationary, a clean
ellipse relaxes toward a circle, Marangoni flow runs from low to high
surface tension, and an isolated drop in extension moves with
u.n = 2 Q cos(2 theta)/(1 + lambda).

Matrix-vector products use direct dense summation behind a small
acceleration interface; near-singular cross-interface blocks are replaced
by the special quadrature of the neareval module.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from . import neareval
from .geometry import Interface
from .spectral import (fourier_interp, panel_derivative, panel_grid,
                       spectral_derivative, uniform_to_gl)

DEFAULT_TOL = 1e-12


@dataclass(frozen=True)
class FlowConfig:
    """Far-field and material parameters.

    Q is the extensional rate (capillary number), B and G the shear
    parameters of the linear far field, lambdas the per-drop viscosity
    ratios.  E and Pe describe the surfactant (Pe = inf disables surface
    diffusion); eos selects the equation of state.
    """

    Q: float = 0.0
    B: float = 0.0
    G: float = 0.0
    lambdas: tuple = (0.0,)
    E: float = 0.5
    Pe: float = np.inf
    eos: str = "linear"

    def __post_init__(self):
        for v, name in ((self.Q, "Q"), (self.B, "B"), (self.G, "G")):
            if not np.isfinite(v):
                raise ValueError(f"{name} must be finite")
        if any(l < 0 for l in self.lambdas):
            raise ValueError("viscosity ratios must be nonnegative")
        if self.eos not in ("linear", "langmuir"):
            raise ValueError("eos must be 'linear' or 'langmuir'")
        if not (self.Pe > 0):
            raise ValueError("Pe must be positive (np.inf allowed)")
        if self.eos == "langmuir" and not (0 < self.E < 1):
            raise ValueError("langmuir needs 0 < E < 1")


class SolverError(RuntimeError):
    def __init__(self, msg, residuals=None):
        super().__init__(msg)
        self.residuals = residuals or []


@dataclass
class DensitySolution:
    mu: np.ndarray
    residual: float
    iterations: int


@dataclass
class Discretization:
    """Composite Gauss-Legendre view of a set of interfaces."""

    ifaces: list
    z: np.ndarray
    zp: np.ndarray
    zpp: np.ndarray
    w: np.ndarray
    drop_of: np.ndarray
    n_panels: list
    panel_slices: list = field(default_factory=list)
    panel_drop: list = field(default_factory=list)
    panels: list = field(default_factory=list)
    offsets: list = field(default_factory=list)

    @property
    def n(self):
        return self.z.shape[0]


def discretize(ifaces) -> Discretization:
    """Interpolate interface geometry onto the composite GL grids."""
    zs, zps, zpps, ws, drops = [], [], [], [], []
    n_panels, slices, pdrop, panels, offsets = [], [], [], [], []
    off = 0
    for k, ifc in enumerate(ifaces):
        npan = ifc.n // 16
        grid = panel_grid(npan)
        zp_u = ifc.z_alpha()
        zpp_u = ifc.z_alpha2()
        z_gl = uniform_to_gl(ifc.z, npan)
        zp_gl = uniform_to_gl(zp_u, npan)
        zpp_gl = uniform_to_gl(zpp_u, npan)
        z_edges = fourier_interp(ifc.z, grid.endpoints[:-1])
        z_edges = np.append(z_edges, z_edges[0])
        zs.append(z_gl)
        zps.append(zp_gl)
        zpps.append(zpp_gl)
        ws.append(grid.weights)
        drops.append(np.full(z_gl.shape[0], k))
        n_panels.append(npan)
        for p in range(npan):
            sl = slice(off + 16 * p, off + 16 * (p + 1))
            slices.append(sl)
            pdrop.append(k)
            panels.append(neareval.prepare_panel(
                z_gl[16 * p:16 * (p + 1)], zp_gl[16 * p:16 * (p + 1)],
                grid.weights[16 * p:16 * (p + 1)],
                z_edges[p], z_edges[p + 1]))
        offsets.append(off)
        off += z_gl.shape[0]
    return Discretization(
        ifaces=list(ifaces),
        z=np.concatenate(zs), zp=np.concatenate(zps), zpp=np.concatenate(zpps),
        w=np.concatenate(ws), drop_of=np.concatenate(drops),
        n_panels=n_panels, panel_slices=slices, panel_drop=pdrop,
        panels=panels, offsets=offsets)


def sigma_to_gl(ifaces, sigma_uniform) -> np.ndarray:
    """Interpolate per-drop uniform surface tension to the GL grids."""
    out = []
    for ifc, sig in zip(ifaces, sigma_uniform):
        out.append(uniform_to_gl(np.asarray(sig, dtype=float), ifc.n // 16))
    return np.concatenate(out)


def _near_pairs(disc: Discretization, cross_only: bool = True):
    """Point-panel pairs requiring special quadrature, with frames."""
    pairs = []
    centers = np.array([0.5 * (p.za + p.zb) for p in disc.panels])
    lengths = np.array([p.length for p in disc.panels])
    for ip, panel in enumerate(disc.panels):
        d = np.abs(disc.z - centers[ip])
        cand = np.nonzero(d < (neareval.CULL_FACTOR + 0.75) * lengths[ip])[0]
        for i in cand:
            if cross_only and disc.drop_of[i] == disc.panel_drop[ip]:
                continue
            if not cross_only and disc.panel_slices[ip].start <= i < disc.panel_slices[ip].stop:
                continue
            frame = neareval.needs_correction(panel, disc.z[i], 1.0)
            if frame is not None:
                pairs.append((i, ip, frame))
    return pairs


class DirectKernels:
    """Dense kernel matrices with near-singular corrections folded in.

    This is the direct O(N^2) acceleration backend; a fast summation
    method could replace it behind the same apply_* methods.
    """

    def __init__(self, disc: Discretization, correct: bool = True):
        self.disc = disc
        z, zp, w = disc.z, disc.zp, disc.w
        dz = z[None, :] - z[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            M1 = np.imag(zp[None, :] / dz)
            cj = np.conj(dz)
            M2 = np.imag(zp[None, :] * cj) / cj**2
            K1re = np.real(zp[None, :] / dz)
        with np.errstate(divide="ignore", invalid="ignore"):
            CAU = zp[None, :] / dz
        idx = np.arange(disc.n)
        M1[idx, idx] = np.imag(disc.zpp / (2 * zp))
        M2[idx, idx] = np.imag(disc.zpp * np.conj(zp)) / (2 * np.conj(zp) ** 2)
        K1re[idx, idx] = 0.0
        CAU[idx, idx] = 0.0
        self.M1 = M1 * w[None, :]
        self.M2 = M2 * w[None, :]
        self.K1re = K1re * w[None, :]
        self.CAU = CAU * w[None, :]
        self.pairs = _near_pairs(disc) if correct else []
        for i, ip, frame in self.pairs:
            panel = disc.panels[ip]
            sl = disc.panel_slices[ip]
            r1, rJ2, rJ3 = neareval.kernel_rows(panel, frame)
            self.M1[i, sl] = np.imag(r1)
            self.M2[i, sl] = 0.5j * (np.conj(rJ2) + np.conj(rJ3))
            self.K1re[i, sl] = np.real(r1)
            self.CAU[i, sl] = r1

    def apply_m1(self, mu):
        return self.M1 @ mu

    def apply_m2_conj(self, mu):
        return self.M2 @ np.conj(mu)

    def apply_re_subtracted(self, mu):
        return self.K1re @ mu - self.K1re.sum(axis=1) * mu


def _diff_operator(disc: Discretization) -> np.ndarray:
    """Block-diagonal per-panel differentiation matrix d/d alpha."""
    from .spectral import DIFF16

    N = disc.n
    D = np.zeros((N, N))
    off = 0
    for k in range(len(disc.ifaces)):
        npan = disc.n_panels[k]
        h = 2 * np.pi / npan
        for p in range(npan):
            sl = slice(off + 16 * p, off + 16 * (p + 1))
            D[sl, sl] = (2 / h) * DIFF16
        off += 16 * npan
    return D


def _velocity_operators(disc: Discretization, kernels: DirectKernels):
    """Dense (C-linear, anti-linear) parts of the layer velocity."""
    w = disc.w
    D = _diff_operator(disc)
    Kre = kernels.K1re
    U_lin = (-(w[:, None] / np.pi) * D
             - (Kre - np.diag(Kre.sum(axis=1))) / np.pi)
    U_conj = -kernels.M2 / (1j * np.pi)
    return U_lin, U_conj, D


def solve_density(ifaces, sigma_gl, cfg: FlowConfig, tol: float = DEFAULT_TOL,
                  disc: Discretization = None, kernels: DirectKernels = None,
                  mu0: np.ndarray = None, maxiter: int = 200) -> DensitySolution:
    """Solve the interfacial stress balance for the layer density.

    sigma_gl holds surface tension samples on the composite GL grid (all
    drops concatenated).  The real-linear system (the conjugate-density
    terms are antilinear) is solved dense by QR least squares; its only
    null direction is the velocity-invisible per-drop pressure gauge.
    mu0/tol are accepted for interface compatibility; the direct solve is
    exact to conditioning.
    """
    import scipy.linalg as sla

    if disc is None:
        disc = discretize(ifaces)
    N = disc.n
    nd = len(ifaces)
    z, zp, w = disc.z, disc.zp, disc.w
    lam = np.array([cfg.lambdas[k] if k < len(cfg.lambdas) else cfg.lambdas[-1]
                    for k in disc.drop_of])
    if np.all(lam == 1.0):
        # the balance collapses to the exact identity (canonical gauge)
        mu = -0.25 * sigma_gl * zp / np.abs(zp)
        return DensitySolution(mu=mu, residual=0.0, iterations=0)
    if kernels is None:
        kernels = DirectKernels(disc)
    U_lin, U_conj, D = _velocity_operators(disc, kernels)
    CAU = kernels.CAU
    # fluid-side limit of the Cauchy transform (constants cancel):
    # 2 f(mu) = (1/pi) [sum_{j != i} (mu_j - mu_i) CAU_ij + w_i mu'_i]
    F2_lin = (CAU - np.diag(CAU.sum(axis=1)) + w[:, None] * D) / np.pi
    oml = (1.0 - lam)[:, None]
    L = np.diag(2j * lam) + oml * (U_lin + F2_lin)
    A_conj = oml * U_conj
    tau = zp / np.abs(zp)
    far = (cfg.Q + 1j * cfg.B) * np.conj(z) - 0.5j * cfg.G * z
    rhs = -0.5j * sigma_gl * tau - oml[:, 0] * far

    ncol = 2 * N + 3 * nd
    A = np.zeros((2 * N + nd, ncol))
    A[:N, :N] = L.real + A_conj.real
    A[:N, N:2 * N] = -L.imag + A_conj.imag
    A[N:2 * N, :N] = L.imag + A_conj.imag
    A[N:2 * N, N:2 * N] = L.real - A_conj.real
    b = np.zeros(2 * N + nd)
    b[:N] = rhs.real
    b[N:2 * N] = rhs.imag
    n_in = -1j * tau
    for k in range(nd):
        sel = disc.drop_of == k
        cols = (-z * sel, -1.0 * sel + 0j, -1j * sel + 0j)
        for j, colc in enumerate(cols):
            A[:N, 2 * N + 3 * k + j] = colc.real
            A[N:2 * N, 2 * N + 3 * k + j] = colc.imag
        wt = sel * w * np.abs(zp)
        avec = np.conj(n_in) * wt
        rc = avec @ U_lin
        ra = avec @ U_conj
        A[2 * N + k, :N] = rc.real + ra.real
        A[2 * N + k, N:2 * N] = -rc.imag + ra.imag
        b[2 * N + k] = -np.sum(wt * np.real(far * np.conj(n_in)))
    # weight the density unknowns so the minimum-norm gauge minimizes the
    # continuous integral of |mu|^2 ds: the selected gauge is then
    # resolution-independent and densities converge pointwise under
    # panel refinement.  The system is underdetermined (per-drop pressure
    # gauge), so the minimum-norm solution comes from the normal
    # equations of the second kind with a tiny ridge.
    swt = 1.0 / np.sqrt(w * np.abs(zp))
    scale = np.concatenate([swt, swt, np.ones(3 * nd)])
    B = A * scale[None, :]
    rnorm = np.sqrt((B * B).sum(axis=1))
    rnorm[rnorm == 0] = 1.0
    B /= rnorm[:, None]
    beq = b / rnorm
    # fast path: min-norm via the second-kind normal equations; falls back
    # to QR least squares when conditioning spoils the cheap route
    x = None
    try:
        import warnings as _w
        with _w.catch_warnings():
            _w.simplefilter("error", sla.LinAlgWarning)
            G = B @ B.T
            G[np.diag_indices_from(G)] += 1e-14
            y = sla.solve(G, beq, assume_a="pos")
        x = scale * (B.T @ y)
        if np.abs(A @ x - b).max() > 1e-9 * max(1.0, np.abs(b).max()):
            x = None
    except (sla.LinAlgError, sla.LinAlgWarning):
        x = None
    if x is None:
        xw, _, _, _ = sla.lstsq(B, beq, cond=1e-12, lapack_driver="gelsy")
        x = scale * xw
    rank = A.shape[0]
    res = float(np.abs(A @ x - b).max())
    bnorm = float(np.abs(b).max())
    if res > max(1e-8, 1e-10 * max(1.0, bnorm)):
        raise SolverError(f"stress-balance solve residual {res:.2e}",
                          residuals=[res])
    mu = x[:N] + 1j * x[N:2 * N]
    return DensitySolution(mu=mu, residual=res, iterations=int(rank))


def evaluate_velocity_on_interface(disc: Discretization, sol: DensitySolution,
                                   cfg: FlowConfig,
                                   kernels: DirectKernels = None) -> np.ndarray:
    """Interfacial velocity at the GL nodes via singularity subtraction."""
    if kernels is None:
        kernels = DirectKernels(disc)
    mu = sol.mu
    mup = np.concatenate([
        panel_derivative(mu[disc.offsets[k]:disc.offsets[k] + 16 * disc.n_panels[k]],
                         disc.n_panels[k])
        for k in range(len(disc.ifaces))])
    u = (-(disc.w / np.pi) * mup
         - kernels.apply_re_subtracted(mu) / np.pi
         - kernels.apply_m2_conj(mu) / (1j * np.pi)
         + (cfg.Q + 1j * cfg.B) * np.conj(disc.z)
         - 0.5j * cfg.G * disc.z)
    return u


def evaluate_velocity_offgrid(disc: Discretization, sol: DensitySolution,
                              cfg: FlowConfig, targets) -> np.ndarray:
    """Velocity at points off the interfaces, with near corrections.

    Targets must not coincide with quadrature nodes.
    """
    t = np.atleast_1d(np.asarray(targets, dtype=complex))
    mu = sol.mu
    if np.any(np.min(np.abs(disc.z[None, :] - t[:, None]), axis=1) == 0.0):
        raise ValueError("target coincides with a quadrature node")
    d = disc.z[None, :] - t[:, None]
    base = disc.w * disc.zp
    K1 = np.real(base[None, :] / d)
    cj = np.conj(d)
    K2 = np.imag(base[None, :] * cj) / cj**2
    u = -(K1 @ mu) / np.pi - (K2 @ np.conj(mu)) / (1j * np.pi)
    # near corrections, per target-panel pair
    mu_inf_panel = [np.abs(mu[sl]).max() for sl in disc.panel_slices]
    for ti, z0 in enumerate(t):
        for ip, panel in enumerate(disc.panels):
            frame = neareval.needs_correction(panel, z0, mu_inf_panel[ip])
            if frame is None:
                continue
            sl = disc.panel_slices[ip]
            r1, rJ2, rJ3 = neareval.kernel_rows(panel, frame)
            mu_p = mu[sl]
            K1_corr = np.real(r1) @ mu_p
            K2_corr = 0.5j * (np.conj(rJ2 @ mu_p) + np.conj(rJ3 @ mu_p))
            K1_plain = np.real(base[sl] / (panel.z_nodes - z0)) @ mu_p
            p1, pJ2, pJ3 = neareval.plain_rows(panel, z0)
            K2_plain = 0.5j * (np.conj(pJ2 @ mu_p) + np.conj(pJ3 @ mu_p))
            u[ti] -= (K1_corr - K1_plain) / np.pi + (K2_corr - K2_plain) / (1j * np.pi)
    u += (cfg.Q + 1j * cfg.B) * np.conj(t) - 0.5j * cfg.G * t
    return u


def interface_velocity(ifaces, sigma_uniform, cfg: FlowConfig,
                       tol: float = DEFAULT_TOL, mu0=None):
    """One Stokes solve: returns per-drop uniform-grid velocities.

    Handles the hybrid-grid transfers: uniform -> GL for the solve,
    per-panel interpolation + downsampling + Krasny filter on the way
    back.
    """
    from .spectral import panel_interp_to_uniform

    disc = discretize(ifaces)
    kernels = DirectKernels(disc)
    sigma_gl = sigma_to_gl(ifaces, sigma_uniform)
    sol = solve_density(ifaces, sigma_gl, cfg, tol=tol, disc=disc,
                        kernels=kernels, mu0=mu0)
    u_gl = evaluate_velocity_on_interface(disc, sol, cfg, kernels=kernels)
    out = []
    for k, ifc in enumerate(ifaces):
        npan = disc.n_panels[k]
        sl = slice(disc.offsets[k], disc.offsets[k] + 16 * npan)
        out.append(panel_interp_to_uniform(u_gl[sl], npan, ifc.n))
    return out, sol, disc
