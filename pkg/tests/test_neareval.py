import warnings

import numpy as np
import pytest
from scipy.integrate import quad

from drops2d import neareval
from drops2d.neareval import (PanelData, correct_panel_integrals,
                              correction_rows, estimate_error, kernel_rows,
                              locate_preimage, needs_correction, plain_rows,
                              prepare_panel, recursion_pq)
from drops2d.spectral import GL_NODES, GL_WEIGHTS

warnings.filterwarnings("ignore", message=".*roundoff.*")


def quarter_circle_panel():
    """Counterclockwise quarter-ish arc used as a strongly curved panel."""
    th_a, th_b = 0.0, np.pi / 4
    th = th_a + (GL_NODES + 1) * (th_b - th_a) / 2
    z = np.exp(1j * th)
    zp = 1j * np.exp(1j * th) * (th_b - th_a) / 2   # dz/dxi
    w = GL_WEIGHTS.copy()
    return prepare_panel(z, zp, w, np.exp(1j * th_a), np.exp(1j * th_b)), (th_a, th_b)


def flat_panel():
    z = GL_NODES.astype(complex)
    zp = np.ones(16, dtype=complex)
    return prepare_panel(z, zp, GL_WEIGHTS.copy(), -1.0 + 0j, 1.0 + 0j)


def cquad(f, a, b):
    re = quad(lambda t: f(t).real, a, b, limit=400, epsabs=1e-14, epsrel=1e-14)[0]
    im = quad(lambda t: f(t).imag, a, b, limit=400, epsabs=1e-14, epsrel=1e-14)[0]
    return re + 1j * im


class TestPreimage:
    def test_flat_panel_interior_point(self):
        panel = flat_panel()
        fr = locate_preimage(panel, 0.5j)
        assert fr.newton_ok
        assert abs(fr.xi0 - 0.5j) < 1e-13

    def test_flat_panel_real_exterior(self):
        panel = flat_panel()
        fr = locate_preimage(panel, 2.0 + 0j)
        assert abs(fr.xi0 - 2.0) < 1e-13

    def test_curved_panel_residual(self):
        panel, (ta, tb) = quarter_circle_panel()
        z0 = 0.98 * np.exp(1j * np.pi / 8)
        fr = locate_preimage(panel, z0)
        assert fr.newton_ok
        eta_val = np.polynomial.legendre.legval(fr.xi0, panel.eta)
        assert abs(eta_val - panel.transform(z0)) < 1e-13


class TestRecursion:
    def test_p0_at_two(self):
        p, q = recursion_pq(2.0 + 0j)
        assert abs(p[0] + np.log(3.0)) < 1e-14

    def test_q0_at_two(self):
        p, q = recursion_pq(2.0 + 0j)
        assert abs(q[0] - 2.0 / 3.0) < 1e-14

    def test_on_segment_rejected(self):
        with pytest.raises(ValueError):
            recursion_pq(0.3 + 0j)

    @pytest.mark.parametrize("z0", [0.2 + 0.05j, -0.7 + 0.3j, 1.3 - 0.8j])
    def test_against_adaptive_quadrature(self, z0):
        p, q = recursion_pq(z0)
        for j in range(16):
            pj = cquad(lambda t: t**j / (t - z0), -1, 1)
            qj = cquad(lambda t: t**j / (t - z0) ** 2, -1, 1)
            assert abs(p[j] - pj) < 1e-12 * max(1, abs(pj))
            assert abs(q[j] - qj) < 5e-12 * max(1, abs(qj))

    def test_forward_stability_outside_disk(self):
        # the special rule only activates for preimages within ~1.5 of the
        # panel; forward recursion is machine-accurate there
        rng = np.random.default_rng(3)
        for _ in range(8):
            r = 1.05 + 0.45 * rng.random()
            th = rng.random() * 2 * np.pi
            z0 = r * np.exp(1j * th)
            p, q = recursion_pq(z0)
            split = float(np.clip(z0.real, -1.0, 1.0))
            for j in (7, 15):
                f = lambda t: t**j / (t - z0)
                pj = f(0) * 0.0
                pieces = [-1.0, split, 1.0] if -1 < split < 1 else [-1.0, 1.0]
                pj = sum(cquad(f, a, b) for a, b in zip(pieces[:-1], pieces[1:]))
                assert abs(p[j] - pj) < 1e-12 * max(1.0, abs(pj))


class TestCorrection:
    def test_far_target_matches_plain(self):
        panel, _ = quarter_circle_panel()
        mu = np.exp(panel.z_nodes)
        z0 = 0.3 + 0.1j
        fr = locate_preimage(panel, z0)
        r1, rJ2, rJ3 = kernel_rows(panel, fr)
        p1, pJ2, pJ3 = plain_rows(panel, z0)
        assert abs(r1 @ mu - p1 @ mu) < 1e-12
        assert abs(rJ2 @ mu - pJ2 @ mu) < 1e-12
        assert abs(rJ3 @ mu - pJ3 @ mu) < 1e-11

    def test_near_target_matches_adaptive_quadrature(self):
        panel, (ta, tb) = quarter_circle_panel()
        mu_f = lambda tau: np.exp(tau) * (1 + 0.2 * tau**2)
        mid = np.exp(1j * (ta + tb) / 2)
        for dist, side in ((1e-3, 1), (1e-3, -1), (0.03, 1)):
            z0 = mid * (1 + side * dist)
            fr = locate_preimage(panel, z0)
            r1, _, _ = kernel_rows(panel, fr)
            got = r1 @ mu_f(panel.z_nodes)
            # split the parameter interval at the closest point for quad
            tm = (ta + tb) / 2
            f = lambda t: mu_f(np.exp(1j * t)) * 1j * np.exp(1j * t) / (np.exp(1j * t) - z0)
            want = cquad(f, ta, tm) + cquad(f, tm, tb)
            assert abs(got - want) < 1e-10

    def test_zero_density(self):
        panel, _ = quarter_circle_panel()
        out = correct_panel_integrals(panel, np.zeros(16), 1.001 * np.exp(1j * np.pi / 8))
        assert out is not None
        assert abs(out[0]) == 0 and abs(out[1]) == 0

    def test_residue_branch_both_sides(self):
        # mirrored targets very close to the curved panel: both need the
        # path-deformation residue handled correctly
        panel, (ta, tb) = quarter_circle_panel()
        mid = np.exp(1j * (ta + tb) / 2)
        mu_f = lambda tau: 1.0 + 0.5 * tau
        tm = (ta + tb) / 2
        for side in (1, -1):
            z0 = mid * (1 + side * 2e-3)
            fr = locate_preimage(panel, z0)
            r1, _, _ = kernel_rows(panel, fr)
            got = r1 @ mu_f(panel.z_nodes)
            f = lambda t: mu_f(np.exp(1j * t)) * 1j * np.exp(1j * t) / (np.exp(1j * t) - z0)
            want = cquad(f, ta, tm) + cquad(f, tm, tb)
            assert abs(got - want) < 1e-10


class TestEstimate:
    def test_far_estimate_tiny(self):
        panel, (ta, tb) = quarter_circle_panel()
        z0 = np.exp(1j * np.pi / 8) * (1 + 1.0 * panel.length)
        fr = locate_preimage(panel, z0)
        assert estimate_error(panel, fr, 1.0) < 1e-13

    def test_tracks_measured_error(self):
        panel, (ta, tb) = quarter_circle_panel()
        mid = np.exp(1j * (ta + tb) / 2)
        mu_f = lambda tau: np.exp(tau)
        mu = mu_f(panel.z_nodes)
        tm = (ta + tb) / 2
        for dist in (0.3, 0.15, 0.08):
            z0 = mid * (1 + dist)
            fr = locate_preimage(panel, z0)
            est = estimate_error(panel, fr, np.abs(mu).max())
            # measured plain-GL error of the combined kernel value
            p1, pJ2, pJ3 = plain_rows(panel, z0)
            plain = (-1j / np.pi) * np.sum(GL_WEIGHTS * mu *
                                           np.imag(panel.zp_nodes / GL_WEIGHTS /
                                                   1.0) * 0)  # placeholder, see below
            # use kernel combination I = -(i/pi) Im-part + conj parts
            def kernel_exact():
                def g(t):
                    tau = np.exp(1j * t)
                    tp = 1j * tau
                    m = mu_f(tau)
                    nb2 = np.conj(tau) ** 2
                    J1 = m * np.imag(tp / (tau - z0))
                    J2 = m * nb2 * tp / (tau - z0)
                    J3 = m * (np.conj(tau) - np.conj(z0)) * tp / (tau - z0) ** 2
                    return (-1j / np.pi) * J1 + np.conj(J2) / (2 * np.pi) + np.conj(J3) / (2 * np.pi)
                return cquad(g, ta, tm) + cquad(g, tm, tb)

            base = panel.w_alpha * panel.zp_nodes
            d = panel.z_nodes - z0
            J1 = np.sum(mu * np.imag(base / d))
            nb2 = np.conj(panel.z_nodes) ** 2
            J2 = np.sum(mu * nb2 * base / d)
            J3 = np.sum(mu * (np.conj(panel.z_nodes) - np.conj(z0)) * base / d**2)
            plain = (-1j / np.pi) * J1 + np.conj(J2) / (2 * np.pi) + np.conj(J3) / (2 * np.pi)
            measured = abs(plain - kernel_exact())
            if measured > 1e-12:
                ratio = est / measured
                assert 0.1 < ratio < 10.0

    def test_zero_density_zero_estimate(self):
        panel, _ = quarter_circle_panel()
        fr = locate_preimage(panel, 1.05 * np.exp(1j * np.pi / 8))
        assert estimate_error(panel, fr, 0.0) == 0.0


def test_idempotence_where_plain_accurate():
    panel, (ta, tb) = quarter_circle_panel()
    mu = np.cos(panel.z_nodes)
    z0 = np.exp(1j * np.pi / 8) * (1 + 1.0 * panel.length)
    fr = locate_preimage(panel, z0)
    r1, rJ2, rJ3 = kernel_rows(panel, fr)
    p1, pJ2, pJ3 = plain_rows(panel, z0)
    for rc, rp in ((r1, p1), (rJ2, pJ2), (rJ3, pJ3)):
        assert abs(rc @ mu - rp @ mu) < 1e-12
