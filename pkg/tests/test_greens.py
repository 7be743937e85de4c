import dataclasses
import math

import numpy as np
import pytest

from poroscat.errors import DomainError, SingularityError
from poroscat.greens import (
    _trace_matrix,
    dislocation_trace_kernel,
    green_tensor,
    helmholtz_kernel,
    trace_kernel,
)
from poroscat.material import solve_dispersion


def biot_residual(y, xi, col, wave, params, h=1e-3):
    """Relative residual of the governing system for one source column,
    5-point central differences (the independent PDE oracle)."""
    gamma, omega = wave.gamma, wave.omega
    m = params.rho - params.rho_f**2 / gamma
    beta = params.alpha - params.rho_f / gamma
    lam, mu = params.lam, params.mu

    def field(pt):
        g = green_tensor(y, pt, wave, params).matrix
        return g[:3, col], g[3, col]

    c2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / (12 * h * h)
    c1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / (12 * h)
    offs = np.array([-2, -1, 0, 1, 2])
    eye = np.eye(3)

    u0, p0 = field(xi)
    lap_u = np.zeros(3, complex)
    lap_p = 0.0 + 0j
    grad_p = np.zeros(3, complex)
    J = np.zeros((3, 3), complex)  # J[k, i] = d u_i / d xi_k
    for k in range(3):
        us, ps = zip(*(field(xi + o * h * eye[k]) for o in offs))
        us, ps = np.array(us), np.array(ps)
        lap_u += c2 @ us
        lap_p += c2 @ ps
        grad_p[k] = c1 @ ps
        J[k] = c1 @ us
    graddiv = np.zeros(3, complex)
    for k in range(3):
        divs = np.zeros(5, complex)
        for s, o in enumerate(offs):
            base = xi + o * h * eye[k]
            for k2 in range(3):
                us2 = np.array([field(base + o2 * h * eye[k2])[0][k2] for o2 in offs])
                divs[s] += c1 @ us2
        graddiv[k] = c1 @ divs

    L1 = (lam + mu) * graddiv + mu * lap_u - beta * grad_p + omega**2 * m * u0
    L2 = lap_p / (gamma * omega**2) + p0 / params.M + beta * np.trace(J)
    s1 = (
        abs(omega**2 * m) * np.linalg.norm(u0)
        + abs(beta) * np.linalg.norm(grad_p)
        + abs(mu) * np.linalg.norm(lap_u)
    )
    s2 = abs(p0 / params.M) + abs(lap_p / (gamma * omega**2)) + abs(beta * np.trace(J))
    return max(np.linalg.norm(L1) / s1, abs(L2) / s2)


class TestHelmholtzKernel:
    def test_direct_substitution(self):
        assert helmholtz_kernel(1j, 1.0, 0) == pytest.approx(
            math.exp(-1.0) / (4 * math.pi), rel=1e-15
        )

    def test_first_derivative_matches_finite_difference(self):
        k, r, h = 2 + 0.1j, 1.3, 1e-6
        fd = (helmholtz_kernel(k, r + h) - helmholtz_kernel(k, r - h)) / (2 * h)
        assert abs(fd - helmholtz_kernel(k, r, 1)) / abs(fd) < 1e-8

    @pytest.mark.parametrize("order", [2, 3, 4])
    def test_higher_derivatives_match_finite_difference(self, order):
        k, r, h = 1.5 + 0.4j, 0.9, 1e-4
        fd = (
            helmholtz_kernel(k, r + h, order - 1)
            - helmholtz_kernel(k, r - h, order - 1)
        ) / (2 * h)
        assert abs(fd - helmholtz_kernel(k, r, order)) / abs(fd) < 1e-6

    def test_decay_monotone(self):
        k = 0.8 + 0.5j
        r = np.linspace(2.0 / k.imag, 10.0 / k.imag, 50)
        mags = np.abs(helmholtz_kernel(k, r))
        assert np.all(np.diff(mags) < 0)

    def test_singularity_rejected(self):
        with pytest.raises(SingularityError):
            helmholtz_kernel(1.0, 0.0)

    def test_order_out_of_range(self):
        with pytest.raises(DomainError):
            helmholtz_kernel(1.0, 1.0, 5)


class TestGreenTensor:
    def test_fluid_displacement_is_negated_force_pressure(self, wave, params, rng):
        for _ in range(5):
            y, xi = rng.normal(size=3), rng.normal(size=3)
            g = green_tensor(y, xi, wave, params)
            assert np.array_equal(g.fluid_displacement, -g.force_pressure)

    def test_reciprocity_of_displacement_block(self, wave, params, rng):
        for _ in range(50):
            y, xi = rng.normal(size=3), rng.normal(size=3)
            a = green_tensor(y, xi, wave, params).force_displacement
            b = green_tensor(xi, y, wave, params).force_displacement
            assert np.abs(a - b.T).max() <= 1e-12 * np.abs(a).max()

    def test_coincident_points_rejected(self, wave, params):
        with pytest.raises(SingularityError):
            green_tensor([1.0, 0, 0], [1.0, 0, 0], wave, params)

    def test_biot_residual_all_columns(self, wave, params, rng):
        worst = 0.0
        for _ in range(20):
            xi = rng.normal(size=3)
            xi *= rng.uniform(0.5, 3.0) / np.linalg.norm(xi)
            for col in range(4):
                worst = max(worst, biot_residual(np.zeros(3), xi, col, wave, params))
        assert worst < 1e-4

    def test_modal_decay_rates(self, wave):
        # far-field decay of each modal kernel matches Im(k) within 2%;
        # the slow compressional mode is skipped when overdamped
        for k in (wave.k_s, wave.k_p1, wave.k_p2):
            if k.imag > k.real:  # overdamped
                continue
            r = np.linspace(5.0 / k.imag, 10.0 / k.imag, 40)
            logs = np.log(np.abs(helmholtz_kernel(k, r)) * 4 * np.pi * r)
            slope = np.polyfit(r, logs, 1)[0]
            assert abs(-slope - k.imag) / k.imag < 0.02

    def test_smoothness_away_from_source(self, wave, params):
        # second differences stay bounded over r in [0.5, 3]
        y = np.zeros(3)
        direction = np.array([0.6, 0.64, 0.48])
        h = 1e-3
        for r in np.linspace(0.5, 3.0, 7):
            xi = r * direction
            gp = green_tensor(y, xi + h * direction, wave, params).matrix
            g0 = green_tensor(y, xi, wave, params).matrix
            gm = green_tensor(y, xi - h * direction, wave, params).matrix
            second = np.abs(gp - 2 * g0 + gm).max() / h**2
            assert np.isfinite(second)
            assert second < 1e4 * max(np.abs(g0).max(), 1.0)


class TestTraceKernel:
    def test_normal_flip_signs(self, wave, params, rng):
        y, xi = np.array([0.1, -0.2, 0.3]), np.array([1.0, 0.6, -0.4])
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        kp = trace_kernel(y, xi, n, wave, params).matrix
        km = trace_kernel(y, xi, -n, wave, params).matrix
        np.testing.assert_array_equal(km[0:3], -kp[0:3])  # traction rows flip
        np.testing.assert_array_equal(km[3], -kp[3])      # flow row flips
        np.testing.assert_array_equal(km[4], kp[4])       # pressure row unchanged

    def test_traction_matches_finite_difference(self, wave, params, rng):
        y, xi = np.array([0.1, -0.2, 0.3]), np.array([0.9, 0.5, -0.4])
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        K = trace_kernel(y, xi, n, wave, params).matrix
        h = 1e-5
        J = np.zeros((3, 4, 4), complex)
        for k in range(3):
            e = np.eye(3)[k]
            J[k] = (
                green_tensor(y, xi + h * e, wave, params).matrix
                - green_tensor(y, xi - h * e, wave, params).matrix
            ) / (2 * h)
        g0 = green_tensor(y, xi, wave, params).matrix
        for col in range(4):
            gu = J[:, :3, col]
            t_fd = (
                params.lam * n * np.trace(gu)
                + params.mu * (n @ gu + gu @ n)
                - params.alpha * g0[3, col] * n
            )
            err = np.linalg.norm(K[:3, col] - t_fd) / np.linalg.norm(t_fd)
            assert err < 1e-6

    def test_flow_row_reduction_without_solid_coupling(self, wave, params):
        # alpha = 0 and vanishing rho_f reduce the flow row to grad(p).n;
        # only the fluid column keeps a live pressure field in this limit,
        # and only within the diffusion length of the slow mode
        p0 = dataclasses.replace(params, alpha=0.0, rho_f=1e-30)
        w0 = solve_dispersion(p0, wave.omega)
        y = np.zeros(3)
        xi = np.array([0.8, 0.1, 0.5]) * (0.5 / w0.k_p2.imag) / 0.9434
        n = np.array([0.0, 0.0, 1.0])
        K = trace_kernel(y, xi, n, w0, p0).matrix
        h = 2e-7
        dp = (
            green_tensor(y, xi + h * n, w0, p0).matrix[3, 3]
            - green_tensor(y, xi - h * n, w0, p0).matrix[3, 3]
        ) / (2 * h)
        expect = dp / (w0.gamma * w0.omega**2)
        assert abs(K[3, 3] - expect) / abs(expect) < 1e-6
        # force-source flow entries vanish with the coupling
        assert np.abs(K[3, :3]).max() < 1e-12 * abs(K[3, 3])

    def test_pressure_row_equals_green_pressure(self, wave, params):
        y, xi = np.zeros(3), np.array([0.7, -0.3, 0.2])
        n = np.array([1.0, 0.0, 0.0])
        K = trace_kernel(y, xi, n, wave, params).matrix
        g = green_tensor(y, xi, wave, params).matrix
        np.testing.assert_array_equal(K[4, :3], g[3, :3])
        assert K[4, 3] == g[3, 3]

    def test_non_unit_normal_rejected(self, wave, params):
        with pytest.raises(DomainError):
            trace_kernel(np.zeros(3), np.ones(3), [1.0, 1.0, 0.0], wave, params)


class TestDislocationKernel:
    def test_traces_of_radiated_field(self, wave, params, rng):
        # the coupling kernel must agree with finite differences of the
        # radiated dislocation field at a separated trace point
        y = np.array([0.1, -0.2, 0.3])
        z = np.array([-0.6, 0.8, 0.2])
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        nu = rng.normal(size=3)
        nu /= np.linalg.norm(nu)

        def radiated(a, pt):
            K = _trace_matrix(pt, y, n, wave, params)
            return K.T @ a

        B = dislocation_trace_kernel(y, n, z, nu, wave, params)
        h = 1e-5
        gw2 = wave.gamma * wave.omega**2
        for col in range(5):
            a = np.zeros(5)
            a[col] = 1.0
            J = np.zeros((3, 4), complex)
            for k in range(3):
                e = np.eye(3)[k]
                J[k] = (radiated(a, z + h * e) - radiated(a, z - h * e)) / (2 * h)
            f0 = radiated(a, z)
            gu = J[:, :3]
            t_fd = (
                params.lam * nu * np.trace(gu)
                + params.mu * (nu @ gu + gu @ nu)
                - params.alpha * f0[3] * nu
            )
            q_fd = (J[:, 3] @ nu - params.rho_f * wave.omega**2 * (f0[:3] @ nu)) / gw2
            assert np.linalg.norm(B[:3, col] - t_fd) / np.linalg.norm(t_fd) < 1e-6
            assert abs(B[3, col] - q_fd) / abs(q_fd) < 1e-6
            assert abs(B[4, col] - f0[3]) <= 1e-14 * abs(f0[3])
