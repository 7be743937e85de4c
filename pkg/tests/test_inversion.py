import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poroscat import forward as fw
from poroscat import inversion as inv
from poroscat.errors import DomainError
from poroscat.greens import green_tensor
from poroscat.material import solve_dispersion
from poroscat.presets import desk_scale_scene
from poroscat.scene import Scene, build_sampling_grid, build_sensing_grid


@pytest.fixture(scope="module")
def scene(params):
    return desk_scale_scene(resolution=(6, 6), n_dir=4)


@pytest.fixture(scope="module")
def lam(scene, wave, params):
    return fw.assemble_lambda(scene, wave, params, mode="local")


def random_operator(rng, n=8):
    return rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))


class TestTrialPattern:
    def test_fluid_monopole_pressure_rows(self, scene, wave, params):
        # the iota = 0 pattern radiates through the pressure kernels: its
        # pressure rows are the fluid-injection pressure of the point pair
        x0 = np.array([0.3, -0.7, 0.0])
        tp = inv.trial_pattern(
            x0, scene.sampling.normals[0], 0, scene.grid.points, wave, params,
            scene.channels,
        )
        C = len(scene.channels)
        p_rows = tp.vector.reshape(-1, C)[:, scene.channels.index("fluid")]
        for i in (0, 5, 17):
            expect = green_tensor(x0, scene.grid.points[i], wave, params).fluid_pressure
            assert p_rows[i] == pytest.approx(expect, rel=1e-13)

    def test_linearity_in_amplitude(self, scene, wave, params):
        x0 = np.array([0.4, 0.2, 0.0])
        n = scene.sampling.normals[1]
        b = inv._jump_amplitude(n, 1)
        plus = inv.radiated_pattern(
            x0, n, b, scene.grid.points, wave, params, scene.channels
        )
        minus = inv.radiated_pattern(
            x0, n, -b, scene.grid.points, wave, params, scene.channels
        )
        np.testing.assert_array_equal(minus, -plus)

    def test_normal_flip_leaves_dipole_pattern_unchanged(self, scene, wave, params):
        # flipping the trial normal flips both the kernel and the jump
        # amplitude; the physical dislocation (and its pattern) is the same
        x0 = np.array([-0.6, 0.9, 0.0])
        n = scene.sampling.normals[1]
        a = inv.trial_pattern(x0, n, 1, scene.grid.points, wave, params, scene.channels)
        b = inv.trial_pattern(x0, -n, 1, scene.grid.points, wave, params, scene.channels)
        np.testing.assert_allclose(a.vector, b.vector, rtol=1e-13)

    def test_pattern_on_cell_matches_radiation_column(self, scene, wave, params):
        # a trial point on an actual fracture cell reproduces the matching
        # combination of radiation-operator columns (same kernel path)
        patch = scene.patches[0]
        centers, areas = patch.cells()
        cell = 3
        x0 = centers[cell]
        n = patch.normal
        tp = inv.trial_pattern(x0, n, 1, scene.grid.points, wave, params, scene.channels)
        R = fw._radiation_operator(scene, wave, params)
        cols = R[:, 5 * cell : 5 * cell + 3] @ n / areas[cell]
        np.testing.assert_allclose(tp.vector, cols, rtol=1e-12)

    def test_block_matches_single(self, scene, wave, params):
        pts = scene.sampling.points()[:3]
        cands = scene.sampling.candidates()
        block = inv.trial_pattern_block(
            pts, cands, scene.grid.points, wave, params, scene.channels
        )
        ncand = len(cands)
        for b in range(3):
            for ci, (n, iota) in enumerate(cands):
                single = inv.trial_pattern(
                    pts[b], n, iota, scene.grid.points, wave, params, scene.channels
                ).vector
                np.testing.assert_allclose(block[:, b * ncand + ci], single, rtol=1e-13)


class TestLambdaSharp:
    def test_one_by_one_rotation(self):
        np.testing.assert_allclose(inv.lambda_sharp(np.array([[1j]])), [[1.0]])

    def test_diagonal_case(self):
        np.testing.assert_allclose(inv.lambda_sharp(np.array([[1.0 + 1j]])), [[2.0]])

    def test_random_hermitian_psd(self, rng):
        L = random_operator(rng, 8)
        S = inv.lambda_sharp(L)
        assert np.abs(S - S.conj().T).max() <= 1e-12 * np.linalg.norm(S, 2)
        assert np.linalg.eigvalsh(S).min() >= -1e-12 * np.linalg.norm(S, 2)

    @settings(max_examples=100, deadline=None)
    @given(seed=st.integers(0, 10**6), n=st.integers(2, 32))
    def test_hermitian_psd_property(self, seed, n):
        rng = np.random.default_rng(seed)
        S = inv.lambda_sharp(random_operator(rng, n))
        scale = np.linalg.norm(S, 2)
        assert np.abs(S - S.conj().T).max() <= 1e-12 * scale
        assert np.linalg.eigvalsh(S).min() >= -1e-12 * scale

    def test_sqrt_with_clamping(self, rng):
        L = random_operator(rng, 6)
        S = inv.lambda_sharp(L)
        H = inv.sqrt_psd(S)
        np.testing.assert_allclose(H @ H, inv.clamp_psd(S), atol=1e-10 * np.linalg.norm(S, 2))


class TestTikhonov:
    def test_identity_closed_form(self):
        g = inv.tikhonov_solve(np.eye(2, dtype=complex), np.array([1.0, 0.0]), 1.0)
        np.testing.assert_allclose(g, [0.5, 0.0], rtol=1e-15)

    def test_small_eta_limit_inverts(self, rng):
        A = random_operator(rng, 5)
        x = rng.normal(size=5) + 1j * rng.normal(size=5)
        phi = A @ x
        g = inv.tikhonov_solve(A, phi, 1e-13)
        assert np.linalg.norm(g - x) / np.linalg.norm(x) < 1e-8

    def test_normal_equation_residual(self, rng):
        for _ in range(5):
            A = random_operator(rng, 6)
            phi = rng.normal(size=6) + 1j * rng.normal(size=6)
            eta = float(rng.uniform(0.01, 2.0))
            g = inv.tikhonov_solve(A, phi, eta)
            res = A.conj().T @ (A @ g) + eta * g - A.conj().T @ phi
            assert np.linalg.norm(res) / np.linalg.norm(A.conj().T @ phi) < 1e-10

    def test_minimizer_convexity_witness(self, rng):
        A = random_operator(rng, 6)
        phi = rng.normal(size=6) + 1j * rng.normal(size=6)
        eta = 0.3

        def J(g):
            return np.linalg.norm(A @ g - phi) ** 2 + eta * np.linalg.norm(g) ** 2

        g_star = inv.tikhonov_solve(A, phi, eta)
        for _ in range(10):
            v = rng.normal(size=6) + 1j * rng.normal(size=6)
            assert J(g_star + 1e-3 * v) > J(g_star)

    def test_nonpositive_eta_rejected(self):
        with pytest.raises(DomainError):
            inv.tikhonov_solve(np.eye(2, dtype=complex), np.ones(2), 0.0)


class TestMorozov:
    def test_identity_closed_form_exact(self):
        for delta in (0.05, 0.4, 3e-4):
            res = inv.morozov_eta(np.eye(2, dtype=complex), np.array([1.0, 0]), delta)
            assert res.bracketed
            assert abs(res.eta - delta) <= 1e-14 * delta

    def test_discrepancy_satisfied(self, rng):
        for _ in range(5):
            A = random_operator(rng, 7)
            phi = rng.normal(size=7) + 1j * rng.normal(size=7)
            delta = float(rng.uniform(0.02, 0.3))
            res = inv.morozov_eta(A, phi, delta)
            assert res.bracketed
            g = inv.tikhonov_solve(A, phi, res.eta)
            lhs = np.linalg.norm(A @ g - phi)
            rhs = delta * np.linalg.norm(g)
            assert abs(lhs - rhs) <= 1e-6 * rhs

    def test_monotone_in_delta(self, rng):
        for _ in range(20):
            A = random_operator(rng, 6)
            phi = rng.normal(size=6) + 1j * rng.normal(size=6)
            e1 = inv.morozov_eta(A, phi, 0.05).eta
            e2 = inv.morozov_eta(A, phi, 0.10).eta
            assert e2 > e1

    def test_zero_rhs_rejected(self):
        with pytest.raises(DomainError):
            inv.morozov_eta(np.eye(3, dtype=complex), np.zeros(3), 0.1)

    def test_unbracketed_flagged(self):
        # a right-hand side orthogonal to the column space keeps the
        # residual above delta*||g|| for every eta
        A = np.diag([1.0, 1.0, 0.0]).astype(complex)
        phi = np.array([0.0, 0.0, 1.0])
        res = inv.morozov_eta(A, phi, 1e-6)
        assert not res.bracketed


class TestGlsm:
    def test_unit_closed_form(self):
        g = inv.glsm_solve(
            np.eye(2, dtype=complex), np.eye(2, dtype=complex),
            np.array([1.0, 0.0]), 1.0, 0.0,
        )
        np.testing.assert_allclose(g, [0.5, 0.0], rtol=1e-14)

    def test_linear_system_residual(self, rng):
        for _ in range(5):
            L = random_operator(rng, 8)
            sharp = inv.lambda_sharp(L)
            phi = rng.normal(size=8) + 1j * rng.normal(size=8)
            alpha, delta = float(rng.uniform(0.05, 1.0)), float(rng.uniform(0.0, 0.2))
            g = inv.glsm_solve(L, sharp, phi, alpha, delta)
            half = inv.sqrt_psd(sharp)
            res = L.conj().T @ (L @ g - phi) + alpha * (
                half.conj().T @ (half @ g) + delta * g
            )
            assert np.linalg.norm(res) / np.linalg.norm(L.conj().T @ phi) < 1e-10

    def test_penalty_dominance(self, rng):
        L = random_operator(rng, 6)
        sharp = inv.lambda_sharp(L)
        phi = rng.normal(size=6) + 1j * rng.normal(size=6)
        norms = [
            np.linalg.norm(inv.glsm_solve(L, sharp, phi, alpha, 0.1))
            for alpha in (1.0, 1e2, 1e4, 1e6)
        ]
        assert all(b < a for a, b in zip(norms, norms[1:]))
        assert norms[-1] < 1e-4 * norms[0]

    def test_unitary_data_basis_invariance(self, rng):
        L = random_operator(rng, 6)
        sharp = inv.lambda_sharp(L)
        phi = rng.normal(size=6) + 1j * rng.normal(size=6)
        alpha, delta = 0.3, 0.05
        Q, _ = np.linalg.qr(random_operator(rng, 6))
        g = inv.glsm_solve(L, sharp, phi, alpha, delta)
        gq = inv.glsm_solve(Q @ L @ Q.conj().T, Q @ sharp @ Q.conj().T, Q @ phi, alpha, delta)

        def indicator(gv, sh):
            en = np.real(gv.conj() @ (inv.clamp_psd(sh) @ gv)) + delta * np.linalg.norm(gv) ** 2
            return 1.0 / np.sqrt(en)

        v1 = indicator(g, sharp)
        v2 = indicator(gq, Q @ sharp @ Q.conj().T)
        assert v2 == pytest.approx(v1, rel=1e-10)


class TestGlsmCoincidence:
    def test_identity_penalty_reduces_to_reciprocal_norm(self, rng):
        # with delta = 0 and an identity penalty the indicator collapses
        # to 1/||g||, the plain sampling functional
        L = random_operator(rng, 5)
        phi = rng.normal(size=5) + 1j * rng.normal(size=5)
        g = inv.glsm_solve(L, np.eye(5, dtype=complex), phi, 0.7, 0.0)
        pencil = inv.GlsmPencil(L, np.eye(5, dtype=complex), 0.0)
        assert pencil.indicator(g) == pytest.approx(1.0 / np.linalg.norm(g), rel=1e-10)


class TestRegularizationConfig:
    def test_validation(self):
        cfg = inv.RegularizationConfig(delta=0.05, bracket=(1e-10, 1e2))
        assert cfg.delta == 0.05
        with pytest.raises(DomainError):
            inv.RegularizationConfig(delta=-1.0)
        with pytest.raises(DomainError):
            inv.RegularizationConfig(delta=0.1, bracket=(1.0, 0.5))


class TestIndicatorScaling:
    def test_rhs_scaling_scales_solution_not_argmin(self, rng):
        A = random_operator(rng, 6)
        phi = rng.normal(size=6) + 1j * rng.normal(size=6)
        delta = 0.05
        eta1 = inv.morozov_eta(A, phi, delta).eta
        eta2 = inv.morozov_eta(A, 3.0 * phi, delta).eta
        assert eta2 == pytest.approx(eta1, rel=1e-10)
        g1 = inv.tikhonov_solve(A, phi, eta1)
        g2 = inv.tikhonov_solve(A, 3.0 * phi, eta2)
        assert np.linalg.norm(g2) == pytest.approx(3.0 * np.linalg.norm(g1), rel=1e-9)


class TestIndicatorAt:
    def test_single_candidate(self, scene, lam, wave, params):
        x0 = scene.sampling.points()[7]
        cands = [(scene.sampling.normals[0], 1)]
        out = inv.lsm_indicator_at(
            x0, cands, lam.data, 0.01, scene.grid.points, wave, params, scene.channels
        )
        phi = inv.trial_pattern(
            x0, cands[0][0], 1, scene.grid.points, wave, params, scene.channels
        ).vector
        eta = inv.morozov_eta(lam.data, phi, 0.01).eta
        g = inv.tikhonov_solve(lam.data, phi, eta)
        assert out.value == pytest.approx(1.0 / np.linalg.norm(g), rel=1e-12)

    def test_duplicated_candidates_identical(self, scene, lam, wave, params):
        x0 = scene.sampling.points()[11]
        cands = scene.sampling.candidates()
        out1 = inv.lsm_indicator_at(
            x0, cands, lam.data, 0.01, scene.grid.points, wave, params, scene.channels
        )
        out2 = inv.lsm_indicator_at(
            x0, cands + cands, lam.data, 0.01, scene.grid.points, wave, params,
            scene.channels,
        )
        assert out1.value == out2.value
        assert out1.iota == out2.iota


class TestIndicatorMap:
    def test_map_matches_per_point_calls(self, scene, lam, wave, params):
        imap = inv.indicator_map(scene, lam, "lsm", wave, params, threads=1)
        pts = scene.sampling.points()
        cands = scene.sampling.candidates()
        for b in (0, 13, 35):
            out = inv.lsm_indicator_at(
                pts[b], cands, lam.data, imap.delta, scene.grid.points, wave, params,
                scene.channels,
            )
            assert imap.raw[b] == pytest.approx(out.value, rel=1e-9)
            assert imap.argmin_iota[b] == out.iota

    def test_glsm_map_matches_direct_solves(self, scene, lam, wave, params):
        with pytest.warns(RuntimeWarning, match="self-adjoint"):
            imap = inv.indicator_map(scene, lam, "glsm", wave, params, threads=1)
        pts = scene.sampling.points()
        cands = scene.sampling.candidates()
        sharp = inv.lambda_sharp(lam.data)
        for b in (5, 22):
            out = inv.glsm_indicator_at(
                pts[b], cands, lam.data, sharp, imap.delta, scene.grid.points,
                wave, params, scene.channels,
            )
            assert imap.raw[b] == pytest.approx(out.value, rel=1e-5)

    def test_thread_count_does_not_change_values(self, scene, lam, wave, params):
        a = inv.indicator_map(scene, lam, "lsm", wave, params, threads=1)
        b = inv.indicator_map(scene, lam, "lsm", wave, params, threads=4)
        np.testing.assert_array_equal(a.raw, b.raw)

    def test_empty_scene_degenerate_map(self, wave, params):
        grid = build_sensing_grid([[[-1, -1, 0], [1, -1, 0]]], 5)
        sampling = build_sampling_grid((-1, 1, 0, 1), (3, 2), 2, (0, 1))
        scene0 = Scene(grid=grid, patches=(), sampling=sampling, channels="in-plane")
        lam0 = fw.assemble_lambda(scene0, wave, params)
        imap = inv.indicator_map(scene0, lam0, "lsm", wave, params, delta=1e-3, threads=1)
        assert imap.degenerate
        assert imap.degenerate_count == sampling.point_count

    def test_fixed_alpha_policy_runs(self, scene, lam, wave, params):
        with pytest.warns(RuntimeWarning):
            imap = inv.indicator_map(
                scene, lam, "glsm", wave, params, alpha_policy="fixed", threads=1
            )
        assert np.isfinite(imap.raw).all()

    def test_values_nonnegative_and_normalized(self, scene, lam, wave, params):
        imap = inv.indicator_map(scene, lam, "lsm", wave, params, threads=1)
        finite = np.isfinite(imap.raw)
        assert (imap.raw[finite] >= 0).all()
        assert np.nanmax(imap.normalized) == pytest.approx(1.0)
        assert imap.raw_max == pytest.approx(np.nanmax(imap.raw))

    def test_map_roundtrip(self, scene, lam, wave, params, tmp_path):
        imap = inv.indicator_map(scene, lam, "lsm", wave, params, threads=1)
        path = tmp_path / "map.csv"
        inv.save_indicator_map(imap, path)
        back = inv.load_indicator_map(path)
        np.testing.assert_array_equal(back.raw, imap.raw)
        np.testing.assert_array_equal(back.normalized, imap.normalized)
        np.testing.assert_array_equal(back.argmin_normal, imap.argmin_normal)
        assert back.method == imap.method
        assert back.delta == imap.delta


class TestSymmetrizedFactorization:
    def test_vanishing_attenuation_limit(self, params, scene):
        # with a very large permeability the coupling coefficient becomes
        # essentially real and the conjugated-coupling radiation operator
        # coincides with the plain transposed one: the assembled operator
        # equals the unconjugated triple product
        big_kappa = dataclasses.replace(params, kappa=1e10)
        w = solve_dispersion(big_kappa, 3.91)
        assert w.gamma.imag < 1e-9 * abs(w.gamma)
        lam = fw.assemble_lambda(scene, w, big_kappa, mode="local")
        S = fw._trace_operator(scene, w, big_kappa)
        cells = fw._collect_cells(scene.patches)
        W = np.repeat(cells.areas, 5)
        T = fw._local_transfer(scene.patches, w.omega)
        nc = S.shape[0] // 5
        TS = np.einsum("cij,cjk->cik", T, S.reshape(nc, 5, -1)).reshape(5 * nc, -1)
        product = (W[:, None] * S).T @ TS  # S^T W T S, no conjugation
        assert np.linalg.norm(lam.data - product) <= 1e-8 * np.linalg.norm(lam.data)
