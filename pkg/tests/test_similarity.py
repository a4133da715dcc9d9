import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gamma as gamma_oracle

from dmgae import similarity as sim
from dmgae.similarity import (
    KernelParams,
    calibrate_sigma,
    calibrate_sigma_all,
    conditional_similarity,
    geodesic_distances,
    latent_similarity,
    preprocess_distances,
    similarity_pipeline,
    symmetrize,
    t_coefficient,
    t_kernel,
)


def coefficient_oracle(nu):
    return math.sqrt(2 * math.pi) * gamma_oracle((nu + 1) / 2) / (
        math.sqrt(nu * math.pi) * gamma_oracle(nu / 2)
    )


class TestKernel:
    def test_zero_distance_equals_coefficient(self):
        for nu in (0.5, 1.0, 7.0, 100.0):
            for sigma in (0.1, 1.0, 42.0):
                assert t_kernel(0.0, sigma, nu) == t_coefficient(nu)

    def test_c1_closed_form(self):
        assert abs(t_coefficient(1.0) - math.sqrt(2 * math.pi) / math.pi) < 1e-10
        assert abs(t_coefficient(1.0) - coefficient_oracle(1.0)) < 1e-10

    def test_coefficient_vs_gamma_oracle(self):
        for nu in (0.3, 1.0, 2.0, 10.0, 100.0):
            assert abs(t_coefficient(nu) - coefficient_oracle(nu)) < 1e-10 * coefficient_oracle(nu)

    def test_monotone_decreasing(self):
        assert t_kernel(1.0, 0.7, 3.0) > t_kernel(2.0, 0.7, 3.0)

    @settings(max_examples=200, deadline=None)
    @given(
        st.floats(min_value=0.0, max_value=100.0),
        st.floats(min_value=1e-3, max_value=1e3),
        st.floats(min_value=0.05, max_value=200.0),
    )
    def test_strictly_decreasing_property(self, d, sigma, nu):
        assert t_kernel(d, sigma, nu) > t_kernel(d + 0.5, sigma, nu)

    def test_heavier_tail_at_small_nu(self):
        # normalized by the coefficient, large distances keep more mass at nu=1
        d, sigma = 50.0, 1.0
        tail_1 = t_kernel(d, sigma, 1.0) / t_coefficient(1.0)
        tail_100 = t_kernel(d, sigma, 100.0) / t_coefficient(100.0)
        assert tail_100 < tail_1

    def test_negative_distance_clamped(self):
        assert t_kernel(-1e-9, 1.0, 5.0) == t_coefficient(5.0)


class TestGeodesicDistances:
    def test_edge_euclidean(self):
        x = np.array([[0.0, 0.0], [3.0, 4.0]])
        dm = geodesic_distances(x, np.array([[0, 1]]), "prior")
        assert np.isclose(dm.values[0, 1], 5.0)

    def test_non_edge_large(self):
        x = np.array([[0.0, 0.0], [3.0, 4.0]])
        dm = geodesic_distances(x, np.zeros((0, 2), dtype=int), "prior")
        assert dm.values[0, 1] == dm.large
        assert dm.large == sim.LARGE_FACTOR * 5.0

    def test_complete_mode_brute_force(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(3, 4))
        dm = geodesic_distances(x, None, "complete")
        expected = np.array(
            [[np.linalg.norm(x[i] - x[j]) for j in range(3)] for i in range(3)]
        )
        assert np.allclose(dm.values, expected, atol=1e-12)
        assert np.allclose(np.diag(dm.values), 0.0)


class TestPreprocess:
    def test_min_subtraction(self):
        vals = np.array(
            [
                [0.0, 5.0, 2.0, 7.0],
                [5.0, 0.0, 1.0, 1.0],
                [2.0, 1.0, 0.0, 3.0],
                [7.0, 1.0, 3.0, 0.0],
            ]
        )
        dm = sim.DistanceMatrix(values=vals, large=1e9)
        out, rho = preprocess_distances(dm)
        assert rho[0] == 2.0
        assert np.allclose(out[0], [0.0, 3.0, 0.0, 5.0])

    def test_all_equal_row(self):
        vals = np.array([[0.0, 4.0, 4.0], [4.0, 0.0, 4.0], [4.0, 4.0, 0.0]])
        dm = sim.DistanceMatrix(values=vals, large=1e9)
        out, rho = preprocess_distances(dm)
        assert np.allclose(out[0], [0.0, 0.0, 0.0])

    def test_isolated_row_unchanged(self):
        large = 1e6
        vals = np.array([[0.0, large, large], [large, 0.0, 1.0], [large, 1.0, 0.0]])
        dm = sim.DistanceMatrix(values=vals, large=large)
        out, rho = preprocess_distances(dm)
        assert rho[0] == 0.0
        assert np.allclose(out[0], vals[0])


class TestCalibration:
    def grid_scan_sigma(self, row, nu, q_p, steps=10**6):
        """Independent oracle: pick the grid sigma whose mass is closest to the target."""
        target = math.log2(q_p)
        sigmas = np.logspace(-10, 10, steps)
        d = np.maximum(row[1:], 0.0)  # entry 0 is the diagonal
        # chunked evaluation to bound memory
        best_sigma, best_err = None, np.inf
        for chunk in np.array_split(sigmas, 100):
            p = t_coefficient(nu) * np.power(
                1.0 + d[None, :] / (chunk[:, None] * nu), -(nu + 1.0) / 2.0
            )
            err = np.abs(p.sum(axis=1) - target)
            k = int(err.argmin())
            if err[k] < best_err:
                best_err, best_sigma = err[k], chunk[k]
        return best_sigma

    def test_synthetic_row_matches_grid_oracle(self):
        row = np.array([0.0, 0.0, 1.0, 2.0, 4.0])  # leading 0 is the diagonal
        skip = np.array([True, False, False, False, False])
        sigma, flagged = calibrate_sigma(row, 100.0, 4.0, skip=skip)
        assert not flagged
        oracle = self.grid_scan_sigma(row, 100.0, 4.0)
        assert abs(sigma - oracle) <= 1e-3 * max(1.0, oracle)

    def test_calibrated_mass_hits_target(self):
        rng = np.random.default_rng(3)
        rows = rng.uniform(0.0, 5.0, size=(20, 50))
        rows[:, 0] = 0.0
        skip = np.zeros_like(rows, dtype=bool)
        skip[:, 0] = True
        sigmas, flagged = calibrate_sigma_all(rows, 100.0, 15.0, skip=skip)
        assert not flagged.any()
        for i in range(len(rows)):
            mass = t_kernel(rows[i, 1:], sigmas[i], 100.0).sum()
            assert abs(mass - math.log2(15.0)) <= 1e-4

    def test_scale_equivariance(self):
        row = np.array([0.0, 0.5, 1.5, 3.0])
        skip = np.array([True, False, False, False])
        s1, _ = calibrate_sigma(row, 50.0, 4.0, skip=skip)
        s2, _ = calibrate_sigma(2.0 * row, 50.0, 4.0, skip=skip)
        assert abs(s2 - 2.0 * s1) <= 1e-6 * max(1.0, s1)

    def test_unreachable_target_flagged(self):
        # all-zero row: mass = m * C_nu independent of sigma; m*C < log2(q_p)
        row = np.zeros(3)
        skip = np.array([True, False, False])
        sigma, flagged = calibrate_sigma(row, 100.0, 16.0, skip=skip)
        assert flagged
        assert sigma == sim.SIGMA_HI

    def test_all_zero_row_reachable_not_flagged(self):
        row = np.zeros(9)  # 8 entries * C_100 ~ 8 > log2(4) = 2 -> reachable
        skip = np.zeros(9, dtype=bool)
        skip[0] = True
        _, flagged = calibrate_sigma(row, 100.0, 4.0, skip=skip)
        assert not flagged


class TestSymmetrize:
    def test_zero_case(self):
        p = np.array([[0.0, 0.0], [0.7, 0.0]])
        out = symmetrize(p)
        assert np.isclose(out[0, 1], 0.7)

    def test_fixed_point(self):
        p = np.full((2, 2), 0.5)
        np.fill_diagonal(p, 0.0)
        assert np.isclose(symmetrize(p)[0, 1], 0.5)

    def test_boundary_vanishes_at_one_one(self):
        p = np.array([[0.0, 1.0], [1.0, 0.0]])
        assert symmetrize(p)[0, 1] == 0.0

    @settings(max_examples=200, deadline=None)
    @given(st.integers(min_value=0, max_value=10**6))
    def test_symmetric_and_bounded(self, seed):
        rng = np.random.default_rng(seed)
        p = rng.uniform(0.0, 1.0, size=(6, 6))
        out = symmetrize(p)
        assert np.abs(out - out.T).max() <= 1e-12
        assert out.min() >= 0.0 and out.max() <= 1.0
        assert np.allclose(np.diag(out), 0.0)


class TestPipeline:
    def test_two_node_identical_features(self):
        x = np.zeros((2, 3))
        params = KernelParams(nu=100.0, q_p=1.5)
        p = similarity_pipeline(x, np.array([[0, 1]]), "prior", params, "input")
        # d = 0, so each conditional is min(C_nu, cap); joint = p + p - 2*p*p
        c = min(t_coefficient(100.0), sim.P_MAX)
        expected = c + c - 2 * c * c
        assert np.isclose(p[0, 1], expected, atol=1e-9)

    def test_latent_space_skips_calibration(self, monkeypatch):
        called = []

        def spy(*args, **kwargs):
            called.append(True)
            raise AssertionError("calibration must not run in the latent space")

        monkeypatch.setattr(sim, "calibrate_sigma_all", spy)
        x = np.random.default_rng(1).normal(size=(5, 3))
        similarity_pipeline(x, np.array([[0, 1], [2, 3]]), "prior",
                            KernelParams(nu=1.0, q_p=15.0), "latent")
        assert not called

    def test_matches_manual_composition(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=(5, 4))
        edges = np.array([[0, 1], [1, 2], [2, 3], [3, 4]])
        params = KernelParams(nu=100.0, q_p=3.0)
        got = similarity_pipeline(x, edges, "prior", params, "input")

        dm = geodesic_distances(x, edges, "prior")
        d_cond, _ = preprocess_distances(dm)
        sigma, _ = calibrate_sigma_all(d_cond, params.nu, params.q_p)
        p_cond = conditional_similarity(d_cond, sigma, params.nu)
        expected = symmetrize(p_cond)
        assert np.allclose(got, expected, atol=1e-12)

    def test_complete_mode_permutation_invariance(self):
        rng = np.random.default_rng(11)
        x = rng.normal(size=(6, 3))
        params = KernelParams(nu=100.0, q_p=4.0)
        p = similarity_pipeline(x, None, "complete", params, "input")
        perm = rng.permutation(6)
        p_perm = similarity_pipeline(x[perm], None, "complete", params, "input")
        assert np.allclose(p_perm, p[np.ix_(perm, perm)], atol=1e-9)

    def test_latent_similarity_matches_numpy_pipeline(self):
        rng = np.random.default_rng(5)
        z = rng.normal(size=(6, 4))
        edges = np.array([[0, 1], [1, 2], [3, 4], [4, 5]])
        params = KernelParams(nu=1.0, q_p=15.0)
        expected = similarity_pipeline(z, edges, "prior", params, "latent")

        mask = torch.zeros((6, 6), dtype=torch.bool)
        for i, j in edges:
            mask[i, j] = mask[j, i] = True
        got = latent_similarity(torch.from_numpy(z), mask, 1.0).numpy()
        assert np.allclose(got, expected, atol=1e-6)

    def test_export_tsv_round_trip(self, tmp_path):
        p = np.random.default_rng(0).uniform(size=(4, 4))
        path = tmp_path / "p.tsv"
        sim.export_tsv(p, path)
        back = np.loadtxt(path)
        assert np.allclose(back, p, atol=1e-9)
