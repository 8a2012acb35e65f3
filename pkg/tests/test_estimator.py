"""Batch and full-batch estimator contracts.

Key oracles: the unpacked per-sample sum form of the gradient estimator, a
naive two-pass covariance for the Gram scaling, central finite differences
of the exact energy for the exact gradient, and hand-evaluated clipping.
"""

import numpy as np
import pytest

from spinvmc import (
    LatticeModel,
    RBMAnsatz,
    SampleBatch,
    TableWavefunction,
    build_batch,
    clip_local_energies,
    direct_sample,
    exact_ground_state,
    full_batch_gradient,
    full_batch_quantities,
    gradient_estimate,
    kernel_residual,
)
from spinvmc.estimator import batch_from_scores


def make_batch(rng, n_sites=6, n_samples=32, scale=0.3, seed=0, h=1.0):
    model = LatticeModel("tfi", "chain", n_sites, field_h=h)
    ansatz = RBMAnsatz(n_sites, density=2)
    theta = ansatz.init_parameters(seed=seed, scale=scale)
    psi = ansatz.bind(theta)
    X = direct_sample(psi, n_sites, n_samples, rng)
    return model, ansatz, theta, psi, build_batch(model, psi, None, X)


class TestBuildBatch:
    def test_eigenstate_gives_zero_ebar(self):
        model = LatticeModel("tfi", "chain", 5, field_h=1.0)
        e0, state = exact_ground_state(model)
        psi = TableWavefunction(state, 5)
        X = direct_sample(psi, 5, 50, np.random.default_rng(1))
        batch = build_batch(model, psi, None, X)
        np.testing.assert_allclose(batch.Ebar, 0.0, atol=1e-10)
        assert batch.energy_mean == pytest.approx(e0, abs=1e-9)
        # zero-parameter wavefunction: the estimator is an empty vector
        assert gradient_estimate(batch).shape == (0,)

    def test_two_sample_batch_columns_equal_and_opposite(self, rng):
        model = LatticeModel("tfi", "chain", 4, field_h=0.8)
        ansatz = RBMAnsatz(4, density=2)
        theta = ansatz.init_parameters(seed=5, scale=0.4)
        psi = ansatz.bind(theta)
        X = np.array([[1.0, 1.0, -1.0, 1.0], [-1.0, 1.0, 1.0, -1.0]])
        batch = build_batch(model, psi, None, X)
        # equal and opposite up to the single rounding of the mean subtraction
        np.testing.assert_allclose(batch.O[:, 0], -batch.O[:, 1], atol=5e-16)
        np.testing.assert_allclose(batch.O @ np.ones(2), 0.0, atol=5e-16)

    def test_centering_invariants(self, rng):
        _, _, _, _, batch = make_batch(rng)
        colsum = batch.O @ np.ones(batch.n_samples)
        scale = np.abs(batch.O).max()
        assert np.abs(colsum).max() <= 1e-10 * max(scale, 1.0)
        assert abs(np.sqrt(batch.n_samples - 1) * batch.Ebar.sum()) <= 1e-10 * max(
            np.abs(batch.local_energies).max(), 1.0
        )

    def test_minimum_batch_size(self, rng):
        model = LatticeModel("tfi", "chain", 3)
        ansatz = RBMAnsatz(3, density=1)
        psi = ansatz.bind(ansatz.init_parameters(0))
        with pytest.raises(ValueError):
            build_batch(model, psi, None, np.ones((1, 3)))

    def test_gram_matches_two_pass_covariance(self, rng):
        # (N_s - 1) O O^T equals the unscaled sample covariance of the raw gradients
        _, ansatz, theta, psi, batch = make_batch(rng, n_samples=24)
        G = ansatz.grad_log_abs_psi_batch(theta, batch.configs)
        cov = np.cov(G, ddof=1)  # naive two-pass oracle
        np.testing.assert_allclose(batch.O @ batch.O.T, cov, rtol=1e-12, atol=1e-14)


class TestGradientEstimate:
    def test_zero_ebar_gives_zero(self):
        O = np.array([[0.5, -0.5], [0.1, -0.1]])
        batch = SampleBatch(
            configs=np.zeros((2, 1)), local_energies=np.zeros(2), energy_mean=0.0,
            O=O, Ebar=np.zeros(2), raw_energy_mean=0.0, raw_energy_variance=0.0,
        )
        np.testing.assert_array_equal(gradient_estimate(batch), np.zeros(2))

    def test_hand_instance(self):
        # O = [[c, -c], [0, 0]], Ebar = (e, -e)  ->  g = 2 O Ebar = (4 c e, 0)
        c, e = 0.7, 1.3
        batch = SampleBatch(
            configs=np.zeros((2, 1)), local_energies=np.zeros(2), energy_mean=0.0,
            O=np.array([[c, -c], [0.0, 0.0]]), Ebar=np.array([e, -e]),
            raw_energy_mean=0.0, raw_energy_variance=0.0,
        )
        np.testing.assert_allclose(gradient_estimate(batch), [4 * c * e, 0.0], rtol=1e-15)

    def test_matches_unpacked_sum_form(self, rng):
        # 2/(N_s-1) sum_i (E_i - mean)(grad_i - mean_grad)
        model, ansatz, theta, psi, batch = make_batch(rng, n_samples=40)
        from spinvmc import local_energies

        G = ansatz.grad_log_abs_psi_batch(theta, batch.configs)
        eloc = local_energies(model, psi, batch.configs)
        n = batch.n_samples
        direct = np.zeros(ansatz.n_params)
        for i in range(n):
            direct += (
                2.0 / (n - 1)
                * (eloc[i] - eloc.mean())
                * (G[:, i] - G.mean(axis=1))
            )
        np.testing.assert_allclose(gradient_estimate(batch), direct, rtol=1e-11, atol=1e-12)


class TestClipLocalEnergies:
    def test_constant_vector_unchanged(self):
        v = np.full(7, 3.25)
        np.testing.assert_array_equal(clip_local_energies(v, 5.0), v)

    def test_hand_case(self):
        # (0,0,0,100), 1 std: m = 25, s = 50, only the outlier is clamped to m + s
        out = clip_local_energies(np.array([0.0, 0.0, 0.0, 100.0]), 1.0)
        np.testing.assert_allclose(out, [0.0, 0.0, 0.0, 75.0], atol=1e-12)

    def test_infinite_threshold_is_identity(self, rng):
        v = rng.standard_normal(20)
        np.testing.assert_array_equal(clip_local_energies(v, np.inf), v)

    def test_rejects_short_input(self):
        with pytest.raises(ValueError):
            clip_local_energies(np.array([1.0]), 5.0)

    def test_clipping_applied_before_centering(self, rng):
        model, ansatz, theta, psi, _ = make_batch(rng, scale=0.8, seed=7)
        X = direct_sample(psi, 6, 30, np.random.default_rng(3))
        raw = build_batch(model, psi, None, X)
        clipped = build_batch(model, psi, None, X, clip_std=0.5)
        expected = clip_local_energies(raw.local_energies, 0.5)
        np.testing.assert_allclose(clipped.local_energies, expected, rtol=1e-14)
        assert clipped.energy_mean == pytest.approx(expected.mean(), rel=1e-14)
        # raw statistics are preserved for the records
        assert clipped.raw_energy_mean == pytest.approx(raw.energy_mean, rel=1e-14)


class TestFullBatchQuantities:
    def test_eigenstate_is_stationary(self):
        model = LatticeModel("heisenberg", "chain", 4)
        e0, state = exact_ground_state(model)
        psi = TableWavefunction(state, 4)
        fbq = full_batch_quantities(model, psi)
        assert fbq.energy == pytest.approx(e0, abs=1e-10)
        assert fbq.gradient.shape == (0,)

    def test_gradient_matches_finite_differences(self):
        model = LatticeModel("tfi", "chain", 6, field_h=1.0)
        ansatz = RBMAnsatz(6, density=2)
        theta = ansatz.init_parameters(seed=11, scale=0.3)
        fbq = full_batch_quantities(model, ansatz.bind(theta))
        h = 1e-5
        for i in range(ansatz.n_params):
            tp, tm = theta.copy(), theta.copy()
            tp[i] += h
            tm[i] -= h
            lp, _ = full_batch_gradient(model, ansatz.bind(tp))
            lm, _ = full_batch_gradient(model, ansatz.bind(tm))
            fd = (lp - lm) / (2 * h)
            assert fd == pytest.approx(fbq.gradient[i], abs=1e-5)

    def test_sr_matrix_symmetric_psd(self, rng):
        model, _, _, psi, _ = make_batch(rng, n_sites=5, seed=2)
        fbq = full_batch_quantities(model, psi)
        S = fbq.sr_matrix
        assert np.abs(S - S.T).max() <= 1e-10 * max(np.abs(S).max(), 1.0)
        w = np.linalg.eigvalsh(S)
        assert w.min() >= -1e-10 * max(w.max(), 1.0)

    def test_full_gradient_lies_in_sr_range(self, rng):
        model = LatticeModel("tfi", "chain", 6, field_h=1.0)
        ansatz = RBMAnsatz(6, density=2)
        theta = ansatz.init_parameters(seed=8, scale=0.3)
        fbq = full_batch_quantities(model, ansatz.bind(theta))
        assert kernel_residual(fbq.centered_factor, fbq.gradient) <= 1e-10

    def test_batch_gradient_lies_in_sampled_range(self, rng):
        _, _, _, _, batch = make_batch(rng, n_samples=20, seed=4)
        g = gradient_estimate(batch)
        assert kernel_residual(batch.O, g) <= 1e-10

    def test_size_limit(self):
        model = LatticeModel("tfi", "chain", 15)
        ansatz = RBMAnsatz(15, density=1)
        with pytest.raises(ValueError):
            full_batch_quantities(model, ansatz.bind(ansatz.init_parameters(0)))

    def test_light_gradient_path_matches(self, rng):
        model, _, _, psi, _ = make_batch(rng, n_sites=5, seed=6)
        fbq = full_batch_quantities(model, psi)
        energy, g = full_batch_gradient(model, psi)
        assert energy == fbq.energy
        np.testing.assert_array_equal(g, fbq.gradient)


class TestBatchFromScores:
    def test_centering_and_shapes(self, rng):
        scores = rng.standard_normal((10, 4))
        eloc = rng.standard_normal(10)
        batch = batch_from_scores(scores, eloc)
        assert batch.O.shape == (4, 10)
        np.testing.assert_allclose(batch.O @ np.ones(10), 0.0, atol=1e-12)
        np.testing.assert_allclose(
            batch.O @ batch.O.T, np.cov(scores.T, ddof=1), rtol=1e-12, atol=1e-13
        )


class TestUnbiasednessSmoke:
    @pytest.mark.slow
    def test_gradient_estimator_mean_tracks_exact_gradient(self):
        # light version of the acceptance-scale check: 6 sigma, 2000 batches
        model = LatticeModel("tfi", "chain", 4, field_h=1.0)
        ansatz = RBMAnsatz(4, density=2)
        theta = ansatz.init_parameters(seed=19, scale=0.4)
        psi = ansatz.bind(theta)
        _, g_exact = full_batch_gradient(model, psi)
        rng = np.random.default_rng(77)
        B = 2000
        acc = np.zeros(ansatz.n_params)
        acc2 = np.zeros(ansatz.n_params)
        for _ in range(B):
            X = direct_sample(psi, 4, 16, rng)
            g = gradient_estimate(build_batch(model, psi, None, X))
            acc += g
            acc2 += g * g
        mean = acc / B
        se = np.sqrt((acc2 / B - mean**2) / B)
        assert np.all(np.abs(mean - g_exact) <= 6 * se + 1e-12)
