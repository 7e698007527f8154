import numpy as np
import pytest

import stableshap as ss
from tests.conftest import random_moments


def _coalition(indices, d):
    return ss.Coalition.from_indices(indices, d)


class TestConditionalGaussian:
    def test_identity_covariance_no_effect(self):
        moments = ss.FeatureMoments(mu=np.array([1.0, 2.0, 3.0]), sigma=np.eye(3))
        mean, cov = ss.conditional_gaussian(moments, _coalition([1], 3), np.array([0.0, 9.0, 0.0]))
        assert np.allclose(mean, [1.0, 3.0])
        assert np.allclose(cov, np.eye(2))

    def test_two_feature_hand_example(self):
        # Sigma = [[1, .5], [.5, 1]], condition on x_2 = 2:
        # mean of X_1 = 0.5 * 2 = 1.0, variance = 1 - 0.25 = 0.75
        moments = ss.FeatureMoments(mu=np.zeros(2), sigma=np.array([[1.0, 0.5], [0.5, 1.0]]))
        mean, cov = ss.conditional_gaussian(moments, _coalition([1], 2), np.array([0.0, 2.0]))
        assert mean[0] == pytest.approx(1.0)
        assert cov[0, 0] == pytest.approx(0.75)

    def test_empty_coalition_returns_priors(self):
        moments = random_moments(4, seed=0)
        mean, cov = ss.conditional_gaussian(moments, _coalition([], 4), np.zeros(4))
        assert np.allclose(mean, moments.mu)
        assert np.allclose(cov, moments.sigma)

    def test_full_coalition_empty_output(self):
        moments = random_moments(3, seed=1)
        mean, cov = ss.conditional_gaussian(moments, _coalition([0, 1, 2], 3), np.zeros(3))
        assert mean.size == 0 and cov.size == 0

    def test_schur_complement_psd(self):
        moments = random_moments(6, seed=2)
        rng = np.random.default_rng(3)
        x = rng.normal(size=6)
        for indices in ([0], [1, 4], [0, 2, 3, 5]):
            _, cov = ss.conditional_gaussian(moments, _coalition(indices, 6), x)
            assert np.min(np.linalg.eigvalsh(cov)) > -1e-10

    def test_ridge_on_rank_deficient_block(self):
        # duplicated feature: Sigma_SS singular for S containing the pair,
        # the ridge keeps conditioning usable
        base = random_moments(3, seed=30)
        sigma = np.zeros((4, 4))
        sigma[:3, :3] = base.sigma
        sigma[3, :3] = base.sigma[0, :3]
        sigma[:3, 3] = base.sigma[:3, 0]
        sigma[3, 3] = base.sigma[0, 0]
        moments = ss.FeatureMoments(mu=np.r_[base.mu, base.mu[0]], sigma=sigma)
        x = np.array([0.5, -0.2, 0.1, 0.5])
        mean, cov = ss.conditional_gaussian(moments, _coalition([0, 3], 4), x)
        assert np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))
        assert np.min(np.linalg.eigvalsh(cov)) > -1e-8


class TestExactValues:
    def test_linear_full_and_empty(self):
        moments = random_moments(4, seed=4)
        rng = np.random.default_rng(5)
        beta, b, x = rng.normal(size=4), 0.7, rng.normal(size=4)
        assert ss.exact_value_linear(beta, b, _coalition(range(4), 4), x, moments) == pytest.approx(
            beta @ x + b
        )
        assert ss.exact_value_linear(beta, b, _coalition([], 4), x, moments) == pytest.approx(
            beta @ moments.mu + b
        )

    def test_linear_hand_example(self):
        moments = ss.FeatureMoments(mu=np.zeros(2), sigma=np.array([[1.0, 0.5], [0.5, 1.0]]))
        x = np.array([0.0, 2.0])
        v = ss.exact_value_linear(np.array([1.0, 0.0]), 0.3, _coalition([1], 2), x, moments)
        assert v == pytest.approx(1.0 + 0.3)  # conditional mean of X_1 is 1.0

    def test_quadratic_full_coalition(self):
        moments = random_moments(3, seed=6)
        v = ss.exact_value_quadratic(
            np.ones(3), np.eye(3), 2.5, _coalition(range(3), 3), np.zeros(3), moments
        )
        assert v == pytest.approx(2.5)

    def test_quadratic_reduces_to_linear_when_h_zero(self):
        d = 4
        rng = np.random.default_rng(7)
        sigma = np.diag(rng.uniform(0.5, 2.0, d))
        moments = ss.FeatureMoments(mu=rng.normal(size=d), sigma=sigma)
        beta, x = rng.normal(size=d), rng.normal(size=d)
        f_x = float(beta @ x + 0.1)
        for indices in ([], [1], [0, 3]):
            S = _coalition(indices, d)
            quad = ss.exact_value_quadratic(beta, np.zeros((d, d)), f_x, S, x, moments)
            lin = ss.exact_value_linear(beta, 0.1, S, x, moments)
            assert quad == pytest.approx(lin)

    def test_bilinear_empty_coalition_zero(self):
        # f = x1 x2 at x = (1, 1) with mu = 0, Sigma = I: v(empty) = 0,
        # cross-checked by marginal-product Monte Carlo
        moments = ss.FeatureMoments(mu=np.zeros(2), sigma=np.eye(2))
        x = np.ones(2)
        J = np.array([1.0, 1.0])  # gradient of x1 x2 at (1, 1)
        H = np.array([[0.0, 1.0], [1.0, 0.0]])
        v = ss.exact_value_quadratic(J, H, 1.0, _coalition([], 2), x, moments)
        assert v == pytest.approx(0.0, abs=1e-12)
        rng = np.random.default_rng(8)
        draws = rng.standard_normal((1_000_000, 2))  # independent marginals
        diff = draws - x
        g = 1.0 + diff @ J + 0.5 * np.einsum("ij,jk,ik->i", diff, H, diff)
        se = g.std(ddof=1) / np.sqrt(g.size)
        assert abs(g.mean() - v) <= 4 * se

    def test_symmetry_required(self):
        moments = random_moments(2, seed=9)
        with pytest.raises(ValueError):
            ss.exact_value_quadratic(
                np.ones(2), np.array([[0.0, 1.0], [0.0, 0.0]]), 0.0,
                _coalition([], 2), np.zeros(2), moments,
            )


class _RecordingModel:
    """Captures every batch passed to predict; proves sample sharing."""

    def __init__(self):
        self.batches = []

    def predict(self, points):
        self.batches.append(np.array(points))
        return points.sum(axis=1)


class TestPairedEvaluation:
    def test_full_coalition_exact(self, sim_small):
        _, model, moments, queries = sim_small
        x = queries[0]
        sur = ss.TaylorSurrogate.from_model(model, x, order=1)
        cfg = ss.ValueFunctionConfig(mode="correlated", samples_per_coalition=3)
        pv = ss.evaluate_value(model, sur, _coalition(range(10), 10), x, cfg, moments=moments)
        f_x = model.predict(x[None, :])[0]
        assert pv.v_model == pytest.approx(f_x)
        assert pv.v_approx == pytest.approx(f_x)  # surrogate centered at x
        assert pv.per_sample_model.size == 0

    def test_constant_model(self):
        moments = random_moments(3, seed=10, unit_diag=True)
        const = ss.TaylorSurrogate(x0=np.zeros(3), value=0.6, grad=np.zeros(3))
        cfg = ss.ValueFunctionConfig(mode="correlated", samples_per_coalition=4, seed=1)
        for indices in ([], [1], [0, 2]):
            pv = ss.evaluate_value(const, const, _coalition(indices, 3), np.ones(3), cfg, moments=moments)
            assert pv.v_model == pytest.approx(0.6)
            assert pv.v_approx == pytest.approx(0.6)

    def test_shared_completion_points(self):
        moments = random_moments(4, seed=11)
        model = _RecordingModel()
        surrogate = _RecordingModel()
        cfg = ss.ValueFunctionConfig(mode="correlated", samples_per_coalition=5, seed=2)
        vf = ss.MonteCarloPairedValues(model, surrogate, np.zeros(4), cfg, moments=moments)
        vf.values_batch(np.array([[1, 0, 0, 1], [0, 1, 1, 0]], dtype=np.int8), seed=3)
        assert np.array_equal(model.batches[0], surrogate.batches[0])

    def test_linear_model_conditional_mean(self):
        # sampled value within 4 standard errors of the exact conditional one
        d = 3
        moments = random_moments(d, seed=12)
        rng = np.random.default_rng(13)
        beta = rng.normal(size=d)
        model = ss.TaylorSurrogate(x0=np.zeros(d), value=0.2, grad=beta)
        x = rng.normal(size=d)
        S = _coalition([0], d)
        cfg = ss.ValueFunctionConfig(mode="correlated", samples_per_coalition=100_000, seed=4)
        pv = ss.evaluate_value(model, model, S, x, cfg, moments=moments)
        exact = ss.exact_value_linear(beta, 0.2, S, x, moments)
        se = pv.per_sample_model.std(ddof=1) / np.sqrt(pv.per_sample_model.size)
        assert abs(pv.v_model - exact) <= 4 * se

    def test_independent_mode_quadratic_consistency(self, sim_small):
        background, _, moments, queries = sim_small
        rng = np.random.default_rng(14)
        d = background.d
        J = rng.normal(size=d)
        H = rng.normal(size=(d, d)) * 0.2
        H = 0.5 * (H + H.T)
        x = queries[2]
        model = ss.TaylorSurrogate(x0=x, value=0.4, grad=J, hess=H)
        S = _coalition([0, 3, 7], d)
        cfg = ss.ValueFunctionConfig(mode="independent", samples_per_coalition=100_000, seed=5)
        pv = ss.evaluate_value(model, model, S, x, cfg, background=background)
        exact = ss.exact_value_quadratic(J, H, 0.4, S, x, moments)
        se = pv.per_sample_model.std(ddof=1) / np.sqrt(pv.per_sample_model.size)
        assert abs(pv.v_model - exact) <= 4 * se

    def test_empty_value_x_independent(self, sim_small):
        background, model, moments, queries = sim_small
        sur0 = ss.TaylorSurrogate.from_model(model, queries[0], order=1)
        sur1 = ss.TaylorSurrogate.from_model(model, queries[1], order=1)
        empty = _coalition([], 10)
        for mode, kwargs in (
            ("independent", {"background": background}),
            ("correlated", {"moments": moments}),
        ):
            cfg = ss.ValueFunctionConfig(mode=mode, samples_per_coalition=8, seed=6)
            a = ss.evaluate_value(model, sur0, empty, queries[0], cfg, seed=99, **kwargs)
            b = ss.evaluate_value(model, sur1, empty, queries[1], cfg, seed=99, **kwargs)
            assert a.v_model == pytest.approx(b.v_model)

    def test_config_validation(self):
        with pytest.raises(ss.ConfigurationError):
            ss.ValueFunctionConfig(mode="other")
        with pytest.raises(ss.ConfigurationError):
            ss.ValueFunctionConfig(samples_per_coalition=0)
        moments = random_moments(2, seed=15)
        model = ss.TaylorSurrogate(x0=np.zeros(2), value=0.0, grad=np.ones(2))
        with pytest.raises(ss.ConfigurationError):
            ss.MonteCarloPairedValues(
                model, model, np.zeros(2), ss.ValueFunctionConfig(mode="independent")
            )
        with pytest.raises(ss.ConfigurationError):
            ss.MonteCarloPairedValues(
                model, model, np.zeros(2), ss.ValueFunctionConfig(mode="correlated")
            )

    def test_paired_value_invariant(self):
        with pytest.raises(ValueError):
            ss.PairedValue(
                v_model=1.0,
                v_approx=0.0,
                per_sample_model=np.array([0.0, 0.0]),
                per_sample_approx=np.array([0.0, 0.0]),
            )


class TestExactPairedValues:
    def test_zero_noise_and_caching(self):
        moments = random_moments(3, seed=16)
        rng = np.random.default_rng(17)
        beta, x = rng.normal(size=3), rng.normal(size=3)
        ex = ss.ExactPairedValues(3, lambda S: ss.exact_value_linear(beta, 0.0, S, x, moments))
        masks = np.array([[1, 0, 0], [1, 0, 0], [0, 1, 1]], dtype=np.int8)
        batch = ex.values_batch(masks)
        assert batch.v_model[0] == batch.v_model[1]
        assert np.all(batch.per_sample_model.std(axis=1) == 0.0)
        vm, va = ex.values_full()
        assert vm == pytest.approx(beta @ x)
        assert vm == va
