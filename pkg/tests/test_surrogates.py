import itertools

import numpy as np
import pytest

import stableshap as ss
from tests.conftest import random_moments


class TestTaylorSurrogate:
    def test_center_value(self):
        rng = np.random.default_rng(0)
        x0 = rng.normal(size=3)
        sur = ss.TaylorSurrogate(x0=x0, value=1.2, grad=rng.normal(size=3))
        assert sur.predict(x0[None, :])[0] == pytest.approx(1.2)
        assert sur.order == 1

    def test_quadratic_evaluation(self):
        rng = np.random.default_rng(1)
        x0, J = rng.normal(size=2), rng.normal(size=2)
        H = np.array([[0.5, 0.2], [0.2, -0.3]])
        sur = ss.TaylorSurrogate(x0=x0, value=0.0, grad=J, hess=H)
        pts = rng.normal(size=(5, 2))
        manual = [(p - x0) @ J + 0.5 * (p - x0) @ H @ (p - x0) for p in pts]
        assert np.allclose(sur.predict(pts), manual)
        assert np.allclose(sur.gradient(pts[0]), J + H @ (pts[0] - x0))
        assert np.allclose(sur.hessian(pts[0]), H)

    def test_from_model_logistic(self, sim_small):
        _, model, _, queries = sim_small
        x = queries[0]
        sur = ss.TaylorSurrogate.from_model(model, x, order=2)
        assert sur.value == pytest.approx(model.predict(x[None, :])[0])
        assert np.allclose(sur.grad, ss.analytic_gradient(model, x))
        assert sur.order == 2

    def test_from_model_requires_capability(self, sim_small):
        background, _, _, _ = sim_small
        sim = ss.generate_sim_dataset(640, seed=3)
        forest = ss.train_tree_ensemble(background.rows, sim.labels[:600], n_trees=3, max_depth=3)
        with pytest.raises(ss.CapabilityError):
            ss.TaylorSurrogate.from_model(forest, np.zeros(10), order=1)

    def test_asymmetric_hessian_rejected(self):
        with pytest.raises(ValueError):
            ss.TaylorSurrogate(
                x0=np.zeros(2), value=0.0, grad=np.zeros(2),
                hess=np.array([[0.0, 1.0], [0.0, 0.0]]),
            )


class TestQuadraticShapley:
    def test_linear_reduction(self):
        moments = random_moments(4, seed=2)
        rng = np.random.default_rng(3)
        J, x = rng.normal(size=4), rng.normal(size=4)
        sur = ss.TaylorSurrogate(x0=x, value=0.0, grad=J, hess=np.zeros((4, 4)))
        assert np.allclose(ss.quadratic_shapley(sur, x, moments), J * (x - moments.mu))

    def test_bilinear_hand_example(self):
        # f = x1 x2, mu = 0, Sigma = I, x = (1, 1) has equal split (0.5, 0.5)
        moments = ss.FeatureMoments(mu=np.zeros(2), sigma=np.eye(2))
        x = np.ones(2)
        sur = ss.TaylorSurrogate(
            x0=x, value=1.0, grad=np.ones(2), hess=np.array([[0.0, 1.0], [1.0, 0.0]])
        )
        assert np.allclose(ss.quadratic_shapley(sur, x, moments), [0.5, 0.5])

    def test_matches_enumeration(self):
        rng = np.random.default_rng(4)
        d = 8
        moments = random_moments(d, seed=5)
        x = rng.normal(size=d)
        J = rng.normal(size=d)
        H = rng.normal(size=(d, d))
        H = 0.5 * (H + H.T)
        f_x = 0.3
        sur = ss.TaylorSurrogate(x0=x, value=f_x, grad=J, hess=H)
        closed = ss.quadratic_shapley(sur, x, moments)
        oracle = ss.exact_shapley(
            lambda S, xx: ss.exact_value_quadratic(J, H, f_x, S, xx, moments), d, x
        )
        assert np.max(np.abs(closed - oracle)) <= 1e-10

    def test_efficiency_against_empty_value(self):
        rng = np.random.default_rng(6)
        d = 5
        moments = random_moments(d, seed=7)
        x, J = rng.normal(size=d), rng.normal(size=d)
        H = rng.normal(size=(d, d))
        H = 0.5 * (H + H.T)
        sur = ss.TaylorSurrogate(x0=x, value=0.9, grad=J, hess=H)
        phi = ss.quadratic_shapley(sur, x, moments)
        v_empty = ss.exact_value_quadratic(J, H, 0.9, ss.Coalition.from_indices([], d), x, moments)
        assert phi.sum() == pytest.approx(0.9 - v_empty, abs=1e-10)

    def test_symmetry_of_exchangeable_features(self):
        # features 0 and 1 are exchangeable in (J, H, mu, Sigma, x)
        sigma = np.array([[1.0, 0.3, 0.2], [0.3, 1.0, 0.2], [0.2, 0.2, 1.0]])
        moments = ss.FeatureMoments(mu=np.zeros(3), sigma=sigma)
        x = np.array([0.7, 0.7, -0.2])
        J = np.array([1.1, 1.1, 0.4])
        H = np.array([[0.5, 0.1, 0.3], [0.1, 0.5, 0.3], [0.3, 0.3, 0.2]])
        sur = ss.TaylorSurrogate(x0=x, value=0.0, grad=J, hess=H)
        phi = ss.quadratic_shapley(sur, x, moments)
        assert phi[0] == pytest.approx(phi[1], abs=1e-12)

    def test_requires_hessian(self):
        moments = random_moments(2, seed=8)
        sur = ss.TaylorSurrogate(x0=np.zeros(2), value=0.0, grad=np.ones(2))
        with pytest.raises(ValueError):
            ss.quadratic_shapley(sur, np.zeros(2), moments)


class TestProjectionSet:
    def test_empty_coalition(self):
        moments = random_moments(3, seed=9)
        ps = ss.build_projection_set(ss.Coalition.from_indices([], 3), moments)
        assert np.allclose(ps.q, 0.0) and np.allclose(ps.r, 0.0)

    def test_identity_covariance_kills_r(self):
        moments = ss.FeatureMoments(mu=np.zeros(4), sigma=np.eye(4))
        for indices in ([0], [1, 2], [0, 1, 3]):
            ps = ss.build_projection_set(ss.Coalition.from_indices(indices, 4), moments)
            assert np.allclose(ps.r, 0.0)

    def test_two_feature_hand_example(self):
        moments = ss.FeatureMoments(mu=np.zeros(2), sigma=np.array([[1.0, 0.5], [0.5, 1.0]]))
        ps = ss.build_projection_set(ss.Coalition.from_indices([1], 2), moments)
        expected = np.zeros((2, 2))
        expected[0, 1] = 0.5
        assert np.allclose(ps.r, expected)
        assert np.allclose(ps.q, np.diag([0.0, 1.0]))

    def test_q_properties(self):
        moments = random_moments(5, seed=10)
        S = ss.Coalition.from_indices([1, 3], 5)
        comp = ss.Coalition.from_indices(S.complement, 5)
        ps = ss.build_projection_set(S, moments)
        ps_c = ss.build_projection_set(comp, moments)
        assert np.trace(ps.q) == pytest.approx(2)
        assert np.allclose(ps.q + ps_c.q, np.eye(5))
        # rows of r vanish on the coalition itself
        assert np.allclose(ps.r[[1, 3], :], 0.0)


def _dj_from_permutations(d, moments):
    """Average the prefix-chain increments over all d! orderings directly."""
    cache = {}

    def q_plus_r(indices):
        key = tuple(sorted(indices))
        if key not in cache:
            cache[key] = ss.build_projection_set(
                ss.Coalition.from_indices(list(key), d), moments
            ).q_plus_r()
        return cache[key]

    total = np.zeros((d, d, d))
    count = 0
    for perm in itertools.permutations(range(d)):
        prefix = []
        prev = q_plus_r(prefix)
        for j in perm:
            prefix.append(j)
            cur = q_plus_r(prefix)
            total[j] += cur - prev
            prev = cur
        count += 1
    return total / count


class TestDjPrecompute:
    def test_identity_covariance_gives_unit_matrices(self):
        moments = ss.FeatureMoments(mu=np.zeros(3), sigma=np.eye(3))
        dj = ss.compute_dj_exact(3, moments)
        for j in range(3):
            expected = np.zeros((3, 3))
            expected[j, j] = 1.0
            assert np.allclose(dj.matrices[j], expected)

    def test_two_feature_hand_enumeration(self):
        rho = 0.5
        moments = ss.FeatureMoments(mu=np.zeros(2), sigma=np.array([[1.0, rho], [rho, 1.0]]))
        dj = ss.compute_dj_exact(2, moments)
        d0 = np.array([[1.0, -rho / 2], [rho / 2, 0.0]])
        d1 = np.array([[0.0, rho / 2], [-rho / 2, 1.0]])
        assert np.allclose(dj.matrices[0], d0)
        assert np.allclose(dj.matrices[1], d1)

    def test_subset_form_equals_permutation_form(self):
        for d, seed in ((3, 11), (4, 12)):
            moments = random_moments(d, seed=seed)
            exact = ss.compute_dj_exact(d, moments)
            by_perm = _dj_from_permutations(d, moments)
            assert np.max(np.abs(exact.matrices - by_perm)) <= 1e-12

    def test_sum_is_identity(self):
        moments = random_moments(7, seed=13)
        dj = ss.compute_dj_exact(7, moments)
        assert np.max(np.abs(dj.matrices.sum(axis=0) - np.eye(7))) <= 1e-10

    def test_mc_identity_covariance_exact_any_size(self):
        moments = ss.FeatureMoments(mu=np.zeros(4), sigma=np.eye(4))
        dj = ss.compute_dj_mc(4, moments, n_perms=3, seed=0)
        exact = ss.compute_dj_exact(4, moments)
        assert np.allclose(dj.matrices, exact.matrices)

    def test_mc_sum_identity_every_sample_size(self):
        moments = random_moments(5, seed=14)
        for n_perms in (1, 2, 10):
            dj = ss.compute_dj_mc(5, moments, n_perms=n_perms, seed=3)
            assert np.max(np.abs(dj.matrices.sum(axis=0) - np.eye(5))) <= 1e-12

    def test_mc_converges_to_exact(self):
        moments = random_moments(4, seed=15)
        exact = ss.compute_dj_exact(4, moments)
        err = [
            np.max(np.abs(ss.compute_dj_mc(4, moments, n, seed=4).matrices - exact.matrices))
            for n in (50, 5000)
        ]
        assert err[1] < err[0]
        assert err[1] < 0.03

    def test_enumeration_cap(self):
        moments = random_moments(3, seed=16)
        with pytest.raises(ss.DimensionError):
            ss.compute_dj_exact(4, moments)
        with pytest.raises(ss.CapabilityError):
            ss.compute_dj_exact(11, random_moments(11, seed=17))


class TestLinearShapley:
    def test_zero_at_mean(self):
        moments = random_moments(4, seed=18)
        dj = ss.compute_dj_exact(4, moments)
        sur = ss.TaylorSurrogate(x0=moments.mu, value=0.0, grad=np.ones(4))
        assert np.allclose(ss.linear_shapley(sur, moments.mu, dj, moments), 0.0)

    def test_identity_covariance(self):
        moments = ss.FeatureMoments(mu=np.zeros(3), sigma=np.eye(3))
        dj = ss.compute_dj_exact(3, moments)
        rng = np.random.default_rng(19)
        beta, x = rng.normal(size=3), rng.normal(size=3)
        sur = ss.TaylorSurrogate(x0=x, value=0.0, grad=beta)
        assert np.allclose(ss.linear_shapley(sur, x, dj, moments), beta * x)

    def test_matches_enumeration_d6(self):
        d = 6
        moments = random_moments(d, seed=20)
        rng = np.random.default_rng(21)
        beta, b, x = rng.normal(size=d), 0.4, rng.normal(size=d)
        dj = ss.compute_dj_exact(d, moments)
        sur = ss.TaylorSurrogate(x0=x, value=b + beta @ x, grad=beta)
        closed = ss.linear_shapley(sur, x, dj, moments)
        oracle = ss.exact_shapley(
            lambda S, xx: ss.exact_value_linear(beta, b, S, xx, moments), d, x
        )
        assert np.max(np.abs(closed - oracle)) <= 1e-10

    def test_efficiency(self):
        d = 5
        moments = random_moments(d, seed=22)
        rng = np.random.default_rng(23)
        beta, x = rng.normal(size=d), rng.normal(size=d)
        dj = ss.compute_dj_exact(d, moments)
        sur = ss.TaylorSurrogate(x0=x, value=0.0, grad=beta)
        phi = ss.linear_shapley(sur, x, dj, moments)
        assert phi.sum() == pytest.approx(beta @ (x - moments.mu), abs=1e-10)

    def test_one_precompute_many_points(self):
        # D_j is x-independent: one precompute serves every query point
        d = 4
        moments = random_moments(d, seed=24)
        dj = ss.compute_dj_exact(d, moments)
        rng = np.random.default_rng(25)
        beta = rng.normal(size=d)
        for _ in range(100):
            x = rng.normal(size=d)
            sur = ss.TaylorSurrogate(x0=x, value=0.0, grad=beta)
            closed = ss.linear_shapley(sur, x, dj, moments)
            oracle = ss.exact_shapley(
                lambda S, xx: ss.exact_value_linear(beta, 0.0, S, xx, moments), d, x
            )
            assert np.max(np.abs(closed - oracle)) <= 1e-10


class TestDjCache:
    def test_round_trip(self, tmp_path):
        moments = random_moments(3, seed=26)
        dj = ss.compute_dj_exact(3, moments)
        key = ss.dj_cache_key(3, moments, None, None)
        path = tmp_path / "dj.json"
        ss.save_dj(dj, path, key)
        loaded = ss.load_dj(path, key)
        assert np.allclose(loaded.matrices, dj.matrices)
        assert loaded.exact == dj.exact

    def test_key_mismatch(self, tmp_path):
        moments = random_moments(3, seed=27)
        dj = ss.compute_dj_exact(3, moments)
        path = tmp_path / "dj.json"
        ss.save_dj(dj, path, "stale")
        with pytest.raises(ValueError):
            ss.load_dj(path, "fresh")

    def test_ensure_dj_uses_cache(self, tmp_path):
        moments = random_moments(3, seed=28)
        path = tmp_path / "dj.json"
        first = ss.ensure_dj(moments, cache_path=path)
        assert path.exists()
        second = ss.ensure_dj(moments, cache_path=path)
        assert np.array_equal(first.matrices, second.matrices)
        other = ss.ensure_dj(random_moments(3, seed=29), cache_path=path)
        assert not np.allclose(other.matrices, first.matrices)
