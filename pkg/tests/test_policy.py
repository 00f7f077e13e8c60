"""Unit tests for the Gaussian-policy primitives: weights, updates, bounding."""

import math

import numpy as np
import pytest

from smpc import (
    GaussianPolicy,
    InputError,
    ParameterError,
    bound_covariance,
    elite_uniform_weights,
    exploration_magnitude,
    log_rank_weights,
    shift_policy,
    softmax_weights,
    weighted_cov_update,
    weighted_mean_update,
)
from smpc.policy import weight_entropy

from conftest import power_iteration_top_eig


def random_spd(rng, m, scale=1.0):
    a = rng.normal(size=(m, m))
    return a @ a.T + scale * np.eye(m)


class TestSoftmaxWeights:
    def test_equal_costs_are_uniform(self):
        w = softmax_weights([5.0, 5.0, 5.0], 0.1)
        np.testing.assert_allclose(w, [1 / 3, 1 / 3, 1 / 3], atol=1e-15)

    def test_two_cost_case_matches_scalar_evaluation(self):
        w = softmax_weights([0.0, 0.1], 0.1)
        # Independent scalar evaluation of the weight definition.
        raw = [math.exp(-(0.0 - 0.0) / 0.1), math.exp(-(0.1 - 0.0) / 0.1)]
        expected = [r / sum(raw) for r in raw]
        np.testing.assert_allclose(w, expected, atol=1e-15)
        np.testing.assert_allclose(w, [0.73105858, 0.26894142], atol=1e-7)

    def test_tiny_temperature_concentrates_on_argmin(self):
        w = softmax_weights([1.0, 2.0, 3.0], 1e-9)
        np.testing.assert_allclose(w, [1.0, 0.0, 0.0], atol=1e-12)

    def test_translation_invariance(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            costs = rng.normal(size=12) * 10
            for k in (1.0, -3.5, 1e4):
                np.testing.assert_allclose(
                    softmax_weights(costs, 0.3), softmax_weights(costs + k, 0.3), atol=1e-12
                )

    def test_infinite_cost_gets_zero_weight(self):
        w = softmax_weights([1.0, np.inf, 2.0], 0.5)
        assert w[1] == 0.0
        np.testing.assert_allclose(w.sum(), 1.0, atol=1e-12)

    def test_all_infinite_rejected(self):
        with pytest.raises(InputError):
            softmax_weights([np.inf, np.inf], 0.5)

    def test_nan_rejected(self):
        with pytest.raises(InputError):
            softmax_weights([1.0, np.nan], 0.5)

    def test_bad_temperature_rejected(self):
        for lam in (0.0, -1.0, np.nan):
            with pytest.raises(ParameterError):
                softmax_weights([1.0, 2.0], lam)

    def test_argmin_gets_largest_weight(self):
        rng = np.random.default_rng(7)
        for _ in range(300):
            costs = rng.normal(size=rng.integers(2, 40)) * rng.uniform(0.1, 50)
            w = softmax_weights(costs, rng.uniform(0.01, 5.0))
            assert np.argmax(w) == np.argmin(costs)
            assert w.min() >= 0.0
            assert abs(w.sum() - 1.0) <= 1e-9


class TestLogRankWeights:
    def test_single_sample(self):
        w = log_rank_weights(1)
        assert w.shape == (1,)
        assert abs(w[0] - 1.0) <= 1e-9

    @pytest.mark.parametrize("count", [1, 3, 10])
    def test_matches_independent_scalar_evaluation(self, count):
        raw = [math.log((count + 1) / i) for i in range(1, count + 1)]
        expected = [r / (sum(raw) + 1e-10) for r in raw]
        np.testing.assert_allclose(log_rank_weights(count), expected, atol=1e-12)

    def test_strictly_decreasing(self):
        for count in (2, 5, 17, 64):
            w = log_rank_weights(count)
            assert np.all(np.diff(w) < 0)

    def test_rank_one_is_double_of_rank_two_for_three(self):
        w = log_rank_weights(3)  # log(4)/log(2) == 2 exactly
        np.testing.assert_allclose(w[0], 2 * w[1], rtol=1e-12)

    def test_zero_rejected(self):
        with pytest.raises(ParameterError):
            log_rank_weights(0)


class TestEliteUniformWeights:
    def test_basic(self):
        np.testing.assert_allclose(elite_uniform_weights(5, 2), [0.5, 0.5, 0, 0, 0])

    def test_all_elite(self):
        np.testing.assert_allclose(elite_uniform_weights(3, 3), [1 / 3] * 3)

    def test_single_elite(self):
        np.testing.assert_allclose(elite_uniform_weights(4, 1), [1, 0, 0, 0])

    def test_bad_counts_rejected(self):
        with pytest.raises(ParameterError):
            elite_uniform_weights(4, 0)
        with pytest.raises(ParameterError):
            elite_uniform_weights(4, 5)


class TestWeightedMeanUpdate:
    def test_vanishing_learning_rate_keeps_mean(self):
        rng = np.random.default_rng(1)
        mean = rng.normal(size=(6, 2))
        samples = rng.normal(size=(8, 6, 2))
        w = np.full(8, 1 / 8)
        out = weighted_mean_update(mean, samples, w, 1e-6)
        np.testing.assert_allclose(out, mean, rtol=1e-5)

    def test_scalar_hand_case(self):
        mean = np.zeros((1, 1))
        samples = np.array([[[1.0]], [[3.0]]])
        out = weighted_mean_update(mean, samples, [0.5, 0.5], 0.5)
        assert out[0, 0] == pytest.approx(1.0, abs=1e-15)

    def test_full_rate_eliminates_old_mean(self):
        rng = np.random.default_rng(2)
        mean = rng.normal(size=(4, 3))
        samples = rng.normal(size=(5, 4, 3))
        w = softmax_weights(rng.normal(size=5), 1.0)
        out = weighted_mean_update(mean, samples, w, 1.0)
        expected = np.einsum("k,ktm->tm", w, samples) + (1 - w.sum()) * mean
        np.testing.assert_allclose(out, expected, atol=1e-12)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(InputError):
            weighted_mean_update(np.zeros((3, 2)), np.zeros((4, 3, 1)), np.full(4, 0.25), 1.0)


class TestWeightedCovUpdate:
    def test_vanishing_learning_rate_keeps_covariance(self):
        rng = np.random.default_rng(3)
        cov = np.stack([random_spd(rng, 2) for _ in range(4)])
        center = rng.normal(size=(4, 2))
        samples = rng.normal(size=(6, 4, 2))
        out = weighted_cov_update(cov, center, samples, np.full(6, 1 / 6), 1e-6)
        np.testing.assert_allclose(out, cov, rtol=1e-5)

    def test_scalar_hand_case(self):
        # S=1, alpha=1, w=[1], deviation 2 -> S' = 4
        cov = np.ones((1, 1, 1))
        center = np.zeros((1, 1))
        samples = np.array([[[2.0]]])
        out = weighted_cov_update(cov, center, samples, [1.0], 1.0, floor=1e-9)
        assert out[0, 0, 0] == pytest.approx(4.0, abs=1e-12)

    def test_zero_scatter_hits_floor(self):
        center = np.array([[1.5, -2.0]])
        cov = np.stack([np.eye(2)])
        out = weighted_cov_update(cov, center, center[None], [1.0], 1.0, floor=1e-6)
        np.testing.assert_allclose(out[0], 1e-6 * np.eye(2), atol=1e-18)

    def test_randomized_outputs_spd_and_symmetric(self):
        rng = np.random.default_rng(4)
        floor = 1e-6
        for _ in range(1000):
            m = rng.integers(1, 4)
            t = rng.integers(1, 3)
            k = rng.integers(1, 6)
            cov = np.stack([random_spd(rng, m, scale=rng.uniform(0.01, 2)) for _ in range(t)])
            center = rng.normal(size=(t, m))
            samples = rng.normal(size=(k, t, m)) * rng.uniform(0.01, 5)
            w = rng.uniform(0, 1, size=k)
            w = w / w.sum()
            out = weighted_cov_update(cov, center, samples, w, rng.uniform(0.05, 1.0), floor)
            asym = np.max(np.abs(out - out.transpose(0, 2, 1)))
            assert asym <= 1e-10
            eigs = np.linalg.eigvalsh(out)
            assert eigs.min() >= floor - 1e-12

    def test_center_choice_changes_result(self):
        # Two samples, full learning rate: centering the scatter on the
        # post-update mean instead of the sampling mean must give a visibly
        # different covariance, and the update must match the sampling-mean
        # (old-mean) arithmetic.
        old_mean = np.array([[0.0]])
        samples = np.array([[[2.0]], [[-1.0]]])
        w = np.array([0.6, 0.4])
        cov = np.ones((1, 1, 1))
        new_mean = weighted_mean_update(old_mean, samples, w, 1.0)
        correct = weighted_cov_update(cov, old_mean, samples, w, 1.0, floor=1e-9)
        wrong = weighted_cov_update(cov, new_mean, samples, w, 1.0, floor=1e-9)
        # Hand arithmetic: 0.6*2^2 + 0.4*1^2 = 2.8 about the old mean.
        assert correct[0, 0, 0] == pytest.approx(2.8, abs=1e-12)
        assert abs(correct[0, 0, 0] - wrong[0, 0, 0]) > 1e-3


class TestBoundCovariance:
    def test_clamps_diagonal(self):
        out = bound_covariance(np.diag([1e-12, 1.0]), 1e-6)
        np.testing.assert_allclose(out, np.diag([1e-6, 1.0]), atol=1e-15)

    def test_identity_untouched(self):
        np.testing.assert_allclose(bound_covariance(np.eye(2), 1e-6), np.eye(2), atol=1e-15)

    def test_idempotent_on_bounded_input(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            m = rng.integers(1, 5)
            mat = random_spd(rng, m, scale=1e-3)
            once = bound_covariance(mat, 1e-6)
            twice = bound_covariance(once, 1e-6)
            assert np.linalg.norm(twice - once) <= 1e-10
            # already-bounded input comes back unchanged
            assert np.linalg.norm(once - mat) <= 1e-10 or np.linalg.eigvalsh(mat).min() < 1e-6

    def test_stack_input(self):
        stack = np.stack([np.diag([1e-12, 2.0]), np.eye(2)])
        out = bound_covariance(stack, 1e-4)
        assert out.shape == (2, 2, 2)
        assert np.linalg.eigvalsh(out).min() >= 1e-4 - 1e-15

    def test_nonfinite_rejected(self):
        with pytest.raises(InputError):
            bound_covariance(np.array([[np.nan, 0.0], [0.0, 1.0]]), 1e-6)

    def test_bad_floor_rejected(self):
        with pytest.raises(ParameterError):
            bound_covariance(np.eye(2), 0.0)


class TestShiftPolicy:
    def _policy(self, mean):
        mean = np.asarray(mean, dtype=np.float64)
        cov = np.stack([np.eye(mean.shape[1]) * (t + 1) for t in range(mean.shape[0])])
        return GaussianPolicy(mean=mean, covariances=cov)

    def test_repeat_last(self):
        pol = self._policy([[1.0], [2.0], [3.0]])
        out = shift_policy(pol, "repeat-last")
        np.testing.assert_allclose(out.mean, [[2.0], [3.0], [3.0]])
        np.testing.assert_allclose(out.covariances[-1], pol.covariances[-1])

    def test_constant_mean_is_fixed_point(self):
        pol = GaussianPolicy(mean=np.full((4, 2), 1.5), covariances=np.tile(np.eye(2), (4, 1, 1)))
        out = shift_policy(pol, "repeat-last")
        np.testing.assert_allclose(out.mean, pol.mean)
        np.testing.assert_allclose(out.covariances, pol.covariances)

    def test_zero_fill(self):
        pol = self._policy([[1.0], [2.0]])
        out = shift_policy(pol, "zero")
        np.testing.assert_allclose(out.mean, [[2.0], [0.0]])
        # covariance always repeats its last entry
        np.testing.assert_allclose(out.covariances[-1], pol.covariances[-1])

    def test_t_shifts_reach_constant_tail(self):
        rng = np.random.default_rng(6)
        pol = self._policy(rng.normal(size=(5, 2)))
        last = pol.mean[-1].copy()
        for _ in range(pol.horizon):
            pol = shift_policy(pol, "repeat-last")
        np.testing.assert_allclose(pol.mean, np.tile(last, (5, 1)))

    def test_bad_fill_rejected(self):
        with pytest.raises(ParameterError):
            shift_policy(self._policy([[0.0]]), "hold")


class TestExplorationMagnitude:
    def test_diagonal(self):
        pol = GaussianPolicy(
            mean=np.zeros((3, 2)), covariances=np.tile(np.diag([2.0, 3.0]), (3, 1, 1))
        )
        assert exploration_magnitude(pol) == pytest.approx(3.0)

    def test_identity(self):
        pol = GaussianPolicy(mean=np.zeros((2, 2)), covariances=np.tile(np.eye(2), (2, 1, 1)))
        assert exploration_magnitude(pol) == pytest.approx(1.0)

    def test_matches_power_iteration_oracle(self):
        rng = np.random.default_rng(8)
        for _ in range(25):
            mats = np.stack([random_spd(rng, 3) for _ in range(4)])
            pol = GaussianPolicy(mean=np.zeros((4, 3)), covariances=mats)
            oracle = max(power_iteration_top_eig(m) for m in mats)
            assert exploration_magnitude(pol) == pytest.approx(oracle, abs=1e-8)


class TestGaussianPolicy:
    def test_asymmetric_covariance_rejected(self):
        cov = np.tile(np.eye(2), (2, 1, 1))
        cov[0, 0, 1] = 1e-3
        with pytest.raises(InputError):
            GaussianPolicy(mean=np.zeros((2, 2)), covariances=cov)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(InputError):
            GaussianPolicy(mean=np.zeros((2, 2)), covariances=np.tile(np.eye(3), (2, 1, 1)))

    def test_nonfinite_mean_rejected(self):
        with pytest.raises(InputError):
            GaussianPolicy(mean=np.array([[np.inf, 0.0]]), covariances=np.tile(np.eye(2), (1, 1, 1)))

    def test_isotropic_constructor(self):
        pol = GaussianPolicy.isotropic(5, 3, 0.2)
        assert pol.horizon == 5 and pol.control_dim == 3
        np.testing.assert_allclose(pol.covariances, np.tile(0.04 * np.eye(3), (5, 1, 1)))

    def test_immutable_arrays(self):
        pol = GaussianPolicy.isotropic(2, 2, 0.1)
        with pytest.raises(ValueError):
            pol.mean[0, 0] = 1.0


class TestWeightEntropy:
    def test_uniform_entropy(self):
        assert weight_entropy(np.full(4, 0.25)) == pytest.approx(math.log(4))

    def test_zero_weights_contribute_nothing(self):
        assert weight_entropy(np.array([1.0, 0.0, 0.0])) == pytest.approx(0.0)
