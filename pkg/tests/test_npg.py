"""Tests for softmax policies, exact gradients, Gram matrices and NPG directions."""

import numpy as np
import pytest

from npg_lab.exceptions import DomainError
from npg_lab.geometry import (
    ConditionalEntropyPotential,
    SigmaPotential,
    potential_gradient,
    projected_riemannian_gradient,
)
from npg_lab.mdp_core import Mdp, constraint_matrix, state_action_frequency
from npg_lab.npg import (
    HessianOf,
    Kakade,
    Morimura,
    Objective,
    Sigma,
    SoftmaxParams,
    Vanilla,
    advantage,
    gram_matrix,
    jacobian_eta,
    kakade_gram_policy_space,
    kakade_gram_state_action,
    may_hit_boundary,
    morimura_gram_score_form,
    natural_direction,
    npg_direction,
    npg_terms,
    objective_value,
    parse_geometry,
    policy_gradient,
    potential_of,
    softmax_policy,
    state_fisher_matrix,
)

HESSIAN_GEOMETRIES = [Kakade(), Morimura(), Sigma(0.5), Sigma(1.5), Sigma(2.0), Sigma(3.0)]


def _theta(shape, seed):
    return SoftmaxParams(np.random.default_rng(seed).standard_normal(shape))


def _fd_gradient(f, theta: SoftmaxParams, h=1e-6):
    flat = theta.flat
    out = np.empty(flat.size)
    for i in range(flat.size):
        e = np.zeros(flat.size)
        e[i] = h
        plus = SoftmaxParams((flat + e).reshape(theta.theta.shape))
        minus = SoftmaxParams((flat - e).reshape(theta.theta.shape))
        out[i] = (f(plus) - f(minus)) / (2.0 * h)
    return out


class TestSoftmaxParams:
    def test_rejects_non_finite(self):
        with pytest.raises(DomainError):
            SoftmaxParams(np.array([[0.0, np.inf]]))

    def test_rejects_vectors(self):
        with pytest.raises(DomainError):
            SoftmaxParams(np.zeros(4))


class TestParseGeometry:
    @pytest.mark.parametrize(
        "text, expected",
        [
            ("vanilla", Vanilla()),
            ("Kakade", Kakade()),
            ("morimura", Morimura()),
            ("sigma:-0.5", Sigma(-0.5)),
            ("hessian:sigma:2", HessianOf(SigmaPotential(2.0))),
        ],
    )
    def test_names(self, text, expected):
        assert parse_geometry(text) == expected

    def test_conditional_entropy_with_shape(self):
        geo = parse_geometry("hessian:conditional_entropy", (2, 2))
        assert geo == HessianOf(ConditionalEntropyPotential(2, 2))

    def test_unknown(self):
        with pytest.raises(DomainError):
            parse_geometry("adam")

    def test_boundary_classification(self):
        assert may_hit_boundary(Sigma(0.5))
        assert not may_hit_boundary(Sigma(1.0))
        assert not may_hit_boundary(Kakade())
        assert may_hit_boundary(HessianOf(SigmaPotential(0.0)))

    def test_potential_of_aliases(self):
        assert potential_of(Kakade(), (2, 2)) == ConditionalEntropyPotential(2, 2)
        assert potential_of(Morimura(), (2, 2)) == SigmaPotential(1.0)
        assert potential_of(Vanilla(), (2, 2)) is None


class TestSoftmaxPolicy:
    def test_zero_is_uniform(self):
        np.testing.assert_allclose(softmax_policy(SoftmaxParams.zeros(2, 3)).probs, 1.0 / 3.0)

    def test_saturation(self):
        pi = softmax_policy(SoftmaxParams(np.array([[10.0, -10.0]])))
        tail = np.exp(-20.0) / (1.0 + np.exp(-20.0))
        assert pi.probs[0, 1] == pytest.approx(tail, rel=1e-12)
        assert pi.probs[0, 0] == pytest.approx(1.0 - 2e-9, abs=1e-10)

    def test_row_shift_invariance(self):
        theta = _theta((3, 2), 0)
        shifted = SoftmaxParams(theta.theta + np.array([[5.0], [-3.0], [100.0]]))
        np.testing.assert_allclose(
            softmax_policy(shifted).probs, softmax_policy(theta).probs, atol=1e-13
        )

    def test_large_logits_do_not_overflow(self):
        pi = softmax_policy(SoftmaxParams(np.array([[1000.0, 999.0]])))
        assert np.all(np.isfinite(pi.probs))


class TestObjective:
    def test_positive_lambda_needs_regularizer(self):
        with pytest.raises(DomainError):
            Objective(lam=0.1)

    def test_negative_lambda(self):
        with pytest.raises(DomainError):
            Objective(lam=-1.0, regularizer=SigmaPotential(1.0))

    def test_zero_lambda_is_reward(self, two_state):
        theta = _theta((2, 2), 1)
        eta = state_action_frequency(two_state, softmax_policy(theta)).eta
        assert objective_value(two_state, theta, Objective()) == pytest.approx(
            float(two_state.r_flat @ eta)
        )


class TestPolicyGradient:
    def test_zero_reward(self, two_state, with_reward):
        m = with_reward(two_state, np.zeros((2, 2)))
        np.testing.assert_array_equal(policy_gradient(m, _theta((2, 2), 2), Objective()), 0.0)

    def test_two_state_at_zero(self, two_state):
        theta = SoftmaxParams.zeros(2, 2)
        numeric = _fd_gradient(lambda t: objective_value(two_state, t, Objective()), theta)
        np.testing.assert_allclose(
            policy_gradient(two_state, theta, Objective()), numeric, rtol=1e-6, atol=1e-9
        )

    def test_random_instances(self, random_mdp):
        potentials = [SigmaPotential(1.0), SigmaPotential(2.0), ConditionalEntropyPotential(3, 2)]
        for k in range(50):
            m = random_mdp(n_states=3, n_actions=2, seed=k)
            theta = _theta((3, 2), 100 + k)
            lam = 0.0 if k % 2 == 0 else 0.3
            obj = Objective(lam, potentials[k % 3] if lam else None)
            numeric = _fd_gradient(lambda t: objective_value(m, t, obj), theta)
            np.testing.assert_allclose(
                policy_gradient(m, theta, obj), numeric, rtol=1e-6, atol=1e-8
            )

    def test_row_sums_vanish(self, random_mdp):
        m = random_mdp(n_states=4, n_actions=3, seed=3)
        grad = policy_gradient(m, _theta((4, 3), 4), Objective())
        np.testing.assert_allclose(grad.reshape(4, 3).sum(axis=1), 0.0, atol=1e-13)

    def test_equals_frequency_times_advantage(self, random_mdp):
        m = random_mdp(n_states=3, n_actions=3, seed=6)
        theta = _theta((3, 3), 7)
        pi = softmax_policy(theta)
        eta = state_action_frequency(m, pi).eta
        expected = eta * advantage(m, pi).reshape(-1)
        np.testing.assert_allclose(policy_gradient(m, theta, Objective()), expected, atol=1e-12)


class TestJacobianEta:
    def test_matches_finite_differences(self, random_mdp):
        m = random_mdp(n_states=3, n_actions=2, seed=9)
        theta = _theta((3, 2), 10)
        jac = jacobian_eta(m, theta)
        for i in range(6):
            numeric = _fd_gradient(
                lambda t: state_action_frequency(m, softmax_policy(t)).eta[i], theta
            )
            np.testing.assert_allclose(jac[i], numeric, atol=1e-8)

    def test_columns_are_tangent(self, random_mdp):
        m = random_mdp(n_states=3, n_actions=3, seed=11)
        jac = jacobian_eta(m, _theta((3, 3), 12))
        np.testing.assert_allclose(constraint_matrix(m) @ jac, 0.0, atol=1e-12)

    def test_rank_on_two_state(self, two_state):
        jac = jacobian_eta(two_state, SoftmaxParams.zeros(2, 2))
        assert np.linalg.matrix_rank(jac, tol=1e-10) == 2

    def test_single_state_single_action(self):
        m = Mdp(1, 1, np.ones((1, 1, 1)), np.ones((1, 1)), 0.5, np.ones(1))
        np.testing.assert_array_equal(jacobian_eta(m, SoftmaxParams.zeros(1, 1)), [[0.0]])


class TestGramMatrix:
    def test_vanilla_identity(self, two_state):
        gram = gram_matrix(two_state, _theta((2, 2), 0), Vanilla())
        np.testing.assert_array_equal(gram, np.eye(4))

    def test_kakade_is_morimura_minus_state_fisher(self, random_mdp):
        m = random_mdp(n_states=3, n_actions=3, seed=13)
        theta = _theta((3, 3), 14)
        np.testing.assert_allclose(
            kakade_gram_policy_space(m, theta),
            morimura_gram_score_form(m, theta) - state_fisher_matrix(m, theta),
            atol=1e-9,
        )
        np.testing.assert_allclose(
            kakade_gram_state_action(m, theta), kakade_gram_policy_space(m, theta), atol=1e-9
        )

    def test_kakade_is_conditional_entropy_pullback(self, random_mdp):
        m = random_mdp(n_states=3, n_actions=2, seed=15)
        theta = _theta((3, 2), 16)
        np.testing.assert_allclose(
            gram_matrix(m, theta, Kakade()),
            gram_matrix(m, theta, HessianOf(ConditionalEntropyPotential(3, 2))),
            atol=1e-9,
        )

    def test_morimura_is_sigma_one(self, random_mdp):
        m = random_mdp(seed=17)
        theta = _theta((3, 2), 18)
        np.testing.assert_allclose(
            gram_matrix(m, theta, Morimura()), gram_matrix(m, theta, Sigma(1.0)), atol=1e-10
        )

    @pytest.mark.parametrize("geo", HESSIAN_GEOMETRIES, ids=lambda g: g.name)
    def test_symmetric_psd_with_row_constant_kernel(self, random_mdp, geo):
        m = random_mdp(n_states=3, n_actions=3, seed=19)
        gram = gram_matrix(m, _theta((3, 3), 20), geo)
        scale = max(1.0, float(np.abs(gram).max()))
        np.testing.assert_allclose(gram, gram.T, atol=1e-12 * scale)
        assert np.linalg.eigvalsh(gram).min() >= -1e-10 * scale
        row_constants = np.kron(np.eye(3), np.ones((3, 1)))
        np.testing.assert_allclose(gram @ row_constants, 0.0, atol=1e-9 * scale)


class TestNpgDirection:
    def test_vanilla_is_gradient(self, two_state):
        theta = _theta((2, 2), 21)
        np.testing.assert_array_equal(
            npg_direction(two_state, theta, Vanilla(), Objective()),
            policy_gradient(two_state, theta, Objective()),
        )

    def test_zero_gradient(self, two_state, with_reward):
        m = with_reward(two_state, np.ones((2, 2)))
        np.testing.assert_allclose(
            npg_direction(m, _theta((2, 2), 22), Kakade(), Objective()), 0.0, atol=1e-12
        )

    def test_kakade_pushforward_on_two_state(self, two_state):
        theta = SoftmaxParams.zeros(2, 2)
        terms = npg_terms(two_state, theta, Kakade(), Objective())
        expected = projected_riemannian_gradient(
            two_state, terms.eta, ConditionalEntropyPotential(2, 2), two_state.r_flat
        )
        np.testing.assert_allclose(terms.jacobian @ terms.direction, expected, atol=1e-7)

    @pytest.mark.parametrize("geo", HESSIAN_GEOMETRIES, ids=lambda g: g.name)
    def test_pushforward_is_projected_riemannian_gradient(self, random_mdp, geo):
        m = random_mdp(n_states=3, n_actions=2, seed=23)
        phi = potential_of(geo, m.shape)
        for lam, reg in [(0.0, None), (0.2, SigmaPotential(1.0))]:
            obj = Objective(lam, reg)
            terms = npg_terms(m, _theta((3, 2), 24), geo, obj)
            grad = m.r_flat - (lam * potential_gradient(reg, terms.eta) if lam else 0.0)
            expected = projected_riemannian_gradient(m, terms.eta, phi, grad)
            np.testing.assert_allclose(terms.jacobian @ terms.direction, expected, atol=1e-7)

    @pytest.mark.parametrize("geo", HESSIAN_GEOMETRIES, ids=lambda g: g.name)
    def test_state_action_update_is_shift_invariant(self, random_mdp, geo):
        m = random_mdp(n_states=3, n_actions=2, seed=25)
        theta = _theta((3, 2), 26)
        shifted = SoftmaxParams(theta.theta + np.array([[1.0], [-2.0], [0.5]]))
        first = npg_terms(m, theta, geo, Objective())
        second = npg_terms(m, shifted, geo, Objective())
        np.testing.assert_allclose(
            first.jacobian @ first.direction, second.jacobian @ second.direction, atol=1e-9
        )

    def test_non_finite_gram_gives_nan_direction(self):
        gram = np.array([[1.0, np.nan], [np.nan, 1.0]])
        direction = natural_direction(gram, np.array([1.0, 2.0]))
        assert direction.shape == (2,)
        assert np.all(np.isnan(direction))

    def test_vanishing_frequency_under_morimura(self, two_state):
        theta = SoftmaxParams(np.array([[0.0, -800.0], [0.0, 0.0]]))
        terms = npg_terms(two_state, theta, Morimura(), Objective())
        assert terms.eta[1] == 0.0
        assert np.all(np.isnan(terms.direction))


class TestNpgTermsReuse:
    @pytest.mark.parametrize("geo", [Kakade(), Morimura(), Sigma(1.5)], ids=lambda g: g.name)
    def test_one_frequency_solve_per_evaluation(self, random_mdp, geo, monkeypatch):
        calls = []

        def counting(m, pi):
            calls.append(pi)
            return state_action_frequency(m, pi)

        monkeypatch.setattr("npg_lab.npg.services.state_action_frequency", counting)
        m = random_mdp(n_states=4, n_actions=3, seed=31)
        theta = _theta((4, 3), 32)
        terms = npg_terms(m, theta, geo, Objective())
        assert len(calls) == 1
        np.testing.assert_allclose(terms.policy, softmax_policy(theta).probs)
        np.testing.assert_allclose(terms.eta, state_action_frequency(m, calls[0]).eta)

    def test_kakade_gram_matches_state_action_form(self, random_mdp):
        m = random_mdp(n_states=3, n_actions=3, seed=33)
        theta = _theta((3, 3), 34)
        terms = npg_terms(m, theta, Kakade(), Objective())
        np.testing.assert_allclose(terms.gram, kakade_gram_state_action(m, theta), atol=1e-9)
