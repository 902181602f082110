"""Tests for NPG flow integration, state-action steps and Newton iterations."""

import numpy as np
import pytest
from scipy import stats

from npg_lab.dynamics import (
    FlowStatus,
    StepController,
    StopCriteria,
    inexact_newton_deviation,
    integrate_flow,
    newton_fixed_point,
    newton_step_size,
    projected_gradient_norm,
    projected_newton_step,
    quadratic_tail,
    regularized_npg_newton,
    riemannian_flow_step_state_action,
)
from npg_lab.exceptions import BoundaryExitError, DomainError, RegularizedOptimumError
from npg_lab.geometry import ConditionalEntropyPotential, CustomPotential, SigmaPotential
from npg_lab.mdp_core import (
    constraint_matrix,
    polytope_residuals,
    state_action_frequency,
    uniform_policy,
)
from npg_lab.npg import (
    Kakade,
    Morimura,
    Objective,
    Sigma,
    SoftmaxParams,
    Vanilla,
    softmax_policy,
)

TWO_STATE_OPTIMUM = 1.84
ENTROPIES = [SigmaPotential(1.0), ConditionalEntropyPotential(2, 2)]


def _random_theta(seed: int) -> SoftmaxParams:
    return SoftmaxParams(np.random.default_rng(seed).standard_normal((2, 2)))


def _uniform_eta(m):
    return state_action_frequency(m, uniform_policy(m)).eta


class TestIntegrateFlow:
    def test_zero_reward_is_stationary(self, two_state, with_reward):
        m = with_reward(two_state, np.zeros((2, 2)))
        theta0 = _random_theta(1)
        traj = integrate_flow(m, theta0, Kakade(), Objective(), optimum=0.0)
        assert traj.status is FlowStatus.CONVERGED
        assert len(traj.records) == 1
        np.testing.assert_array_equal(traj.final.theta, theta0.flat)

    @pytest.mark.parametrize("geo", [Kakade(), Sigma(1.0), Sigma(1.5)], ids=lambda g: g.name)
    def test_reward_is_monotone(self, two_state, geo):
        traj = integrate_flow(
            two_state,
            _random_theta(42),
            geo,
            Objective(),
            ctrl=StepController(base_dt=0.1, max_param_step=0.25),
            stop=StopCriteria(max_iters=300),
            optimum=TWO_STATE_OPTIMUM,
        )
        assert np.all(np.diff(traj.rewards()) >= -1e-10)
        assert traj.gaps()[-1] < traj.gaps()[0]

    def test_records_stay_feasible(self, random_mdp):
        m = random_mdp(n_states=3, n_actions=3, seed=4)
        theta0 = SoftmaxParams(np.random.default_rng(5).standard_normal((3, 3)))
        traj = integrate_flow(m, theta0, Sigma(1.5), Objective(), stop=StopCriteria(max_iters=100))
        for rec in traj.records:
            assert np.min(rec.eta) >= -1e-10
            assert np.max(np.abs(polytope_residuals(m, rec.eta))) <= 1e-8
        assert np.all(np.diff(traj.times()) > 0.0)

    def test_records_carry_policy_and_divergence(self, two_state):
        eta_star = np.array([0.0, 0.92, 0.08, 0.0])
        traj = integrate_flow(
            two_state,
            _random_theta(3),
            Kakade(),
            Objective(),
            stop=StopCriteria(max_iters=20),
            optimum=TWO_STATE_OPTIMUM,
            eta_star=eta_star,
        )
        for rec in traj.records:
            pi = softmax_policy(SoftmaxParams(rec.theta.reshape(2, 2))).probs.reshape(-1)
            np.testing.assert_allclose(rec.pi, pi)
            assert rec.bregman is not None and rec.bregman >= 0.0
            assert rec.gap == pytest.approx(TWO_STATE_OPTIMUM - rec.reward)

    def test_no_optimum_means_no_gap(self, two_state):
        traj = integrate_flow(
            two_state, _random_theta(6), Vanilla(), Objective(), stop=StopCriteria(max_iters=5)
        )
        assert traj.status is FlowStatus.MAX_ITERS
        assert traj.final.gap is None
        assert traj.iterations == 5

    def test_euclidean_flow_hits_the_boundary(self, two_state):
        traj = integrate_flow(
            two_state,
            _random_theta(7),
            Sigma(0.0),
            Objective(),
            ctrl=StepController(base_dt=1e6, max_param_step=0.5),
            stop=StopCriteria(max_iters=3000),
            optimum=TWO_STATE_OPTIMUM,
        )
        assert traj.status is FlowStatus.BOUNDARY_HIT
        assert traj.face
        assert traj.t_hit is not None and traj.t_hit > 0.0
        pi = traj.final.pi.reshape(2, 2)
        for s, a in traj.face:
            assert pi[s, a] == 0.0

    def test_non_finite_metric_is_diverged(self, two_state):
        theta0 = SoftmaxParams(np.array([[0.0, -800.0], [0.0, 0.0]]))
        traj = integrate_flow(two_state, theta0, Morimura(), Objective())
        assert traj.status is FlowStatus.DIVERGED
        assert len(traj.records) == 1
        assert "non-finite" in traj.message


class TestRiemannianFlowStep:
    def test_agrees_with_parameter_step(self, two_state):
        # one Euler step in θ pushed forward versus one Euler step in η
        eta0 = _uniform_eta(two_state)
        phi = ConditionalEntropyPotential(2, 2)
        discrepancies = []
        for dt in (4e-4, 2e-4, 1e-4):
            traj = integrate_flow(
                two_state,
                SoftmaxParams.zeros(2, 2),
                Kakade(),
                Objective(),
                ctrl=StepController(base_dt=dt),
                stop=StopCriteria(max_iters=1),
            )
            assert traj.final.t == pytest.approx(dt)
            direct = riemannian_flow_step_state_action(two_state, eta0, phi, Objective(), dt)
            discrepancies.append(np.linalg.norm(traj.final.eta - direct.eta))
        assert discrepancies[-1] <= 1e-6
        ratios = np.array(discrepancies[:-1]) / np.array(discrepancies[1:])
        assert ratios.mean() >= 3.5

    def test_increment_is_tangent(self, random_mdp):
        m = random_mdp(n_states=3, n_actions=3, seed=8)
        eta = _uniform_eta(m)
        new = riemannian_flow_step_state_action(m, eta, SigmaPotential(1.5), Objective(), 1e-3)
        np.testing.assert_allclose(constraint_matrix(m) @ (new.eta - eta), 0.0, atol=1e-10)

    def test_zero_reward(self, two_state, with_reward):
        m = with_reward(two_state, np.zeros((2, 2)))
        eta = _uniform_eta(m)
        new = riemannian_flow_step_state_action(m, eta, SigmaPotential(1.0), Objective(), 0.5)
        np.testing.assert_array_equal(new.eta, eta)

    def test_leaving_the_orthant(self, two_state):
        with pytest.raises(BoundaryExitError) as info:
            riemannian_flow_step_state_action(
                two_state, _uniform_eta(two_state), SigmaPotential(1.5), Objective(), 1e6
            )
        assert 0 <= info.value.coordinate < 4
        assert 0.0 < info.value.fraction < 1e6

    def test_rejects_nonpositive_dt(self, two_state):
        with pytest.raises(DomainError):
            riemannian_flow_step_state_action(
                two_state, _uniform_eta(two_state), SigmaPotential(1.0), Objective(), 0.0
            )


class TestProjectedNewton:
    def test_fixed_point_is_stationary(self, two_state):
        phi = SigmaPotential(1.0)
        eta_star = newton_fixed_point(two_state, phi, 0.1)
        assert projected_gradient_norm(two_state, eta_star, phi, 0.1) <= 1e-11
        assert np.all(eta_star.eta > 0.0)
        step = projected_newton_step(two_state, eta_star, phi, 0.1)
        assert step.direction_norm <= 1e-10

    def test_preserves_constraints(self, random_mdp):
        m = random_mdp(n_states=3, n_actions=2, seed=9)
        step = projected_newton_step(m, _uniform_eta(m), ConditionalEntropyPotential(3, 2), 0.2)
        assert np.max(np.abs(polytope_residuals(m, step.eta.eta))) <= 1e-10

    def test_damped_to_stay_positive(self, two_state):
        step = projected_newton_step(two_state, _uniform_eta(two_state), SigmaPotential(1.0), 1e-3)
        assert step.damped
        assert np.all(step.eta.eta > 0.0)

    def test_explicit_damping_is_flagged(self, two_state):
        step = projected_newton_step(
            two_state, _uniform_eta(two_state), SigmaPotential(1.0), 0.5, damping=0.5
        )
        assert step.damped

    def test_rejects_zero_lambda(self, two_state):
        with pytest.raises(DomainError):
            projected_newton_step(two_state, _uniform_eta(two_state), SigmaPotential(1.0), 0.0)

    @pytest.mark.parametrize("lam", [0.1, 0.05, 0.01, 0.001])
    @pytest.mark.parametrize("phi", ENTROPIES, ids=["entropy", "conditional"])
    def test_small_lambda_converges(self, two_state, phi, lam):
        eta_star = newton_fixed_point(two_state, phi, lam)
        assert np.max(np.abs(polytope_residuals(two_state, eta_star.eta))) <= 1e-10
        assert np.all(eta_star.eta >= 0.0)
        assert float(two_state.r_flat @ eta_star.eta) <= TWO_STATE_OPTIMUM + 1e-12
        # suboptimal actions carry weight of order exp(-advantage / λ)
        assert eta_star.matrix[0, 1] > 0.9
        assert eta_star.matrix[1, 0] > 0.07

    @pytest.mark.parametrize("phi", ENTROPIES, ids=["entropy", "conditional"])
    def test_stationary_where_resolvable(self, two_state, phi):
        for lam in (0.1, 0.05):
            eta_star = newton_fixed_point(two_state, phi, lam)
            assert np.all(eta_star.eta > 0.0)
            assert projected_gradient_norm(two_state, eta_star, phi, lam) <= 1e-11

    def test_custom_potential_iterates_in_frequencies(self, two_state):
        # the entropy as a user-supplied potential takes the projected Newton path
        phi = CustomPotential(
            value=lambda x: float(np.sum(x * np.log(x))),
            gradient=lambda x: np.log(x) + 1.0,
            hessian=lambda x: np.diag(1.0 / x),
            label="entropy",
        )
        custom = newton_fixed_point(two_state, phi, 0.5)
        reference = newton_fixed_point(two_state, SigmaPotential(1.0), 0.5)
        np.testing.assert_allclose(custom.eta, reference.eta, atol=1e-9)

    @pytest.mark.parametrize(
        "broken",
        [
            {"gradient": lambda x: np.full(x.size, np.nan)},
            {"hessian": lambda x: np.full((x.size, x.size), np.nan)},
        ],
        ids=["gradient", "hessian"],
    )
    def test_non_finite_potential_is_reported(self, two_state, broken):
        parts = {
            "value": lambda x: float(np.sum(x * np.log(x))),
            "gradient": lambda x: np.log(x) + 1.0,
            "hessian": lambda x: np.diag(1.0 / x),
            **broken,
        }
        with pytest.raises(RegularizedOptimumError):
            newton_fixed_point(two_state, CustomPotential(**parts), 0.5)

    def test_reference_failure_is_arithmetic(self):
        assert issubclass(RegularizedOptimumError, ArithmeticError)

    def test_quadratic_tail_of_newton_iterates(self, two_state):
        phi = SigmaPotential(1.0)
        eta_star = newton_fixed_point(two_state, phi, 0.5).eta
        eta = _uniform_eta(two_state)
        errors = []
        for _ in range(30):
            errors.append(float(np.linalg.norm(eta - eta_star)))
            if errors[-1] <= 1e-14:
                break
            eta = projected_newton_step(two_state, eta, phi, 0.5).eta.eta
        flag, _ = quadratic_tail(tuple(errors))
        assert flag


class TestQuadraticTail:
    def test_squaring_errors(self):
        flag, constant = quadratic_tail((1e-1, 1e-2, 1e-4, 1e-8))
        assert flag
        assert constant == pytest.approx(1.0)

    def test_linear_errors(self):
        flag, constant = quadratic_tail(tuple(0.5**k for k in range(31)))
        assert not flag
        assert constant > 1e3

    def test_too_few_pairs(self):
        assert quadratic_tail((1e-1, 1e-2)) == (False, None)

    def test_pairs_below_target_are_ignored(self):
        flag, constant = quadratic_tail((1e-1, 1e-2, 1e-4, 1e-8, 1e-20))
        assert flag
        assert constant == pytest.approx(1.0)


class TestRegularizedNpgNewton:
    def test_step_size(self):
        assert newton_step_size(0.05) == pytest.approx(20.0)

    @pytest.mark.parametrize(
        "phi",
        [SigmaPotential(1.0), ConditionalEntropyPotential(2, 2)],
        ids=["entropy", "conditional_entropy"],
    )
    def test_quadratic_convergence(self, two_state, phi):
        report = regularized_npg_newton(two_state, SoftmaxParams.zeros(2, 2), phi, 0.05)
        assert not report.diverged
        assert report.quadratic_flag
        assert report.errors[-1] < 1e-10
        assert report.step_size == pytest.approx(20.0)

    def test_deviation_is_quadratic_in_gradient(self, two_state):
        phi = SigmaPotential(1.0)
        lam = 0.5
        eta_star = newton_fixed_point(two_state, phi, lam).matrix
        theta_star = np.log(eta_star / eta_star.sum(axis=1, keepdims=True))
        offset = np.array([[1.0, -0.5], [-0.3, 0.8]])
        deviations, gradients = [], []
        for k in range(6):
            theta = SoftmaxParams(theta_star + 0.1 * 2.0**-k * offset)
            deviation, gradient = inexact_newton_deviation(two_state, theta, phi, lam)
            deviations.append(deviation)
            gradients.append(gradient)
        fit = stats.linregress(np.log(gradients), np.log(deviations))
        assert fit.slope >= 1.8

    def test_huge_lambda_is_reported_not_raised(self, two_state):
        theta0 = SoftmaxParams(np.array([[4.0, -4.0], [-4.0, 4.0]]))
        report = regularized_npg_newton(two_state, theta0, SigmaPotential(1.0), 10.0, max_iters=30)
        assert len(report.errors) >= 1
        assert report.step_size == pytest.approx(0.1)
        assert all(np.isfinite(report.errors))
