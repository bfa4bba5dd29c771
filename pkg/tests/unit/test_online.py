# Copyright 2025 Canonical Ltd.
# See LICENSE file for licensing details.

"""Decentralized online gradient descent unit tests."""

import math
import unittest

import numpy as np

import network
import online
from curvature import CurvatureContext, derive
from exceptions import (
    GradientBlowupError,
    InfeasibleIterateError,
    InfeasibleQueryError,
    InvalidScheduleError,
)
from harness import FrechetLossStream
from manifold import Euclidean, GeodesicBall, ManifoldChart, Point, Sphere


class ConstantLoss(online.LossOracle):
    """f_{i,t} = c."""

    def __init__(self, level: float, n_agents: int) -> None:
        self.level = level
        self.n_agents = n_agents
        self.lipschitz = 1.0

    def value(self, x, agent, t):
        return np.full(np.shape(x)[:-1], self.level)

    def gradient(self, x, agent, t):
        return np.zeros_like(x)


class LinearLoss(online.LossOracle):
    """f_{i,t}(y) = <a, y> in flat space."""

    def __init__(self, slope: np.ndarray) -> None:
        self.slope = slope
        self.n_agents = 1
        self.lipschitz = float(np.linalg.norm(slope))

    def value(self, x, agent, t):
        return np.asarray(x) @ self.slope


class QuadraticLoss(online.LossOracle):
    """f_{i,t}(y) = |y - z_i|^2 in flat space."""

    def __init__(self, targets: np.ndarray, lipschitz: float = 10.0) -> None:
        self.targets = targets
        self.n_agents = targets.shape[0]
        self.lipschitz = lipschitz

    def value(self, x, agent, t):
        return np.sum((np.asarray(x) - self.targets[agent]) ** 2, axis=-1)

    def gradient(self, x, agent, t):
        return 2.0 * (np.asarray(x) - self.targets[agent])


class SquaredDistanceLoss(online.LossOracle):
    """f_{i,t}(y) = d^2(y, z) for one fixed target."""

    def __init__(self, chart: ManifoldChart, target: np.ndarray) -> None:
        self.chart = chart
        self.target = target
        self.n_agents = 1
        self.lipschitz = 2 * math.pi

    def value(self, x, agent, t):
        return self.chart.distance(x, self.target) ** 2


def _ball(chart: ManifoldChart, radius: float) -> GeodesicBall:
    """Return the ball of a radius around the chart origin."""
    return GeodesicBall(Point(chart.origin()), radius)


def _project(center: np.ndarray, radius: float, y: np.ndarray) -> np.ndarray:
    """Project onto a Euclidean ball row by row."""
    offset = y - center
    norms = np.linalg.norm(offset, axis=-1, keepdims=True)
    return np.where(norms > radius + 1e-12, center + radius * offset / norms, y)


class TestStepSchedule(unittest.TestCase):
    """Step schedule unit tests."""

    def test_eta_rules(self):
        """
        arrange: a constant and an adaptive schedule with scale 2 and horizon 100
        act: read the step-size at rounds 1 and 4
        assert: constant gives 2/sqrt(T), adaptive gives 2/sqrt(t)
        """
        constant = online.StepSchedule("constant", 2.0, 100, 1.0)
        adaptive = online.StepSchedule("adaptive", 2.0, 100, 1.0)
        self.assertEqual(constant.eta(1), 0.2)
        self.assertEqual(constant.eta(4), 0.2)
        self.assertEqual(adaptive.eta(1), 2.0)
        self.assertEqual(adaptive.eta(4), 1.0)

    def test_invalid_schedules(self):
        """
        arrange: schedules with an unknown rule and fields out of range
        act: build them
        assert: InvalidScheduleError is raised
        """
        invalid = (
            {"eta_rule": "decaying"},
            {"eta_scale": -1.0},
            {"horizon": 0},
            {"consensus_step": 1.5},
            {"delta": -0.1},
            {"tau": 1.0},
        )
        for change in invalid:
            values = {
                "eta_rule": "adaptive",
                "eta_scale": 1.0,
                "horizon": 10,
                "consensus_step": 1.0,
            }
            values.update(change)
            with self.assertRaises(InvalidScheduleError, msg=str(change)):
                online.StepSchedule(**values)

    def test_bandit_feasibility(self):
        """
        arrange: the experiment smoothing radius pi/50 on a pi/4 ball
        act: check feasibility at tau = 0.08, at a smaller tau and without delta
        assert: only the coupled setting passes
        """
        ball = _ball(Sphere(2), math.pi / 4)
        coupled = online.StepSchedule("adaptive", 1.0, 10, 1.0, math.pi / 50, 0.08)
        coupled.check_bandit_feasibility(ball)
        loose = online.StepSchedule("adaptive", 1.0, 10, 1.0, math.pi / 50, 0.05)
        with self.assertRaises(InvalidScheduleError):
            loose.check_bandit_feasibility(ball)
        with self.assertRaises(InvalidScheduleError):
            online.StepSchedule("adaptive", 1.0, 10, 1.0).check_bandit_feasibility(ball)


class TestFullInformation(unittest.TestCase):
    """Full-information round unit tests."""

    def test_zero_step_identical_agents(self):
        """
        arrange: four agents at the same sphere point and eta = 0
        act: run a round
        assert: the decisions are unchanged
        """
        chart = Sphere(3)
        ball = _ball(chart, math.pi / 4)
        rng = np.random.default_rng(0)
        oracle = FrechetLossStream(chart, ball, math.pi / 16, 4, rng)
        state = online.initial_state(chart, ball.center, 4)
        schedule = online.StepSchedule("constant", 0.0, 10, 1.0)
        after = online.full_info_round(
            chart, state, oracle, network.build_complete(4), ball, schedule, 1
        )
        np.testing.assert_allclose(after.x, state.x, atol=1e-12)
        np.testing.assert_allclose(after.last_gradient, oracle.gradients(state.x, 1))

    def test_single_agent_is_projected_gradient_descent(self):
        """
        arrange: one agent in the plane, s = 0 and a target outside the unit ball
        act: run a round
        assert: the decision is P(x - eta g)
        """
        chart = Euclidean(2)
        ball = _ball(chart, 1.0)
        oracle = QuadraticLoss(np.array([[3.0, 0.0]]))
        state = online.initial_state(chart, Point([0.5, 0.5]), 1)
        schedule = online.StepSchedule("constant", 0.4, 4, 0.0)
        after = online.full_info_round(
            chart, state, oracle, network.build_complete(1), ball, schedule, 1
        )
        stepped = np.array([0.5, 0.5]) - 0.2 * 2.0 * (np.array([0.5, 0.5]) - [3.0, 0.0])
        np.testing.assert_allclose(after.x[0], stepped / np.linalg.norm(stepped), atol=1e-14)
        np.testing.assert_allclose(after.y_next, after.x)

    def test_euclidean_matches_linear_algebra(self):
        """
        arrange: three agents in R^3 on a complete graph with quadratic losses
        act: run 100 rounds and the same update coded with matrices
        assert: the trajectories agree within 1e-10
        """
        chart = Euclidean(3)
        ball = _ball(chart, 1.0)
        targets = np.array([[2.0, 0.0, 0.0], [0.0, 0.5, 0.0], [-0.3, -0.3, 1.5]])
        oracle = QuadraticLoss(targets)
        matrix = network.build_complete(3)
        schedule = online.StepSchedule("adaptive", 0.3, 100, 0.5)
        state = online.initial_state(chart, ball.center, 3)
        flat = np.zeros((3, 3))
        mixing = 0.5 * np.eye(3) + 0.5 * matrix.w
        for t in range(1, 101):
            state = online.full_info_round(chart, state, oracle, matrix, ball, schedule, t)
            stepped = flat - schedule.eta(t) * 2.0 * (flat - targets)
            flat = mixing @ _project(np.zeros(3), 1.0, stepped)
            np.testing.assert_allclose(state.x, flat, atol=1e-10)

    def test_gradient_blowup(self):
        """
        arrange: a loss whose gradient is far above its Lipschitz constant for agent 1
        act: run a round
        assert: GradientBlowupError names agent 1
        """
        chart = Euclidean(2)
        oracle = QuadraticLoss(np.array([[0.0, 0.0], [50.0, 0.0]]), lipschitz=1.0)
        state = online.initial_state(chart, Point([0.0, 0.0]), 2)
        schedule = online.StepSchedule("adaptive", 1.0, 10, 1.0)
        with self.assertRaises(GradientBlowupError) as caught:
            online.full_info_round(
                chart, state, oracle, network.build_complete(2), _ball(chart, 1.0), schedule, 1
            )
        self.assertEqual(caught.exception.agent_index, 1)

    def test_infeasible_iterate(self):
        """
        arrange: a weight matrix that is not stochastic and agents on opposite sides
        act: run a round
        assert: InfeasibleIterateError is raised
        """
        chart = Euclidean(1)
        ball = _ball(chart, 1.0)
        oracle = QuadraticLoss(np.array([[-1.0], [1.0]]))
        state = online.initial_state(chart, ball.center, 2)
        schedule = online.StepSchedule("constant", 1.0, 1, 1.0)
        matrix = network.WeightMatrix([[0.0, 3.0], [3.0, 0.0]])
        with self.assertRaises(InfeasibleIterateError):
            online.full_info_round(chart, state, oracle, matrix, ball, schedule, 1)

    def test_agent_view(self):
        """
        arrange: an initial state of three agents
        act: read the state of agent 2
        assert: it holds the start point and a zero gradient anchored there
        """
        chart = Sphere(2)
        start = Point([0.0, 0.0, 1.0])
        agent = online.initial_state(chart, start, 3).agent(2)
        np.testing.assert_array_equal(agent.x.coords, start.coords)
        np.testing.assert_array_equal(agent.last_gradient.base.coords, start.coords)
        self.assertEqual(chart.norm(agent.last_gradient), 0.0)


class TestBandit(unittest.TestCase):
    """Two-point bandit round unit tests."""

    def setUp(self):
        """Set up the sphere ball and the experiment schedule."""
        self.chart = Sphere(4)
        self.ball = _ball(self.chart, math.pi / 4)
        self.schedule = online.StepSchedule("adaptive", 1.0, 200, 1.0, math.pi / 50, 0.08)

    def _rngs(self, n, seed=0):
        """Return one generator per agent spawned from a seed."""
        return [np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(n)]

    def test_constant_loss_moves_by_consensus_only(self):
        """
        arrange: agents at one point and a constant loss
        act: run a bandit round
        assert: the estimators vanish and the decisions stay put
        """
        state = online.initial_state(self.chart, self.ball.center, 5)
        after, queries = online.bandit_round(
            self.chart,
            state,
            ConstantLoss(2.0, 5),
            network.build_complete(5),
            self.ball,
            self.schedule,
            1,
            self._rngs(5),
        )
        self.assertEqual(queries.shape, (5, 2, self.chart.ambient_dim))
        self.assertEqual(np.abs(after.last_gradient).max(), 0.0)
        np.testing.assert_allclose(after.x, state.x, atol=1e-12)
        distances = self.chart.distance(state.x, queries[:, 0])
        np.testing.assert_allclose(distances, math.pi / 50, atol=1e-12)

    def test_estimator_bound_and_feasibility(self):
        """
        arrange: ten agents on a ring facing the squared-distance loss stream
        act: run 200 bandit rounds
        assert: every estimator is at most d L and every decision is in the shrunken ball
        """
        n = 10
        oracle = FrechetLossStream(
            self.chart, self.ball, math.pi / 16, n, np.random.default_rng(1)
        )
        matrix = network.build_ring(n, 4)
        rngs = self._rngs(n, seed=2)
        state = online.initial_state(self.chart, self.ball.center, n)
        shrunken = self.ball.shrink(self.schedule.tau)
        for t in range(1, 201):
            start = state.x
            state, _ = online.bandit_round(
                self.chart, state, oracle, matrix, self.ball, self.schedule, t, rngs
            )
            norms = self.chart.norm_array(start, state.last_gradient)
            self.assertTrue(np.all(norms <= self.chart.dim * oracle.lipschitz + 1e-9))
            distances = self.chart.distance(self.ball.center.coords, state.x)
            self.assertTrue(np.all(distances <= shrunken.radius + 1e-9))

    def test_same_seeds_same_trajectory(self):
        """
        arrange: two identical runs with the same agent seeds
        act: run five bandit rounds each
        assert: the states are bit-identical
        """
        finals = []
        for _ in range(2):
            oracle = FrechetLossStream(
                self.chart, self.ball, math.pi / 16, 3, np.random.default_rng(3)
            )
            rngs = self._rngs(3, seed=4)
            state = online.initial_state(self.chart, self.ball.center, 3)
            for t in range(1, 6):
                state, _ = online.bandit_round(
                    self.chart,
                    state,
                    oracle,
                    network.build_complete(3),
                    self.ball,
                    self.schedule,
                    t,
                    rngs,
                )
            finals.append(state.x)
        np.testing.assert_array_equal(finals[0], finals[1])

    def test_infeasible_query(self):
        """
        arrange: an agent on the boundary of a planar ball and no shrinkage
        act: run a bandit round
        assert: InfeasibleQueryError names the agent
        """
        chart = Euclidean(2)
        schedule = online.StepSchedule("adaptive", 1.0, 10, 1.0, 0.1, 0.0)
        state = online.initial_state(chart, Point([1.0, 0.0]), 1)
        with self.assertRaises(InfeasibleQueryError) as caught:
            online.bandit_round(
                chart,
                state,
                ConstantLoss(0.0, 1),
                network.build_complete(1),
                _ball(chart, 1.0),
                schedule,
                1,
                self._rngs(1),
            )
        self.assertEqual(caught.exception.agent_index, 0)

    def test_euclidean_matches_linear_algebra(self):
        """
        arrange: three agents in the plane with quadratic losses and cloned direction streams
        act: run 100 bandit rounds and the same update coded with matrices
        assert: the trajectories agree within 1e-10
        """
        chart = Euclidean(2)
        ball = _ball(chart, 1.0)
        targets = np.array([[1.5, 0.0], [0.0, -0.4], [-0.7, 0.9]])
        oracle = QuadraticLoss(targets)
        matrix = network.build_complete(3)
        schedule = online.StepSchedule("adaptive", 0.2, 100, 0.5, 0.05, 0.1)
        rngs = self._rngs(3, seed=5)
        clones = self._rngs(3, seed=5)
        mixing = 0.5 * np.eye(3) + 0.5 * matrix.w
        state = online.initial_state(chart, ball.center, 3)
        flat = np.zeros((3, 2))
        for t in range(1, 101):
            state, _ = online.bandit_round(chart, state, oracle, matrix, ball, schedule, t, rngs)
            directions = np.stack([rng.standard_normal(2) for rng in clones])
            directions /= np.linalg.norm(directions, axis=1, keepdims=True)
            plus = np.sum((flat + 0.05 * directions - targets) ** 2, axis=1)
            minus = np.sum((flat - 0.05 * directions - targets) ** 2, axis=1)
            estimators = (2 / 0.1) * (plus - minus)[:, None] * directions
            stepped = flat - schedule.eta(t) * estimators
            flat = mixing @ _project(np.zeros(2), 0.9, stepped)
            np.testing.assert_allclose(state.x, flat, atol=1e-10)


class TestEstimator(unittest.TestCase):
    """Smoothing and estimator oracle unit tests."""

    def test_constant_loss(self):
        """
        arrange: a constant loss on the sphere
        act: smooth it and check the estimator mean
        assert: the smoothed value is exact with zero error and both gradients vanish
        """
        chart = Sphere(2)
        x = Point([0.0, 0.0, 1.0])
        oracle = ConstantLoss(3.0, 1)
        rng = np.random.default_rng(6)
        smoothed = online.smoothed_value(chart, oracle, 0, 1, x, 0.05, rng, 100)
        self.assertEqual(smoothed, online.MonteCarloEstimate(3.0, 0.0))
        report = online.estimator_mean_check(chart, oracle, 0, 1, x, 0.05, rng, 100)
        self.assertEqual(np.abs(report.estimator_mean).max(), 0.0)
        self.assertEqual(np.abs(report.reference).max(), 0.0)
        self.assertEqual(report.relative_error, 0.0)

    def test_estimator_symmetry(self):
        """
        arrange: seeded directions at a sphere point
        act: evaluate the estimator with u and with -u
        assert: both estimators are identical
        """
        chart = Sphere(3)
        ball = _ball(chart, math.pi / 4)
        oracle = FrechetLossStream(chart, ball, 0.0, 1, np.random.default_rng(7))
        x = Point(chart.sample_ball(ball.center.coords, math.pi / 8, np.random.default_rng(8)))
        delta = 0.05
        estimators = online.estimator_samples(
            chart, oracle, 0, 1, x, delta, np.random.default_rng(9), 50
        )
        base = np.broadcast_to(x.coords, (50, x.coords.size))
        directions = -chart.sample_unit_tangents(base, np.random.default_rng(9))
        flipped = oracle.value(chart.expmap(base, delta * directions), 0, 1) - oracle.value(
            chart.expmap(base, -delta * directions), 0, 1
        )
        np.testing.assert_allclose(
            estimators, (3 / (2 * delta)) * flipped[:, None] * directions, atol=1e-12
        )

    def test_quadratic_smoothing(self):
        """
        arrange: a flat quadratic loss
        act: smooth it with delta = 0.1
        assert: the estimate is within four standard errors of |x - z|^2 + delta^2
        """
        chart = Euclidean(3)
        oracle = QuadraticLoss(np.array([[1.0, 2.0, -1.0]]))
        x = Point([0.2, 0.0, 0.1])
        estimate = online.smoothed_value(
            chart, oracle, 0, 1, x, 0.1, np.random.default_rng(10), 10000
        )
        expected = float(np.sum((x.coords - oracle.targets[0]) ** 2)) + 0.01
        self.assertGreater(estimate.stderr, 0.0)
        self.assertLessEqual(abs(estimate.mean - expected), 4 * estimate.stderr)

    def test_smoothing_error_within_lipschitz(self):
        """
        arrange: the squared-distance loss on a sphere ball
        act: smooth it at delta 0.01 and 0.05
        assert: the smoothed value is within delta L + 3 SE of the loss
        """
        chart = Sphere(3)
        ball = _ball(chart, math.pi / 4)
        oracle = FrechetLossStream(chart, ball, 0.0, 1, np.random.default_rng(11))
        x = Point(chart.sample_ball(ball.center.coords, math.pi / 8, np.random.default_rng(12)))
        exact = float(oracle.value(x.coords, 0, 1))
        for delta in (0.01, 0.05):
            estimate = online.smoothed_value(
                chart, oracle, 0, 1, x, delta, np.random.default_rng(13), 5000
            )
            self.assertLessEqual(
                abs(estimate.mean - exact), delta * oracle.lipschitz + 3 * estimate.stderr
            )

    def test_linear_estimator_mean(self):
        """
        arrange: a flat linear loss with slope a
        act: average 10^5 estimators
        assert: the mean is within four standard errors of a and matches the reference
        """
        chart = Euclidean(3)
        slope = np.array([1.0, -2.0, 0.5])
        report = online.estimator_mean_check(
            chart,
            LinearLoss(slope),
            0,
            1,
            Point([0.1, 0.2, 0.3]),
            0.1,
            np.random.default_rng(14),
            100000,
        )
        error = np.abs(report.estimator_mean - slope)
        self.assertTrue(np.all(error <= 4 * report.estimator_stderr))
        np.testing.assert_allclose(report.reference, slope, atol=1e-6)

    def test_sphere_estimator_mean(self):
        """
        arrange: the squared-distance loss on S^2 and delta = 0.05
        act: compare the estimator mean with the smoothed pullback gradient at 10^5 samples
        assert: the relative error is below 5%
        """
        chart = Sphere(2)
        oracle = SquaredDistanceLoss(chart, np.array([math.sin(0.5), 0.0, math.cos(0.5)]))
        x = Point([0.0, 0.0, 1.0])
        report = online.estimator_mean_check(
            chart, oracle, 0, 1, x, 0.05, np.random.default_rng(16), 100000
        )
        self.assertLess(report.relative_error, 0.05)


class TestSubconvexity(unittest.TestCase):
    """Subconvexity defect unit tests."""

    def test_flat_quadratic_is_convex(self):
        """
        arrange: a flat quadratic loss and seeded pairs of points
        act: estimate the subconvexity defect
        assert: it is nonnegative within three standard errors
        """
        chart = Euclidean(2)
        oracle = QuadraticLoss(np.array([[0.3, -0.2]]))
        rng = np.random.default_rng(17)
        for _ in range(20):
            x, y = (Point(rng.uniform(-1.0, 1.0, size=2)) for _ in range(2))
            defect = online.subconvexity_defect(chart, oracle, 0, 1, x, y, 0.1, rng, 2000)
            self.assertGreaterEqual(defect.mean, -3 * defect.stderr)

    def test_same_point(self):
        """
        arrange: a sphere loss and x = y
        act: estimate the subconvexity defect
        assert: it vanishes within three standard errors
        """
        chart = Sphere(3)
        ball = _ball(chart, math.pi / 4)
        oracle = FrechetLossStream(chart, ball, 0.0, 1, np.random.default_rng(18))
        x = Point(ball.center.coords)
        defect = online.subconvexity_defect(
            chart, oracle, 0, 1, x, x, 0.05, np.random.default_rng(19), 5000
        )
        self.assertLessEqual(abs(defect.mean), 3 * defect.stderr)

    def test_sphere_defect_bounded(self):
        """
        arrange: the squared-distance loss on S^3 and 200 seeded pairs in a pi/4 ball
        act: estimate the subconvexity defect at delta = 0.05
        assert: the smallest defect is above -delta L c6 - 3 SE for the heuristic constants
        """
        chart = Sphere(3)
        ball = _ball(chart, math.pi / 4)
        oracle = FrechetLossStream(chart, ball, 0.0, 1, np.random.default_rng(20))
        delta = 0.05
        ctx = CurvatureContext.build(
            k_min=1.0, k_max=1.0, diameter=math.pi / 4, n_agents=1, sigma2=0.0
        )
        allowance = delta * oracle.lipschitz * derive(ctx, smoothing_radius=delta).c6
        rng = np.random.default_rng(21)
        centers = np.tile(ball.center.coords, (200, 1))
        xs = chart.sample_ball(centers, math.pi / 4, rng)
        ys = chart.sample_ball(centers, math.pi / 4, rng)
        for x, y in zip(xs, ys):
            defect = online.subconvexity_defect(
                chart, oracle, 0, 1, Point(x), Point(y), delta, rng, 1000
            )
            self.assertGreaterEqual(defect.mean, -allowance - 3 * defect.stderr)
