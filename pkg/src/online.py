# Copyright 2025 Canonical Ltd.
# See LICENSE file for licensing details.

"""Decentralized online Riemannian gradient descent, full-information and two-point bandit.

A round reads the network state at its start, moves every agent along its
(estimated) negative gradient, projects onto the feasible ball and finishes
with one consensus round over the projected points. Rounds are vectorized over
agents; the only per-agent work is drawing from the agent's own random stream,
so results do not depend on evaluation order.
"""

import abc
import dataclasses
import logging
import math
import typing

import numpy as np

from consensus import consensus_points
from constants import FD_RELATIVE_STEP, FEASIBILITY_TOL, GRADIENT_BLOWUP_FACTOR
from exceptions import (
    GradientBlowupError,
    InfeasibleIterateError,
    InfeasibleQueryError,
    InvalidScheduleError,
)
from manifold import GeodesicBall, ManifoldChart, Point, TangentVector
from network import WeightMatrix

logger = logging.getLogger(__name__)

ETA_RULES = ("constant", "adaptive")


class LossOracle(abc.ABC):
    """Sequence of local losses f_{i,t}, one per agent and round.

    Points are passed as arrays with the ambient coordinates on the last axis;
    leading axes broadcast.

    Attrs:
        lipschitz: Lipschitz constant L of every loss on the feasible set.
        n_agents: number of agents.
    """

    lipschitz: float
    n_agents: int

    @abc.abstractmethod
    def value(self, x: np.ndarray, agent: int, t: int) -> np.ndarray:
        """Evaluate f_{agent,t}.

        Args:
            x: points, shape (..., ambient_dim).
            agent: agent index.
            t: round, starting at 1.

        Returns:
            the values, shape (...).
        """

    def gradient(self, x: np.ndarray, agent: int, t: int) -> np.ndarray:
        """Evaluate the Riemannian gradient of f_{agent,t}.

        Args:
            x: points, shape (..., ambient_dim).
            agent: agent index.
            t: round.

        Raises:
            NotImplementedError: for value-only oracles.
        """
        raise NotImplementedError(f"{type(self).__name__} only provides values")

    def values(self, xs: np.ndarray, t: int) -> np.ndarray:
        """Evaluate every agent's loss at its own point.

        Args:
            xs: (n, ambient_dim) points, row i for agent i.
            t: round.

        Returns:
            the n values.
        """
        return np.array([self.value(x, agent, t) for agent, x in enumerate(xs)], dtype=float)

    def gradients(self, xs: np.ndarray, t: int) -> np.ndarray:
        """Evaluate every agent's gradient at its own point.

        Args:
            xs: (n, ambient_dim) points.
            t: round.

        Returns:
            the (n, ambient_dim) gradients.
        """
        return np.stack([self.gradient(x, agent, t) for agent, x in enumerate(xs)])

    def global_value(self, x: np.ndarray, t: int) -> np.ndarray:
        """Evaluate the network objective f_t = (1/n) sum_i f_{i,t}.

        Args:
            x: points, shape (..., ambient_dim).
            t: round.

        Returns:
            the values, shape (...).
        """
        return np.mean([self.value(x, agent, t) for agent in range(self.n_agents)], axis=0)


@dataclasses.dataclass(frozen=True)
class StepSchedule:
    """Step sizes of a run.

    Attrs:
        eta_rule: `constant` for c/sqrt(T) or `adaptive` for c/sqrt(t).
        eta_scale: the constant c, nonnegative.
        horizon: number of rounds T.
        consensus_step: consensus step-size s in [0, 1].
        delta: smoothing radius, positive in bandit runs.
        tau: shrink fraction of the feasible ball in [0, 1).
    """

    eta_rule: str
    eta_scale: float
    horizon: int
    consensus_step: float
    delta: float = 0.0
    tau: float = 0.0

    def __post_init__(self) -> None:
        """Check the invariants.

        Raises:
            InvalidScheduleError: if a field is out of range.
        """
        if self.eta_rule not in ETA_RULES:
            raise InvalidScheduleError(f"eta rule must be one of {ETA_RULES}, got {self.eta_rule}")
        if self.eta_scale < 0 or self.horizon < 1:
            raise InvalidScheduleError("eta scale must be nonnegative and horizon positive")
        if not 0 <= self.consensus_step <= 1:
            raise InvalidScheduleError(f"consensus step {self.consensus_step} outside [0, 1]")
        if self.delta < 0 or not 0 <= self.tau < 1:
            raise InvalidScheduleError("delta must be nonnegative and tau in [0, 1)")

    def eta(self, t: int) -> float:
        """Return the gradient step-size of round t.

        Args:
            t: round, starting at 1.

        Returns:
            eta(t).
        """
        if self.eta_rule == "constant":
            return self.eta_scale / math.sqrt(self.horizon)
        return self.eta_scale / math.sqrt(t)

    def check_bandit_feasibility(self, ball: GeodesicBall, ratio: float = 1.0) -> None:
        """Check that delta-perturbations of the shrunken ball stay inside the ball.

        Args:
            ball: unshrunken feasible ball.
            ratio: the theta ratio of the curvature bounds.

        Raises:
            InvalidScheduleError: if delta is not positive or exceeds theta r tau.
        """
        if self.delta <= 0:
            raise InvalidScheduleError("bandit runs need a positive smoothing radius")
        limit = ratio * ball.radius * self.tau
        if self.delta > limit + 1e-12:
            raise InvalidScheduleError(
                f"smoothing radius {self.delta:.6g} exceeds theta*r*tau = {limit:.6g}"
            )


@dataclasses.dataclass(frozen=True)
class AgentState:
    """State of one agent.

    Attrs:
        x: current decision x_{i,t}.
        y_next: projected point y_{i,t+1} of the last round.
        last_gradient: gradient or estimator applied in the last round.
    """

    x: Point
    y_next: Point
    last_gradient: TangentVector


@dataclasses.dataclass(frozen=True, eq=False)
class NetworkState:
    """States of all agents as stacked (n, ambient_dim) arrays.

    Attrs:
        x: decisions.
        y_next: projected points of the last round.
        last_gradient: gradients or estimators of the last round.
    """

    x: np.ndarray
    y_next: np.ndarray
    last_gradient: np.ndarray

    @property
    def n(self) -> int:
        """Return the number of agents."""
        return self.x.shape[0]

    def agent(self, i: int) -> AgentState:
        """Return the state of one agent.

        Args:
            i: agent index.

        Returns:
            the agent state.
        """
        x = Point(self.x[i])
        return AgentState(
            x=x,
            y_next=Point(self.y_next[i]),
            last_gradient=TangentVector(x, self.last_gradient[i]),
        )


def initial_state(chart: ManifoldChart, x1: Point, n: int) -> NetworkState:
    """Start every agent at the same point.

    Args:
        chart: manifold.
        x1: common initial point.
        n: number of agents.

    Returns:
        the state with zero gradients.
    """
    chart.check_point(x1)
    x = np.tile(x1.coords, (n, 1))
    return NetworkState(x=x, y_next=x.copy(), last_gradient=np.zeros_like(x))


def _check_inside(
    chart: ManifoldChart, ball: GeodesicBall, points: np.ndarray
) -> typing.Optional[int]:
    """Return the first agent outside the ball, if any.

    Args:
        chart: manifold.
        ball: feasible ball.
        points: (n, ambient_dim) points.

    Returns:
        the agent index or None.
    """
    excess = chart.distance(ball.center.coords, points) - ball.radius
    outside = np.flatnonzero(excess > FEASIBILITY_TOL)
    return int(outside[0]) if outside.size else None


def _descend(  # pylint: disable=too-many-arguments
    chart: ManifoldChart,
    state: NetworkState,
    gradients: np.ndarray,
    matrix: WeightMatrix,
    feasible: GeodesicBall,
    schedule: StepSchedule,
    t: int,
) -> NetworkState:
    """Apply the gradient, projection and consensus half-steps of a round.

    Args:
        chart: manifold.
        state: round-start state.
        gradients: (n, ambient_dim) gradients or estimators.
        matrix: communication matrix.
        feasible: ball the projection targets.
        schedule: step sizes.
        t: round.

    Returns:
        the state after the round.

    Raises:
        InfeasibleIterateError: if consensus leaves the feasible ball.
    """
    moved = chart.expmap(state.x, -schedule.eta(t) * gradients)
    projected = chart.project_ball_array(feasible.center.coords, feasible.radius, moved)
    decisions = consensus_points(chart, projected, matrix.w, schedule.consensus_step)
    agent = _check_inside(chart, feasible, decisions)
    if agent is not None:
        raise InfeasibleIterateError("decision left the feasible ball", agent_index=agent)
    return NetworkState(x=decisions, y_next=projected, last_gradient=gradients)


def full_info_round(  # pylint: disable=too-many-arguments
    chart: ManifoldChart,
    state: NetworkState,
    oracle: LossOracle,
    matrix: WeightMatrix,
    ball: GeodesicBall,
    schedule: StepSchedule,
    t: int,
) -> NetworkState:
    """Run one round of full-information decentralized gradient descent.

    Args:
        chart: manifold.
        state: round-start state.
        oracle: losses with gradients.
        matrix: communication matrix.
        ball: feasible ball.
        schedule: step sizes.
        t: round, starting at 1.

    Returns:
        the state after the round.

    Raises:
        GradientBlowupError: if a gradient exceeds ten times the Lipschitz constant.
    """
    gradients = oracle.gradients(state.x, t)
    norms = chart.norm_array(state.x, gradients)
    too_large = np.flatnonzero(norms > GRADIENT_BLOWUP_FACTOR * oracle.lipschitz)
    if too_large.size:
        agent = int(too_large[0])
        raise GradientBlowupError(
            f"gradient norm {norms[agent]:.4g} exceeds "
            f"{GRADIENT_BLOWUP_FACTOR:g} L = {GRADIENT_BLOWUP_FACTOR * oracle.lipschitz:.4g}",
            agent_index=agent,
        )
    return _descend(chart, state, gradients, matrix, ball, schedule, t)


def sample_directions(
    chart: ManifoldChart, points: np.ndarray, rngs: typing.Sequence[np.random.Generator]
) -> np.ndarray:
    """Draw one unit tangent per agent from the agent's own stream.

    Args:
        chart: manifold.
        points: (n, ambient_dim) base points.
        rngs: one generator per agent.

    Returns:
        the (n, ambient_dim) directions.
    """
    return np.stack([chart.sample_unit_tangents(x, rng) for x, rng in zip(points, rngs)])


def bandit_round(  # pylint: disable=too-many-arguments
    chart: ManifoldChart,
    state: NetworkState,
    oracle: LossOracle,
    matrix: WeightMatrix,
    ball: GeodesicBall,
    schedule: StepSchedule,
    t: int,
    rngs: typing.Sequence[np.random.Generator],
) -> typing.Tuple[NetworkState, np.ndarray]:
    """Run one round of the two-point bandit algorithm.

    Each agent queries its loss at Exp_x(+-delta u) and steps along
    g = d/(2 delta) (f(x_1) - f(x_2)) u, projecting onto the shrunken ball.

    Args:
        chart: manifold.
        state: round-start state, inside the shrunken ball.
        oracle: losses; only values are queried.
        matrix: communication matrix.
        ball: unshrunken feasible ball.
        schedule: step sizes, with delta and tau.
        t: round, starting at 1.
        rngs: one generator per agent.

    Returns:
        the state after the round and the (n, 2, ambient_dim) query points.

    Raises:
        InfeasibleQueryError: if a query point leaves the unshrunken ball.
    """
    delta = schedule.delta
    directions = sample_directions(chart, state.x, rngs)
    first = chart.expmap(state.x, delta * directions)
    second = chart.expmap(state.x, -delta * directions)
    for queries in (first, second):
        agent = _check_inside(chart, ball, queries)
        if agent is not None:
            raise InfeasibleQueryError("query point left the feasible ball", agent_index=agent)
    difference = oracle.values(first, t) - oracle.values(second, t)
    estimators = (chart.dim / (2 * delta)) * difference[:, None] * directions
    after = _descend(chart, state, estimators, matrix, ball.shrink(schedule.tau), schedule, t)
    return after, np.stack([first, second], axis=1)


class MonteCarloEstimate(typing.NamedTuple):
    """Monte Carlo mean with its standard error.

    Attrs:
        mean: sample mean.
        stderr: standard error of the mean.
    """

    mean: float
    stderr: float


def _estimate(samples: np.ndarray) -> MonteCarloEstimate:
    """Summarize scalar samples.

    Args:
        samples: one-dimensional samples.

    Returns:
        the mean and its standard error.
    """
    if samples.size < 2:
        return MonteCarloEstimate(float(np.mean(samples)), 0.0)
    return MonteCarloEstimate(
        float(np.mean(samples)), float(np.std(samples, ddof=1) / math.sqrt(samples.size))
    )


def smoothed_value(  # pylint: disable=too-many-arguments
    chart: ManifoldChart,
    oracle: LossOracle,
    agent: int,
    t: int,
    x: Point,
    delta: float,
    rng: np.random.Generator,
    samples: int,
) -> MonteCarloEstimate:
    """Estimate the sphere-smoothed loss f^delta(x) = E_u f(Exp_x(delta u)).

    Args:
        chart: manifold.
        oracle: losses.
        agent: agent index.
        t: round.
        x: evaluation point.
        delta: smoothing radius.
        rng: random generator.
        samples: number of directions m, at least 1.

    Returns:
        the estimate.
    """
    base = np.broadcast_to(x.coords, (samples, x.coords.size))
    directions = chart.sample_unit_tangents(base, rng)
    values = oracle.value(chart.expmap(base, delta * directions), agent, t)
    return _estimate(np.asarray(values, dtype=float))


def estimator_samples(  # pylint: disable=too-many-arguments
    chart: ManifoldChart,
    oracle: LossOracle,
    agent: int,
    t: int,
    x: Point,
    delta: float,
    rng: np.random.Generator,
    samples: int,
) -> np.ndarray:
    """Draw independent two-point estimators at a fixed point.

    Args:
        chart: manifold.
        oracle: losses.
        agent: agent index.
        t: round.
        x: evaluation point.
        delta: smoothing radius.
        rng: random generator.
        samples: number of estimators.

    Returns:
        the (samples, ambient_dim) estimators.
    """
    base = np.broadcast_to(x.coords, (samples, x.coords.size))
    directions = chart.sample_unit_tangents(base, rng)
    difference = oracle.value(chart.expmap(base, delta * directions), agent, t) - oracle.value(
        chart.expmap(base, -delta * directions), agent, t
    )
    return (chart.dim / (2 * delta)) * np.asarray(difference)[:, None] * directions


@dataclasses.dataclass(frozen=True)
class EstimatorCheckReport:
    """Comparison of the estimator mean with the gradient of the ball-smoothed pullback.

    Attrs:
        estimator_mean: Monte Carlo mean of the estimator, ambient coordinates.
        estimator_stderr: per-coordinate standard errors of that mean.
        reference: finite-difference gradient of the ball-smoothed pullback.
        reference_stderr: per-coordinate standard errors of the reference.
        relative_error: |mean - reference| / |reference| (absolute error when the
            reference vanishes).
    """

    estimator_mean: np.ndarray
    estimator_stderr: np.ndarray
    reference: np.ndarray
    reference_stderr: np.ndarray
    relative_error: float


def estimator_mean_check(  # pylint: disable=too-many-arguments,too-many-locals
    chart: ManifoldChart,
    oracle: LossOracle,
    agent: int,
    t: int,
    x: Point,
    delta: float,
    rng: np.random.Generator,
    samples: int,
) -> EstimatorCheckReport:
    """Compare the estimator mean with the gradient of the ball-smoothed pullback.

    The pullback h(v) = E_w f(Exp_x(v + w)), with w uniform in the delta-ball of
    the tangent space, is differentiated by central differences along an
    orthonormal tangent basis; both sides of each difference share the same w.

    Args:
        chart: manifold.
        oracle: losses.
        agent: agent index.
        t: round.
        x: evaluation point.
        delta: smoothing radius.
        rng: random generator.
        samples: Monte Carlo sample count for each side.

    Returns:
        the report.
    """
    estimators = estimator_samples(chart, oracle, agent, t, x, delta, rng, samples)
    estimator_mean = estimators.mean(axis=0)
    estimator_stderr = estimators.std(axis=0, ddof=1) / math.sqrt(samples)

    base = np.broadcast_to(x.coords, (samples, x.coords.size))
    radii = delta * rng.uniform(size=samples) ** (1.0 / chart.dim)
    offsets = radii[:, None] * chart.sample_unit_tangents(base, rng)
    step = FD_RELATIVE_STEP * delta
    basis = chart.tangent_basis(x.coords)
    slopes = np.empty((basis.shape[0], samples))
    for k, direction in enumerate(basis):
        forward = oracle.value(chart.expmap(base, offsets + step * direction), agent, t)
        backward = oracle.value(chart.expmap(base, offsets - step * direction), agent, t)
        slopes[k] = (np.asarray(forward) - np.asarray(backward)) / (2 * step)
    coefficients = slopes.mean(axis=1)
    coefficient_stderr = slopes.std(axis=1, ddof=1) / math.sqrt(samples)
    reference = coefficients @ basis
    reference_stderr = np.sqrt((coefficient_stderr**2) @ (basis**2))

    error = float(np.linalg.norm(estimator_mean - reference))
    scale = float(np.linalg.norm(reference))
    return EstimatorCheckReport(
        estimator_mean=estimator_mean,
        estimator_stderr=estimator_stderr,
        reference=reference,
        reference_stderr=reference_stderr,
        relative_error=error / scale if scale > 0 else error,
    )


def subconvexity_defect(  # pylint: disable=too-many-arguments
    chart: ManifoldChart,
    oracle: LossOracle,
    agent: int,
    t: int,
    x: Point,
    y: Point,
    delta: float,
    rng: np.random.Generator,
    samples: int,
) -> MonteCarloEstimate:
    """Estimate f^delta(y) - f^delta(x) - <grad f^delta(x), Log_x y>.

    The gradient is proxied by the estimator mean at x.

    Args:
        chart: manifold.
        oracle: losses.
        agent: agent index.
        t: round.
        x: first point.
        y: second point.
        delta: smoothing radius.
        rng: random generator.
        samples: Monte Carlo sample count for each term.

    Returns:
        the defect estimate; independent terms add their variances.
    """
    at_y = smoothed_value(chart, oracle, agent, t, y, delta, rng, samples)
    at_x = smoothed_value(chart, oracle, agent, t, x, delta, rng, samples)
    direction = chart.logmap(x.coords, y.coords)
    estimators = estimator_samples(chart, oracle, agent, t, x, delta, rng, samples)
    slopes = _estimate(chart.inner_product(x.coords, estimators, direction))
    return MonteCarloEstimate(
        mean=at_y.mean - at_x.mean - slopes.mean,
        stderr=math.sqrt(at_y.stderr**2 + at_x.stderr**2 + slopes.stderr**2),
    )
