# Copyright 2025 Canonical Ltd.
# See LICENSE file for licensing details.

"""Curvature-aware consensus and the Frechet mean diagnostics behind it."""

import dataclasses
import logging
import typing

import numpy as np

from constants import DEGENERATE_VARIANCE_TOL, FRECHET_MAX_ITER, FRECHET_TOL
from exceptions import (
    BeyondInjectivityError,
    DegenerateConfigurationError,
    InvalidPointError,
    InvalidStepSizeError,
    InvalidTopologyError,
    NoConvergenceError,
)
from manifold import GeodesicBall, ManifoldChart, Point
from network import WeightMatrix

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True, eq=False)
class Configuration:
    """Snapshot of one point per agent.

    Attrs:
        points: (n, ambient_dim) array of agent points.
        chart: manifold the points live on.
        ball: ball containing every point.
    """

    points: np.ndarray
    chart: ManifoldChart
    ball: GeodesicBall

    def __post_init__(self) -> None:
        """Freeze the points."""
        points = np.array(self.points, dtype=float)
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    @property
    def n(self) -> int:
        """Return the number of agents."""
        return self.points.shape[0]

    def validate(self) -> None:
        """Check that every point is valid and lies in the ball.

        Raises:
            InvalidPointError: if a point is off the manifold or outside the ball.
        """
        if self.points.ndim != 2 or self.points.shape[0] == 0:
            raise InvalidPointError(f"expected an (n, ambient) array, got {self.points.shape}")
        for point in self.points:
            self.chart.check_point(Point(point))
        distances = self.chart.distance(self.ball.center.coords, self.points)
        outside = np.flatnonzero(distances > self.ball.radius + 1e-9)
        if outside.size:
            raise InvalidPointError(f"agents {outside.tolist()} lie outside the ball")

    def with_points(self, points: np.ndarray) -> "Configuration":
        """Return the configuration with other points.

        Args:
            points: the new points.

        Returns:
            the new configuration.
        """
        return Configuration(points=points, chart=self.chart, ball=self.ball)


def pairwise_distances(cfg: Configuration) -> np.ndarray:
    """Return the n x n matrix of geodesic distances.

    Args:
        cfg: configuration.

    Returns:
        the distances.
    """
    points = cfg.points
    return cfg.chart.distance(points[:, None, :], points[None, :, :])


def frechet_mean_array(
    chart: ManifoldChart,
    points: np.ndarray,
    weights: typing.Optional[np.ndarray] = None,
    tol: float = FRECHET_TOL,
    max_iter: int = FRECHET_MAX_ITER,
) -> np.ndarray:
    """Solve for the weighted Frechet mean by unit-step fixed-point iteration.

    Args:
        chart: manifold.
        points: (m, ambient_dim) points.
        weights: nonnegative weights summing to one; uniform when None.
        tol: stationarity tolerance on |sum_j w_j Log_x y_j|.
        max_iter: iteration budget.

    Returns:
        the mean, starting the iteration from the first point.

    Raises:
        NoConvergenceError: if the residual stays above tol.
    """
    points = np.asarray(points, dtype=float)
    if weights is None:
        weights = np.full(points.shape[0], 1.0 / points.shape[0])
    mean = points[0]
    residual = float("inf")
    for iteration in range(max_iter + 1):
        step = np.tensordot(weights, chart.logmap(mean, points), axes=1)
        residual = float(chart.norm_array(mean, step))
        if residual < tol:
            logger.debug("Frechet mean converged after %d iterations", iteration)
            return mean
        mean = chart.expmap(mean, step)
    raise NoConvergenceError(
        f"Frechet mean residual {residual:.3e} above {tol:.1e} after {max_iter} iterations",
        residual=residual,
    )


def frechet_mean(
    cfg: Configuration,
    weights: typing.Optional[typing.Sequence[float]] = None,
    tol: float = FRECHET_TOL,
    max_iter: int = FRECHET_MAX_ITER,
) -> Point:
    """Return the weighted Frechet mean of a configuration.

    Args:
        cfg: configuration.
        weights: nonnegative weights summing to one; uniform when None.
        tol: stationarity tolerance.
        max_iter: iteration budget.

    Returns:
        the mean.

    Raises:
        InvalidPointError: if the weights are not a probability vector.
    """
    cfg.validate()
    array = None
    if weights is not None:
        array = np.asarray(weights, dtype=float)
        if array.shape != (cfg.n,) or np.any(array < 0) or abs(array.sum() - 1.0) > 1e-12:
            raise InvalidPointError("weights must be n nonnegative reals summing to one")
    return Point(frechet_mean_array(cfg.chart, cfg.points, array, tol, max_iter))


def variance_about(cfg: Configuration, anchor: np.ndarray) -> float:
    """Return the mean squared distance of the points to an anchor.

    Args:
        cfg: configuration.
        anchor: point coordinates.

    Returns:
        (1/n) sum_i d^2(y_i, anchor).
    """
    return float(np.mean(cfg.chart.distance(cfg.points, anchor) ** 2))


def variance(cfg: Configuration) -> float:
    """Return the consensus variance about the Frechet mean.

    Args:
        cfg: configuration.

    Returns:
        (1/n) sum_i d^2(y_i, mean).
    """
    return variance_about(cfg, frechet_mean_array(cfg.chart, cfg.points))


def weighted_dispersion(cfg: Configuration, matrix: WeightMatrix) -> float:
    """Return the weighted sum of squared pairwise distances.

    Args:
        cfg: configuration.
        matrix: communication matrix of the same size.

    Returns:
        sum_ij w_ij d^2(y_i, y_j).

    Raises:
        InvalidTopologyError: if the sizes differ.
    """
    if matrix.n != cfg.n:
        raise InvalidTopologyError(f"{matrix.n} weights for {cfg.n} agents")
    return float(np.sum(matrix.w * pairwise_distances(cfg) ** 2))


def consensus_points(
    chart: ManifoldChart, points: np.ndarray, weights: np.ndarray, step: float
) -> np.ndarray:
    """Apply one synchronous consensus round to an array of points.

    Every agent reads the same input snapshot:
    x_i = Exp_{y_i}(s sum_j w_ij Log_{y_i} y_j).

    Args:
        chart: manifold.
        points: (n, ambient_dim) input points.
        weights: (n, n) communication weights.
        step: consensus step-size s in [0, 1].

    Returns:
        the new points.

    Raises:
        InvalidStepSizeError: if s is outside [0, 1].
        BeyondInjectivityError: if two neighbors are beyond the injectivity radius.
    """
    if not 0 <= step <= 1:
        raise InvalidStepSizeError(f"consensus step-size must lie in [0, 1], got {step}")
    if step == 0:
        return np.array(points, dtype=float)
    rows, cols = np.nonzero(weights > 0)
    if np.isfinite(chart.injectivity_radius):
        distances = chart.distance(points[rows], points[cols])
        if np.any(distances >= chart.injectivity_radius):
            raise BeyondInjectivityError("neighbors are beyond the injectivity radius")
    logs = chart.logmap(points[rows], points[cols])
    direction = np.zeros_like(points, dtype=float)
    np.add.at(direction, rows, weights[rows, cols, None] * logs)
    return chart.expmap(points, step * direction)


def consensus_step(cfg: Configuration, matrix: WeightMatrix, step: float) -> Configuration:
    """Apply one synchronous consensus round.

    Args:
        cfg: input configuration.
        matrix: communication matrix.
        step: consensus step-size s in [0, 1].

    Returns:
        the configuration after the round.

    Raises:
        InvalidTopologyError: if the sizes differ.
    """
    if matrix.n != cfg.n:
        raise InvalidTopologyError(f"{matrix.n} weights for {cfg.n} agents")
    return cfg.with_points(consensus_points(cfg.chart, cfg.points, matrix.w, step))


@dataclasses.dataclass(frozen=True)
class ContractionMeasurement:
    """Variance reduction of one consensus round.

    Attrs:
        ratio: (1/n) sum_i d^2(x_i(s), pre-step mean) over the pre-step variance.
        variance_ratio: post-step variance over the pre-step variance; never above ratio.
        variance_before: pre-step variance.
    """

    ratio: float
    variance_ratio: float
    variance_before: float


def measure_contraction(
    cfg: Configuration, matrix: WeightMatrix, step: float
) -> ContractionMeasurement:
    """Measure how much one consensus round contracts a configuration.

    Args:
        cfg: input configuration.
        matrix: communication matrix.
        step: consensus step-size.

    Returns:
        both contraction ratios.

    Raises:
        DegenerateConfigurationError: if the input variance has collapsed to round-off.
    """
    mean = frechet_mean_array(cfg.chart, cfg.points)
    before = variance_about(cfg, mean)
    if before <= DEGENERATE_VARIANCE_TOL:
        raise DegenerateConfigurationError("all points coincide; contraction is undefined")
    after = consensus_step(cfg, matrix, step)
    return ContractionMeasurement(
        ratio=variance_about(after, mean) / before,
        variance_ratio=variance(after) / before,
        variance_before=before,
    )


def contraction_ratio(cfg: Configuration, matrix: WeightMatrix, step: float) -> float:
    """Return the contraction of one consensus round measured about the pre-step mean.

    Args:
        cfg: input configuration.
        matrix: communication matrix.
        step: consensus step-size.

    Returns:
        (1/n) sum_i d^2(x_i(s), pre-step mean) / Var({y_i}).
    """
    return measure_contraction(cfg, matrix, step).ratio
