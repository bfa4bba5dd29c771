#!/usr/bin/env python3
# Copyright 2025 Canonical Ltd.
# See LICENSE file for licensing details.

"""Helper module used to run experiments: losses, comparator, regret accounting and CSV output.

Seeds are split with numpy's SeedSequence: the master seed spawns one child per
repetition, and each repetition spawns, in order, the loss stream, the
comparator restarts and one stream per agent. Full-information and bandit runs
with the same master seed therefore see the same losses.
"""

import dataclasses
import logging
import os
import pathlib
import tempfile
import typing

import numpy as np
import pandas as pd

import network
from consensus import frechet_mean_array
from constants import (
    COMPARATOR_MAX_ITER,
    COMPARATOR_TOL,
    CSV_HEADER,
    CSV_SIGNIFICANT_DIGITS,
    VERSION,
)
from curvature import DerivedConstants, derive
from exceptions import (
    AgentError,
    ExperimentRuntimeError,
    GeodesicGossipError,
    NoConvergenceError,
    OutputWriteError,
)
from experiment_state import ExperimentConfig, ExperimentSetup, parse_lines
from manifold import GeodesicBall, ManifoldChart, Point
from online import LossOracle, NetworkState, bandit_round, full_info_round, initial_state

logger = logging.getLogger(__name__)

CONFIG_PREFIX = "config "
LOSS_STREAM_CHILD = 0
COMPARATOR_CHILD = 1
FIRST_AGENT_CHILD = 2


class FrechetLossStream(LossOracle):
    """Squared-distance losses f_{i,t}(x) = d^2(x, z_{i,t}) around fixed base targets.

    Every agent owns a base target z_i drawn uniformly from the feasible ball. At
    round t its target z_{i,t} is drawn uniformly from the base_spread-ball around
    z_i and projected back into the feasible ball. Targets are drawn round by round
    on first use and recorded, so the stream can be replayed.

    Attrs:
        chart: manifold.
        ball: feasible ball.
        base_spread: radius of the per-round perturbation.
        bases: (n, ambient_dim) base targets.
        lipschitz: 2D with D = 2r the ball diameter.
        n_agents: number of agents.
    """

    def __init__(
        self,
        chart: ManifoldChart,
        ball: GeodesicBall,
        base_spread: float,
        n_agents: int,
        rng: np.random.Generator,
    ) -> None:
        """Construct.

        Args:
            chart: manifold.
            ball: feasible ball.
            base_spread: radius of the per-round perturbation, nonnegative.
            n_agents: number of agents.
            rng: generator owned by the stream.
        """
        self.chart = chart
        self.ball = ball
        self.base_spread = base_spread
        self.n_agents = n_agents
        self.lipschitz = 2 * (2 * ball.radius)
        self._rng = rng
        centers = np.tile(ball.center.coords, (n_agents, 1))
        self.bases = chart.sample_ball(centers, ball.radius, rng)
        self._targets: typing.List[np.ndarray] = []
        self._stacked: typing.Optional[np.ndarray] = None

    def targets(self, t: int) -> np.ndarray:
        """Return the targets of round t, drawing any missing rounds first.

        Args:
            t: round, starting at 1.

        Returns:
            the (n, ambient_dim) targets.
        """
        while len(self._targets) < t:
            if self.base_spread == 0:
                drawn = self.bases.copy()
            else:
                drawn = self.chart.sample_ball(self.bases, self.base_spread, self._rng)
                drawn = self.chart.project_ball_array(
                    self.ball.center.coords, self.ball.radius, drawn
                )
            drawn.setflags(write=False)
            self._targets.append(drawn)
            self._stacked = None
        return self._targets[t - 1]

    @property
    def recorded(self) -> np.ndarray:
        """Return the (rounds, n, ambient_dim) targets drawn so far."""
        if not self._targets:
            return np.empty((0, self.n_agents, self.chart.ambient_dim))
        if self._stacked is None:
            self._stacked = np.stack(self._targets)
            self._stacked.setflags(write=False)
        return self._stacked

    def value(self, x: np.ndarray, agent: int, t: int) -> np.ndarray:
        """Return d^2(x, z_{agent,t})."""
        return self.chart.distance(x, self.targets(t)[agent]) ** 2

    def gradient(self, x: np.ndarray, agent: int, t: int) -> np.ndarray:
        """Return -2 Log_x(z_{agent,t})."""
        return -2.0 * self.chart.logmap(x, self.targets(t)[agent])

    def values(self, xs: np.ndarray, t: int) -> np.ndarray:
        """Return d^2(x_i, z_{i,t}) for every agent."""
        return self.chart.distance(xs, self.targets(t)) ** 2

    def gradients(self, xs: np.ndarray, t: int) -> np.ndarray:
        """Return -2 Log_{x_i}(z_{i,t}) for every agent."""
        return -2.0 * self.chart.logmap(xs, self.targets(t))

    def global_value(self, x: np.ndarray, t: int) -> np.ndarray:
        """Return (1/n) sum_i d^2(x, z_{i,t}), broadcasting over leading axes of x."""
        x = np.asarray(x, dtype=float)
        distances = self.chart.distance(x[..., None, :], self.targets(t))
        return np.mean(distances**2, axis=-1)

    def total_value(self, x: np.ndarray, horizon: int) -> float:
        """Return sum_{t <= horizon} f_t(x).

        Args:
            x: point coordinates.
            horizon: last round included.

        Returns:
            the cumulative global loss.
        """
        self.targets(horizon)
        stream = self.recorded[:horizon]
        return float(np.sum(np.mean(self.chart.distance(x, stream) ** 2, axis=-1)))

    def total_gradient(self, x: np.ndarray, horizon: int) -> np.ndarray:
        """Return the Riemannian gradient of sum_{t <= horizon} f_t at x.

        Args:
            x: point coordinates.
            horizon: last round included.

        Returns:
            -(2/n) sum_{t,i} Log_x(z_{i,t}).
        """
        self.targets(horizon)
        stream = self.recorded[:horizon].reshape(-1, self.chart.ambient_dim)
        return -2.0 / self.n_agents * np.sum(self.chart.logmap(x, stream), axis=0)


def frechet_loss_stream(
    chart: ManifoldChart,
    ball: GeodesicBall,
    base_spread: float,
    n_agents: int,
    rng: np.random.Generator,
) -> FrechetLossStream:
    """Create the squared-distance loss stream of the sphere experiment.

    Args:
        chart: manifold.
        ball: feasible ball.
        base_spread: radius of the per-round perturbation.
        n_agents: number of agents.
        rng: generator owned by the stream.

    Returns:
        the loss oracle.
    """
    return FrechetLossStream(chart, ball, base_spread, n_agents, rng)


def _descend_to_stationarity(
    chart: ManifoldChart,
    oracle: FrechetLossStream,
    ball: GeodesicBall,
    horizon: int,
    start: np.ndarray,
    max_iter: int,
) -> typing.Tuple[np.ndarray, float]:
    """Run projected Riemannian gradient descent on the mean loss from one start.

    The step is Exp_x(-(1/2T) grad), the unit fixed-point step of the weighted
    Frechet mean, followed by projection onto the ball.

    Args:
        chart: manifold.
        oracle: recorded loss stream.
        ball: feasible ball.
        horizon: number of rounds.
        start: starting point.
        max_iter: iteration budget.

    Returns:
        the last iterate and the distance covered by the last step.
    """
    x = start
    residual = float("inf")
    for _ in range(max_iter):
        step = -0.5 / horizon * oracle.total_gradient(x, horizon)
        moved = chart.project_ball_array(
            ball.center.coords, ball.radius, chart.expmap(x, step)[None, :]
        )[0]
        residual = float(chart.distance(x, moved))
        x = moved
        if residual < COMPARATOR_TOL:
            break
    return x, residual


def comparator(  # pylint: disable=too-many-arguments
    chart: ManifoldChart,
    oracle: FrechetLossStream,
    ball: GeodesicBall,
    horizon: int,
    rng: np.random.Generator,
    restarts: int,
    max_iter: int = COMPARATOR_MAX_ITER,
) -> Point:
    """Find the best fixed decision in hindsight, argmin_{x in ball} sum_t f_t(x).

    Args:
        chart: manifold.
        oracle: loss stream with every round up to the horizon recorded.
        ball: feasible ball.
        horizon: number of rounds.
        rng: generator for the restart points.
        restarts: number of starts: the ball center, then uniform samples.
        max_iter: iteration budget per start.

    Returns:
        the best converged point.

    Raises:
        NoConvergenceError: if no start reaches stationarity.
    """
    starts = [ball.center.coords]
    if restarts > 1:
        centers = np.tile(ball.center.coords, (restarts - 1, 1))
        starts.extend(chart.sample_ball(centers, ball.radius, rng))
    best: typing.Optional[np.ndarray] = None
    best_value = float("inf")
    worst_residual = 0.0
    for start in starts:
        x, residual = _descend_to_stationarity(chart, oracle, ball, horizon, start, max_iter)
        if residual >= COMPARATOR_TOL:
            worst_residual = max(worst_residual, residual)
            continue
        value = oracle.total_value(x, horizon)
        if value < best_value:
            best, best_value = x, value
    if best is None:
        raise NoConvergenceError(
            f"comparator residual {worst_residual:.3e} above {COMPARATOR_TOL:.1e}",
            residual=worst_residual,
        )
    logger.info("Comparator found with cumulative loss %.6g", best_value)
    return Point(best)


def derive_constants(cfg: ExperimentConfig, setup: ExperimentSetup) -> DerivedConstants:
    """Derive the constants reported with a run.

    Args:
        cfg: configuration.
        setup: the checked setup.

    Returns:
        the constants, with c9 at the smoothing radius in bandit runs.
    """
    radius = cfg.delta if cfg.algorithm == "bandit" else None
    return derive(setup.context, smoothing_radius=radius)


@dataclasses.dataclass(frozen=True, eq=False)
class RegretTrace:
    """Per-round regret and consensus diagnostics.

    Attrs:
        inst_regret: instantaneous regret per round.
        variance: consensus variance of the decisions per round.
        network_error: max_i d(x_{i,t}, mean) per round.
        metadata: comment lines written before the CSV header.
    """

    inst_regret: np.ndarray
    variance: np.ndarray
    network_error: np.ndarray
    metadata: typing.Tuple[str, ...] = ()

    @property
    def t(self) -> np.ndarray:
        """Return the rounds 1..T."""
        return np.arange(1, self.inst_regret.size + 1)

    @property
    def cum_regret(self) -> np.ndarray:
        """Return the cumulative regret, the prefix sum of the instantaneous regret."""
        return np.cumsum(self.inst_regret)

    def rows(self) -> typing.Iterator[typing.Tuple[int, float, float, float, float]]:
        """Iterate over the CSV rows.

        Yields:
            (t, inst_regret, cum_regret, variance, network_error).
        """
        for row in zip(
            self.t, self.inst_regret, self.cum_regret, self.variance, self.network_error
        ):
            yield int(row[0]), float(row[1]), float(row[2]), float(row[3]), float(row[4])

    def with_metadata(self, metadata: typing.Iterable[str]) -> "RegretTrace":
        """Return the trace with other metadata.

        Args:
            metadata: comment lines.

        Returns:
            the new trace.
        """
        return dataclasses.replace(self, metadata=tuple(metadata))

    @classmethod
    def average(cls, traces: typing.Sequence["RegretTrace"]) -> "RegretTrace":
        """Average traces of the same length pointwise.

        Args:
            traces: repetitions of a run.

        Returns:
            the averaged trace, keeping the first trace's metadata.
        """
        return cls(
            inst_regret=np.mean([trace.inst_regret for trace in traces], axis=0),
            variance=np.mean([trace.variance for trace in traces], axis=0),
            network_error=np.mean([trace.network_error for trace in traces], axis=0),
            metadata=traces[0].metadata,
        )


@dataclasses.dataclass(frozen=True, eq=False)
class RunRecord:
    """Everything one seeded run produced.

    Attrs:
        trace: regret trace.
        decisions: (T, n, ambient_dim) decisions x_{i,t}.
        queries: (T, n, 2, ambient_dim) bandit query points; empty for full runs.
        gradient_norms: (T, n) norms of the applied gradients or estimators.
        oracle: the recorded loss stream.
        comparator: best fixed decision in hindsight.
    """

    trace: RegretTrace
    decisions: np.ndarray
    queries: np.ndarray
    gradient_norms: np.ndarray
    oracle: FrechetLossStream
    comparator: Point


def _round_diagnostics(chart: ManifoldChart, decisions: np.ndarray) -> typing.Tuple[float, float]:
    """Return the consensus variance and the network error of one round.

    Args:
        chart: manifold.
        decisions: (n, ambient_dim) decisions.

    Returns:
        (1/n) sum_i d^2(x_i, mean) and max_i d(x_i, mean).
    """
    distances = chart.distance(decisions, frechet_mean_array(chart, decisions))
    return float(np.mean(distances**2)), float(np.max(distances))


def simulate(
    cfg: ExperimentConfig, setup: ExperimentSetup, seed: np.random.SeedSequence
) -> RunRecord:
    """Run one seeded repetition.

    Args:
        cfg: configuration.
        setup: the checked setup.
        seed: the repetition's seed sequence.

    Returns:
        the run record.

    Raises:
        ExperimentRuntimeError: if a round fails, with the round and agent attached.
    """
    chart, horizon, n = setup.chart, cfg.horizon, cfg.n_agents
    children = seed.spawn(FIRST_AGENT_CHILD + n)
    oracle = frechet_loss_stream(
        chart, setup.ball, cfg.base_spread, n, np.random.default_rng(children[LOSS_STREAM_CHILD])
    )
    agent_rngs = [np.random.default_rng(child) for child in children[FIRST_AGENT_CHILD:]]
    bandit = cfg.algorithm == "bandit"

    decisions = np.empty((horizon, n, chart.ambient_dim))
    queries = np.empty((horizon if bandit else 0, n, 2, chart.ambient_dim))
    norms = np.empty((horizon, n))
    state: NetworkState = initial_state(chart, setup.start, n)
    t = 0
    try:
        for t in range(1, horizon + 1):
            decisions[t - 1] = state.x
            if bandit:
                state, queries[t - 1] = bandit_round(
                    chart, state, oracle, setup.matrix, setup.ball, setup.schedule, t, agent_rngs
                )
            else:
                state = full_info_round(
                    chart, state, oracle, setup.matrix, setup.ball, setup.schedule, t
                )
            norms[t - 1] = chart.norm_array(decisions[t - 1], state.last_gradient)
    except AgentError as exc:
        raise ExperimentRuntimeError(exc.msg, round_index=t, agent_index=exc.agent_index) from exc
    except GeodesicGossipError as exc:
        raise ExperimentRuntimeError(exc.msg, round_index=t) from exc

    try:
        best = comparator(
            chart,
            oracle,
            setup.ball,
            horizon,
            np.random.default_rng(children[COMPARATOR_CHILD]),
            cfg.comparator_restarts,
        )
    except NoConvergenceError as exc:
        raise ExperimentRuntimeError(exc.msg, round_index=horizon) from exc

    inst = np.empty(horizon)
    variance = np.empty(horizon)
    network_error = np.empty(horizon)
    for t in range(1, horizon + 1):
        played = queries[t - 1] if bandit else decisions[t - 1]
        incurred = float(np.mean(oracle.global_value(played, t)))
        inst[t - 1] = incurred - float(oracle.global_value(best.coords, t))
        try:
            variance[t - 1], network_error[t - 1] = _round_diagnostics(chart, decisions[t - 1])
        except NoConvergenceError as exc:
            raise ExperimentRuntimeError(exc.msg, round_index=t) from exc
    trace = RegretTrace(inst_regret=inst, variance=variance, network_error=network_error)
    return RunRecord(
        trace=trace,
        decisions=decisions,
        queries=queries,
        gradient_norms=norms,
        oracle=oracle,
        comparator=best,
    )


def _format(value: float) -> str:
    """Format a real with the CSV precision.

    Args:
        value: the real.

    Returns:
        the decimal text.
    """
    return f"{value:.{CSV_SIGNIFICANT_DIGITS}g}"


def build_metadata(
    cfg: ExperimentConfig, setup: ExperimentSetup, constants: DerivedConstants, lipschitz: float
) -> typing.List[str]:
    """Describe a run for the CSV comment lines.

    Args:
        cfg: configuration.
        setup: the checked setup.
        constants: derived constants.
        lipschitz: Lipschitz constant of the losses.

    Returns:
        the lines, without the comment marker.
    """
    lines = [f"geodesic-gossip {VERSION}"]
    lines.extend(CONFIG_PREFIX + line for line in cfg.to_text().splitlines())
    lines.extend(f"constant {key} = {_format(value)}" for key, value in constants.dict().items())
    lines.append(f"sigma2 = {_format(network.sigma2(setup.matrix))}")
    lines.append(f"geometric_diameter = {_format(cfg.geometric_diameter)}")
    lines.append(f"constants_diameter = {_format(setup.context.diameter)}")
    lines.append(f"lipschitz = {_format(lipschitz)}")
    lines.append(f"seed = {cfg.seed}")
    lines.append(f"repetitions = {cfg.repetitions}")
    return lines


def run_experiment(cfg: ExperimentConfig) -> RegretTrace:
    """Run a configuration, averaging its repetitions pointwise.

    Args:
        cfg: configuration.

    Returns:
        the trace with its metadata.

    Raises:
        ConfigInvalidError: if the configuration fails an assumption.
        ExperimentRuntimeError: if a round fails.
    """
    setup = cfg.check_assumptions()
    constants = derive_constants(cfg, setup)
    logger.info(
        "Running %s on %s(%d): n=%d, T=%d, s=%g, %d repetition(s)",
        cfg.algorithm,
        cfg.manifold.value,
        cfg.dim,
        cfg.n_agents,
        cfg.horizon,
        cfg.consensus_step,
        cfg.repetitions,
    )
    records = []
    for index, seed in enumerate(np.random.SeedSequence(cfg.seed).spawn(cfg.repetitions)):
        logger.debug("Repetition %d", index)
        records.append(simulate(cfg, setup, seed))
    trace = RegretTrace.average([record.trace for record in records])
    logger.info("Finished with cumulative regret %.6g", trace.cum_regret[-1])
    return trace.with_metadata(build_metadata(cfg, setup, constants, records[0].oracle.lipschitz))


def emit_csv(trace: RegretTrace, path: typing.Union[str, pathlib.Path]) -> pathlib.Path:
    """Write a trace atomically.

    Args:
        trace: the trace.
        path: destination.

    Returns:
        the destination.

    Raises:
        OutputWriteError: if the file cannot be written.
    """
    path = pathlib.Path(path)
    columns = (trace.t, trace.inst_regret, trace.cum_regret, trace.variance, trace.network_error)
    frame = pd.DataFrame(dict(zip(CSV_HEADER, columns)))
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with tempfile.NamedTemporaryFile(
            "w", encoding="utf-8", dir=path.parent, delete=False, suffix=".tmp", newline="\n"
        ) as handle:
            handle.writelines(f"# {line}\n" for line in trace.metadata)
            frame.to_csv(
                handle,
                index=False,
                float_format=f"%.{CSV_SIGNIFICANT_DIGITS}g",
                lineterminator="\n",
            )
        os.replace(handle.name, path)
    except OSError as exc:
        raise OutputWriteError(str(exc), str(path)) from exc
    logger.info("Wrote %d rows to %s", trace.inst_regret.size, path)
    return path


def read_config_echo(path: typing.Union[str, pathlib.Path]) -> ExperimentConfig:
    """Parse the configuration echoed into a CSV.

    Args:
        path: CSV written by emit_csv.

    Returns:
        the echoed configuration.
    """
    lines = []
    for line in pathlib.Path(path).read_text("utf-8").splitlines():
        if line.startswith(f"# {CONFIG_PREFIX}"):
            lines.append(line[len(f"# {CONFIG_PREFIX}") :])
    return ExperimentConfig.from_mapping(parse_lines("\n".join(lines)))


def sweep(
    cfg: ExperimentConfig, key: str, values: typing.Sequence[str], stem: str = "sweep"
) -> typing.List[pathlib.Path]:
    """Run one configuration per value of a parameter, one CSV each.

    Args:
        cfg: base configuration.
        key: field to vary.
        values: raw values of the field.
        stem: file name stem used when the configuration sets no output.

    Returns:
        the written paths, in the order of the values.
    """
    base = cfg.output_path(f"{stem}.csv")
    paths = []
    for value in values:
        raw = cfg.dict(exclude_none=True)
        raw.pop("output", None)
        raw[key] = value
        point = ExperimentConfig.from_mapping(raw)
        logger.info("Sweep point %s = %s", key, value)
        target = base.with_name(f"{base.stem}_{key}={value}{base.suffix or '.csv'}")
        paths.append(emit_csv(run_experiment(point), target))
    return paths
