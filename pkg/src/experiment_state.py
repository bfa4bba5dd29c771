#!/usr/bin/env python3

# Copyright 2025 Canonical Ltd.
# See LICENSE file for licensing details.

"""State of an experiment."""
import dataclasses
import itertools
import logging
import math
import os
import pathlib
import re
import typing

# pydantic is causing this no-name-in-module problem
from pydantic import (  # pylint: disable=no-name-in-module,import-error
    BaseModel,
    Extra,
    Field,
    ValidationError,
    validator,
)

import network
from constants import OUTPUT_DIR_ENV
from curvature import CurvatureContext, coupled_tau, theta
from exceptions import (
    ConfigInvalidError,
    DomainViolationError,
    GeodesicGossipError,
    InvalidTopologyError,
)
from manifold import GeodesicBall, ManifoldChart, ManifoldKind, Point, chart_for
from online import StepSchedule

logger = logging.getLogger(__name__)

REAL_FIELDS = (
    "ball_radius",
    "eta_scale",
    "consensus_step",
    "delta",
    "tau",
    "base_spread",
    "c3",
    "c4",
    "c8",
    "constants_diameter",
)

_PI_FORM = re.compile(
    r"^(?:(?P<factor>[0-9.eE+-]+)\s*\*\s*)?pi(?:\s*/\s*(?P<divisor>[0-9.eE+-]+))?$"
)


def parse_real(text: typing.Any) -> typing.Any:
    """Parse a decimal literal or one of the forms `pi`, `pi/N`, `M*pi/N`.

    Args:
        text: the raw value; non-strings are returned unchanged.

    Returns:
        the float, or the input when it is not a pi form.

    Raises:
        ValueError: if a pi form has a malformed factor or divisor.
    """
    if not isinstance(text, str):
        return text
    match = _PI_FORM.match(text.strip())
    if match is None:
        return text
    factor = float(match["factor"]) if match["factor"] else 1.0
    divisor = float(match["divisor"]) if match["divisor"] else 1.0
    return factor * math.pi / divisor


def parse_lines(text: str) -> typing.Dict[str, str]:
    """Parse flat `key = value` text; `#` starts a comment line.

    Args:
        text: file contents.

    Returns:
        the raw values by key.

    Raises:
        ConfigInvalidError: if a line is not an assignment or a key repeats.
    """
    raw: typing.Dict[str, str] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, separator, value = stripped.partition("=")
        key = key.strip()
        if not separator or not key:
            raise ConfigInvalidError(f"line {number}: expected `key = value`, got {stripped!r}")
        if key in raw:
            raise ConfigInvalidError(f"line {number}: duplicate key {key}")
        raw[key] = value.strip()
    return raw


class ExperimentConfig(BaseModel):  # pylint: disable=too-few-public-methods
    """Represent an experiment configuration.

    Attrs:
        manifold: manifold kind.
        dim: intrinsic dimension.
        ball_radius: radius of the feasible ball.
        ball_center: ambient coordinates of the ball center; the chart origin when unset.
        n_agents: number of agents.
        topology: `ring` or `complete`.
        ring_degree: neighbors per agent on the ring.
        weights: `uniform` or `metropolis` ring weights.
        weight_matrix: path of a custom weight matrix, replacing the topology.
        horizon: number of rounds T.
        algorithm: `full` or `bandit`.
        eta_rule: `constant` (c/sqrt(T)) or `adaptive` (c/sqrt(t)).
        eta_scale: the constant c.
        consensus_step: consensus step-size s.
        delta: smoothing radius of the bandit estimator.
        tau: shrinkage, read according to shrink_mode.
        shrink_mode: `fraction`, `absolute` or `coupled`.
        base_spread: radius of the per-round perturbation of the loss targets.
        seed: master seed.
        repetitions: number of seeded repetitions averaged.
        output: output CSV path.
        c3: lower logarithm distortion constant, heuristic when unset.
        c4: upper logarithm distortion constant, heuristic when unset.
        c8: transport comparison constant, heuristic when unset.
        constants_diameter: diameter used by the derived constants.
        comparator_restarts: random restarts of the comparator solver.
    """

    manifold: ManifoldKind = ManifoldKind.SPHERE
    dim: int = Field(15, ge=1)
    ball_radius: float = Field(math.pi / 4, gt=0)
    ball_center: typing.Optional[typing.List[float]] = None
    n_agents: int = Field(50, ge=1)
    topology: typing.Literal["ring", "complete"] = "ring"
    ring_degree: int = Field(10, ge=2)
    weights: typing.Literal["uniform", "metropolis"] = "uniform"
    weight_matrix: typing.Optional[str] = None
    horizon: int = Field(2000, ge=1)
    algorithm: typing.Literal["full", "bandit"] = "full"
    eta_rule: typing.Literal["constant", "adaptive"] = "adaptive"
    eta_scale: float = Field(1.0, ge=0)
    consensus_step: float = Field(1.0, ge=0, le=1)
    delta: float = Field(0.0, ge=0)
    tau: float = Field(0.0, ge=0)
    shrink_mode: typing.Literal["fraction", "absolute", "coupled"] = "fraction"
    base_spread: float = Field(math.pi / 16, ge=0)
    seed: int = Field(0, ge=0)
    repetitions: int = Field(1, ge=1)
    output: typing.Optional[str] = None
    c3: typing.Optional[float] = Field(None, ge=0)
    c4: typing.Optional[float] = Field(None, ge=0)
    c8: typing.Optional[float] = Field(None, ge=0)
    constants_diameter: typing.Optional[float] = Field(None, gt=0)
    comparator_restarts: int = Field(10, ge=1)

    class Config:  # pylint: disable=too-few-public-methods
        """Config class.

        Attrs:
            extra: extra configuration.
            allow_mutation: whether fields may be reassigned.
        """

        extra = Extra.forbid
        allow_mutation = False

    @validator(*REAL_FIELDS, pre=True)
    @classmethod
    def _parse_pi(cls, value: typing.Any) -> typing.Any:
        """Accept the pi forms for real fields.

        Args:
            value: raw value.

        Returns:
            the parsed value.
        """
        return parse_real(value)

    @validator("ball_center", pre=True)
    @classmethod
    def _parse_center(cls, value: typing.Any) -> typing.Any:
        """Split comma separated coordinates.

        Args:
            value: raw value.

        Returns:
            the coordinate list.
        """
        if isinstance(value, str):
            return [parse_real(part) for part in value.split(",") if part.strip()]
        return value

    @classmethod
    def from_mapping(cls, raw: typing.Mapping[str, typing.Any]) -> "ExperimentConfig":
        """Validate raw values.

        Args:
            raw: values by field name.

        Returns:
            the configuration.

        Raises:
            ConfigInvalidError: if a value is invalid or a key is unknown.
        """
        try:
            return cls(**raw)
        except ValidationError as exc:
            error_fields = set(
                itertools.chain.from_iterable(error["loc"] for error in exc.errors())
            )
            error_field_str = " ".join(f"{f}" for f in sorted(map(str, error_fields)))
            raise ConfigInvalidError(f"invalid configuration: {error_field_str}") from exc

    @classmethod
    def from_file(
        cls,
        path: typing.Union[str, pathlib.Path],
        overrides: typing.Optional[typing.Mapping[str, typing.Any]] = None,
    ) -> "ExperimentConfig":
        """Load a configuration file and apply overrides on top.

        Args:
            path: file to read.
            overrides: values replacing those of the file.

        Returns:
            the configuration.

        Raises:
            ConfigInvalidError: if the file cannot be read or is invalid.
        """
        try:
            text = pathlib.Path(path).read_text("utf-8")
        except OSError as exc:
            raise ConfigInvalidError(f"cannot read configuration {path}: {exc}") from exc
        raw: typing.Dict[str, typing.Any] = dict(parse_lines(text))
        raw.update(overrides or {})
        return cls.from_mapping(raw)

    def to_text(self) -> str:
        """Echo the configuration in the file format; unset fields are omitted.

        Returns:
            `key = value` lines that parse back to an equal configuration.
        """
        lines = []
        for key, value in self.dict().items():
            if value is None:
                continue
            if isinstance(value, ManifoldKind):
                value = value.value
            elif isinstance(value, list):
                value = ",".join(repr(float(part)) for part in value)
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"

    def output_path(self, fallback: str) -> pathlib.Path:
        """Resolve the output path, honoring the output directory override.

        Args:
            fallback: file name used when no output is configured.

        Returns:
            the path.
        """
        path = pathlib.Path(self.output or fallback)
        directory = os.environ.get(OUTPUT_DIR_ENV)
        if directory:
            return pathlib.Path(directory) / path.name
        return path

    @property
    def geometric_diameter(self) -> float:
        """Return the diameter 2r of the feasible ball."""
        return 2 * self.ball_radius

    def resolved_constants_diameter(self, chart: ManifoldChart) -> float:
        """Return the diameter fed to the derived constants.

        Args:
            chart: the manifold.

        Returns:
            the configured value; otherwise 2r when it stays strictly below
            pi/(2 sqrt(k_max)) and r when it does not.
        """
        if self.constants_diameter is not None:
            return self.constants_diameter
        if chart.k_max <= 0 or self.geometric_diameter < math.pi / (2 * math.sqrt(chart.k_max)):
            return self.geometric_diameter
        logger.warning(
            "Ball diameter %.6g reaches pi/(2 sqrt(k_max)); derived constants use the radius",
            self.geometric_diameter,
        )
        return self.ball_radius

    def tau_fraction(self, chart: ManifoldChart) -> float:
        """Return the shrink fraction of the feasible ball.

        Args:
            chart: the manifold.

        Returns:
            0 for full-information runs, else tau read according to shrink_mode.
        """
        if self.algorithm == "full":
            return 0.0
        if self.shrink_mode == "absolute":
            return self.tau / self.ball_radius
        if self.shrink_mode == "coupled":
            ratio = theta(chart.k_min, chart.k_max, self.ball_radius, self.ball_radius)
            return coupled_tau(self.delta, self.ball_radius, ratio)
        return self.tau

    def check_assumptions(self) -> "ExperimentSetup":
        """Check the configuration and build the objects of a run.

        Returns:
            the setup.

        Raises:
            ConfigInvalidError: naming the first failing assumption among
                domain, network, loss and schedule.
        """
        chart, ball = self._check_domain()
        matrix = self._check_network()
        try:
            context = CurvatureContext.build(
                k_min=chart.k_min,
                k_max=chart.k_max,
                diameter=self.resolved_constants_diameter(chart),
                n_agents=self.n_agents,
                sigma2=network.sigma2(matrix),
                c3=self.c3,
                c4=self.c4,
                c8=self.c8,
            )
        except DomainViolationError as exc:
            raise ConfigInvalidError(f"domain assumption violated: {exc.msg}") from exc
        if self.base_spread >= chart.injectivity_radius - self.ball_radius:
            raise ConfigInvalidError(
                "loss assumption violated: target spread reaches the injectivity radius"
            )
        schedule, feasible = self._check_schedule(chart, ball)
        return ExperimentSetup(
            chart=chart,
            ball=ball,
            feasible=feasible,
            matrix=matrix,
            schedule=schedule,
            context=context,
        )

    def _check_domain(self) -> typing.Tuple[ManifoldChart, GeodesicBall]:
        """Check the manifold and the feasible ball.

        Returns:
            the chart and the ball.

        Raises:
            ConfigInvalidError: if the domain assumption fails.
        """
        try:
            chart = chart_for(self.manifold, self.dim)
            center = chart.origin() if self.ball_center is None else self.ball_center
            ball = GeodesicBall(center=chart.point(center), radius=self.ball_radius)
            chart.check_ball(ball)
        except GeodesicGossipError as exc:
            raise ConfigInvalidError(f"domain assumption violated: {exc.msg}") from exc
        return chart, ball

    def _check_network(self) -> network.WeightMatrix:
        """Build and check the communication matrix.

        Returns:
            the validated matrix.

        Raises:
            ConfigInvalidError: if the network assumption fails.
        """
        try:
            if self.weight_matrix is not None:
                matrix = network.load(self.weight_matrix)
            elif self.topology == "complete" or self.n_agents < 3:
                matrix = network.build_complete(self.n_agents)
            else:
                matrix = network.build_ring(
                    self.n_agents, self.ring_degree, metropolis=self.weights == "metropolis"
                )
        except InvalidTopologyError as exc:
            raise ConfigInvalidError(f"network assumption violated: {exc.msg}") from exc
        report = network.validate(matrix)
        if matrix.n != self.n_agents:
            raise ConfigInvalidError(
                f"network assumption violated: {matrix.n} weights for {self.n_agents} agents"
            )
        if not report.passed:
            raise ConfigInvalidError(
                f"network assumption violated: {', '.join(report.failures())}"
            )
        return matrix

    def _check_schedule(
        self, chart: ManifoldChart, ball: GeodesicBall
    ) -> typing.Tuple[StepSchedule, GeodesicBall]:
        """Check step sizes and bandit feasibility.

        Args:
            chart: the manifold.
            ball: the feasible ball.

        Returns:
            the schedule and the (possibly shrunken) feasible ball.

        Raises:
            ConfigInvalidError: if the schedule assumption fails.
        """
        tau = self.tau_fraction(chart)
        try:
            schedule = StepSchedule(
                eta_rule=self.eta_rule,
                eta_scale=self.eta_scale,
                horizon=self.horizon,
                consensus_step=self.consensus_step,
                delta=self.delta,
                tau=tau,
            )
            if self.algorithm == "bandit":
                ratio = theta(chart.k_min, chart.k_max, self.ball_radius, self.ball_radius)
                schedule.check_bandit_feasibility(ball, ratio)
            feasible = ball.shrink(tau)
        except GeodesicGossipError as exc:
            raise ConfigInvalidError(f"schedule assumption violated: {exc.msg}") from exc
        return schedule, feasible


@dataclasses.dataclass(frozen=True)
class ExperimentSetup:
    """Objects a run is built from.

    Attrs:
        chart: manifold.
        ball: feasible ball.
        feasible: ball the iterates are projected onto; shrunken in bandit runs.
        matrix: validated communication matrix.
        schedule: step sizes.
        context: inputs of the derived constants.
    """

    chart: ManifoldChart
    ball: GeodesicBall
    feasible: GeodesicBall
    matrix: network.WeightMatrix
    schedule: StepSchedule
    context: CurvatureContext

    @property
    def start(self) -> Point:
        """Return the common initial point, the ball center."""
        return self.ball.center
