#!/usr/bin/env python3

# Copyright 2025 Canonical Ltd.
# See LICENSE file for licensing details.

"""Exceptions used by geodesic-gossip."""

import typing


class GeodesicGossipError(Exception):
    """Base exception for every error raised by this package.

    Attrs:
        msg (str): Explanation of the error.
    """

    def __init__(self, msg: str):
        """Initialize a new instance of the GeodesicGossipError exception.

        Args:
            msg (str): Explanation of the error.
        """
        super().__init__(msg)
        self.msg = msg


class ConfigInvalidError(GeodesicGossipError):
    """Exception raised when an experiment configuration is found to be invalid."""


class InvalidPointError(GeodesicGossipError):
    """Exception raised when coordinates do not lie on the manifold."""


class InvalidTangentError(GeodesicGossipError):
    """Exception raised when a vector is not tangent at its base point."""


class BeyondInjectivityError(GeodesicGossipError):
    """Exception raised when an operation leaves the injectivity radius."""


class BaseMismatchError(GeodesicGossipError):
    """Exception raised when tangent vectors anchored at different points are combined."""


class InvalidShrinkageError(GeodesicGossipError):
    """Exception raised when a shrink factor is outside [0, 1)."""


class DomainViolationError(GeodesicGossipError):
    """Exception raised when a curvature function is evaluated outside its domain."""


class InvalidTopologyError(GeodesicGossipError):
    """Exception raised when a communication matrix cannot be built or loaded."""


class NotValidatedError(GeodesicGossipError):
    """Exception raised when a spectral quantity is requested from an unvalidated matrix."""


class NoConvergenceError(GeodesicGossipError):
    """Exception raised when an iterative solver exhausts its iterations.

    Attrs:
        residual (float): Stationarity residual at the last iterate.
    """

    def __init__(self, msg: str, residual: float):
        """Initialize a new instance of the NoConvergenceError exception.

        Args:
            msg (str): Explanation of the error.
            residual (float): Stationarity residual at the last iterate.
        """
        super().__init__(msg)
        self.residual = residual


class DegenerateConfigurationError(GeodesicGossipError):
    """Exception raised when a ratio is requested for a zero-variance configuration."""


class InvalidStepSizeError(GeodesicGossipError):
    """Exception raised when a consensus step-size is outside [0, 1]."""


class InvalidScheduleError(GeodesicGossipError):
    """Exception raised when a step schedule violates its invariants."""


class AgentError(GeodesicGossipError):
    """Base exception for failures attributable to one agent.

    Attrs:
        agent_index (int): Agent whose update failed.
    """

    def __init__(self, msg: str, agent_index: int):
        """Initialize a new instance of the AgentError exception.

        Args:
            msg (str): Explanation of the error.
            agent_index (int): Agent whose update failed.
        """
        super().__init__(msg)
        self.agent_index = agent_index


class GradientBlowupError(AgentError):
    """Exception raised when a loss oracle returns a gradient far above its Lipschitz bound."""


class InfeasibleQueryError(AgentError):
    """Exception raised when a bandit query point leaves the feasible ball."""


class InfeasibleIterateError(AgentError):
    """Exception raised when an agent decision leaves the feasible ball."""


class ExperimentRuntimeError(GeodesicGossipError):
    """Exception raised when a round of an experiment fails.

    Attrs:
        round_index (int): Round during which the failure happened.
        agent_index (int | None): Agent involved, when known.
    """

    def __init__(self, msg: str, round_index: int, agent_index: typing.Optional[int] = None):
        """Initialize a new instance of the ExperimentRuntimeError exception.

        Args:
            msg (str): Explanation of the error.
            round_index (int): Round during which the failure happened.
            agent_index (int | None): Agent involved, when known.
        """
        where = f"round {round_index}" + ("" if agent_index is None else f", agent {agent_index}")
        super().__init__(f"{where}: {msg}")
        self.round_index = round_index
        self.agent_index = agent_index


class OutputWriteError(GeodesicGossipError):
    """Exception raised when a result file cannot be written.

    Attrs:
        path (str): Destination that failed.
    """

    def __init__(self, msg: str, path: str):
        """Initialize a new instance of the OutputWriteError exception.

        Args:
            msg (str): Explanation of the error.
            path (str): Destination that failed.
        """
        super().__init__(f"{path}: {msg}")
        self.path = path
