# Copyright 2025 Canonical Ltd.
# See LICENSE file for licensing details.

"""Communication matrices of the agent network."""

import dataclasses
import logging
import pathlib
import typing

import networkx as nx
import numpy as np
import scipy.linalg

from exceptions import InvalidTopologyError, NotValidatedError

logger = logging.getLogger(__name__)

MATRIX_TOL = 1e-12


@dataclasses.dataclass(frozen=True)
class ValidationReport:
    """Outcome of the checks on a communication matrix.

    Attrs:
        symmetric: W equals its transpose.
        doubly_stochastic: rows and columns sum to one.
        nonnegative: no negative entries.
        connected: the second largest singular value is below one.
        sigma2: second largest singular value.
    """

    symmetric: bool
    doubly_stochastic: bool
    nonnegative: bool
    connected: bool
    sigma2: float

    @property
    def passed(self) -> bool:
        """Return whether every check passed."""
        return self.symmetric and self.doubly_stochastic and self.nonnegative and self.connected

    def failures(self) -> typing.List[str]:
        """List the names of the failed checks.

        Returns:
            the failed check names, in declaration order.
        """
        checks = ("symmetric", "doubly_stochastic", "nonnegative", "connected")
        return [name for name in checks if not getattr(self, name)]


class WeightMatrix:
    """Symmetric doubly stochastic communication matrix.

    The matrix is read-only. Its validation report, and with it sigma2, is
    computed once by `validate`.

    Attrs:
        n: number of agents.
        w: the n x n weights.
        neighbors: per agent, the indices of nonzero off-diagonal entries.
        report: validation report, None until validated.
    """

    def __init__(self, w: typing.Any) -> None:
        """Construct.

        Args:
            w: square array of weights.

        Raises:
            InvalidTopologyError: if the array is not square.
        """
        weights = np.array(w, dtype=float)
        if weights.ndim != 2 or weights.shape[0] != weights.shape[1] or weights.shape[0] == 0:
            raise InvalidTopologyError(f"weight matrix must be square, got shape {weights.shape}")
        weights.setflags(write=False)
        self._w = weights
        self._report: typing.Optional[ValidationReport] = None

    @property
    def n(self) -> int:
        """Return the number of agents."""
        return self._w.shape[0]

    @property
    def w(self) -> np.ndarray:
        """Return the weights."""
        return self._w

    @property
    def neighbors(self) -> typing.List[np.ndarray]:
        """Return the neighbor indices of each agent."""
        off_diagonal = self._w.copy()
        np.fill_diagonal(off_diagonal, 0.0)
        return [np.flatnonzero(row) for row in off_diagonal]

    @property
    def report(self) -> typing.Optional[ValidationReport]:
        """Return the validation report, if any."""
        return self._report

    @property
    def sigma2(self) -> float:
        """Return the cached second largest singular value."""
        return sigma2(self)


def sigma2_svd(w: np.ndarray) -> float:
    """Return the second largest singular value from a full decomposition.

    Args:
        w: square matrix.

    Returns:
        the second largest singular value; 0 for a 1 x 1 matrix.
    """
    values = scipy.linalg.svdvals(w)
    return float(values[1]) if values.size > 1 else 0.0


def sigma2_centered(w: np.ndarray) -> float:
    """Return the largest singular value of W - (1/n) 11^T.

    Args:
        w: symmetric matrix with the all-ones vector as a fixed point.

    Returns:
        the spectral norm of the centered matrix.
    """
    n = w.shape[0]
    centered = w - np.full((n, n), 1.0 / n)
    return float(np.max(np.abs(scipy.linalg.eigvalsh((centered + centered.T) / 2))))


def validate(matrix: WeightMatrix) -> ValidationReport:
    """Check symmetry, double stochasticity, nonnegativity and connectivity.

    Args:
        matrix: the communication matrix.

    Returns:
        the report, also cached on the matrix.
    """
    if matrix.report is not None:
        return matrix.report
    w = matrix.w
    ones = np.ones(matrix.n)
    symmetric = bool(np.max(np.abs(w - w.T)) < MATRIX_TOL)
    rows = np.max(np.abs(w @ ones - ones))
    columns = np.max(np.abs(w.T @ ones - ones))
    doubly_stochastic = bool(rows < MATRIX_TOL and columns < MATRIX_TOL)
    value = sigma2_svd(w)
    report = ValidationReport(
        symmetric=symmetric,
        doubly_stochastic=doubly_stochastic,
        nonnegative=bool(np.all(w >= 0)),
        connected=value < 1 - MATRIX_TOL,
        sigma2=value,
    )
    if not report.passed:
        logger.warning("Weight matrix fails: %s", ", ".join(report.failures()))
    matrix._report = report  # pylint: disable=protected-access
    return report


def sigma2(matrix: WeightMatrix) -> float:
    """Return the second largest singular value of a validated matrix.

    Args:
        matrix: the communication matrix.

    Returns:
        sigma2 in [0, 1].

    Raises:
        NotValidatedError: if the matrix has not been validated.
    """
    if matrix.report is None:
        raise NotValidatedError("validate the weight matrix before reading sigma2")
    return matrix.report.sigma2


def _metropolis(adjacency: np.ndarray) -> np.ndarray:
    """Return Metropolis-Hastings weights for an undirected graph.

    Args:
        adjacency: symmetric 0/1 adjacency without self loops.

    Returns:
        the weights.
    """
    degrees = adjacency.sum(axis=1)
    weights = adjacency / (1.0 + np.maximum(degrees[:, None], degrees[None, :]))
    np.fill_diagonal(weights, 1.0 - weights.sum(axis=1))
    return weights


def build_ring(n: int, k: int, metropolis: bool = False) -> WeightMatrix:
    """Build a ring where every agent talks to k/2 neighbors on each side.

    Args:
        n: number of agents, at least 3.
        k: even number of neighbors, below n.
        metropolis: use Metropolis-Hastings weights instead of uniform weights
            1/(k+1) over the closed neighborhood.

    Returns:
        the validated matrix.

    Raises:
        InvalidTopologyError: if the parameters do not describe a ring.
    """
    if n < 3 or k < 2 or k % 2 or k >= n:
        raise InvalidTopologyError(
            f"ring needs n >= 3 and an even degree 2 <= k < n, got {n}, {k}"
        )
    graph = nx.circulant_graph(n, range(1, k // 2 + 1))
    adjacency = nx.to_numpy_array(graph, nodelist=range(n))
    if metropolis:
        weights = _metropolis(adjacency)
    else:
        weights = (adjacency + np.eye(n)) / (k + 1)
    matrix = WeightMatrix(weights)
    validate(matrix)
    return matrix


def build_complete(n: int) -> WeightMatrix:
    """Build the uniform complete-graph matrix.

    Args:
        n: number of agents, positive; a single agent talks only to itself.

    Returns:
        the validated matrix with all entries 1/n.

    Raises:
        InvalidTopologyError: if n < 1.
    """
    if n < 1:
        raise InvalidTopologyError(f"complete graph needs n >= 1, got {n}")
    matrix = WeightMatrix(np.full((n, n), 1.0 / n))
    validate(matrix)
    return matrix


def load(path: typing.Union[str, pathlib.Path]) -> WeightMatrix:
    """Load a matrix from a text table: n on the first line, then n rows of n reals.

    Args:
        path: file to read.

    Returns:
        the validated matrix.

    Raises:
        InvalidTopologyError: if the file cannot be read or has the wrong shape.
    """
    try:
        lines = [
            line
            for line in pathlib.Path(path).read_text("utf-8").splitlines()
            if line.strip() and not line.lstrip().startswith("#")
        ]
        n = int(lines[0])
        rows = np.array([[float(value) for value in line.split()] for line in lines[1:]])
    except (OSError, ValueError, IndexError) as exc:
        raise InvalidTopologyError(f"cannot read weight matrix {path}: {exc}") from exc
    if rows.shape != (n, n):
        raise InvalidTopologyError(f"{path}: expected {n}x{n} weights, got shape {rows.shape}")
    matrix = WeightMatrix(rows)
    validate(matrix)
    logger.info("Loaded %dx%d weight matrix from %s", n, n, path)
    return matrix
