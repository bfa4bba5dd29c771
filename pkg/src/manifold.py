# Copyright 2025 Canonical Ltd.
# See LICENSE file for licensing details.

"""Geometry kernel for the constant-curvature manifolds.

Three charts share one interface: the unit sphere, the hyperboloid model of
hyperbolic space and Euclidean space. Points and tangent vectors are stored in
ambient coordinates. Each chart offers two layers:

* array kernels (`expmap`, `logmap`, `distance`, `inner_product`, `transp`,
  `projx`, `proju`, ...) that broadcast over leading axes and trust their inputs;
  the algorithms run on these.
* typed operations (`exp`, `log`, `dist`, `inner`, `parallel_transport`,
  `project_ball`, ...) on Point / TangentVector / GeodesicBall that validate their
  inputs and raise the package exceptions.

All maps are closed form. Results of `expmap` and `transp` are projected back
onto the manifold and the tangent space to keep round-off from accumulating.
"""

import abc
import dataclasses
import enum
import logging
import math
import typing

import numpy as np
import scipy.linalg

from constants import BALL_TOL, POINT_TOL, SMALL_NORM
from exceptions import (
    BaseMismatchError,
    BeyondInjectivityError,
    DomainViolationError,
    InvalidPointError,
    InvalidShrinkageError,
    InvalidTangentError,
)

logger = logging.getLogger(__name__)


class ManifoldKind(str, enum.Enum):
    """Supported manifolds."""

    SPHERE = "sphere"
    HYPERBOLOID = "hyperboloid"
    EUCLIDEAN = "euclidean"


def _frozen(coords: typing.Any) -> np.ndarray:
    """Return a read-only float copy of the coordinates.

    Args:
        coords: array-like coordinates.

    Returns:
        the read-only array.
    """
    array = np.array(coords, dtype=float)
    array.setflags(write=False)
    return array


@dataclasses.dataclass(frozen=True, eq=False)
class Point:
    """Point of a manifold in ambient coordinates.

    Attrs:
        coords: ambient coordinates.
    """

    coords: np.ndarray

    def __post_init__(self) -> None:
        """Freeze the coordinates."""
        object.__setattr__(self, "coords", _frozen(self.coords))


@dataclasses.dataclass(frozen=True, eq=False)
class TangentVector:
    """Tangent vector anchored at a base point.

    Attrs:
        base: anchor point.
        coords: ambient coordinates of the vector.
    """

    base: Point
    coords: np.ndarray

    def __post_init__(self) -> None:
        """Freeze the coordinates."""
        object.__setattr__(self, "coords", _frozen(self.coords))


@dataclasses.dataclass(frozen=True, eq=False)
class GeodesicBall:
    """Closed geodesic ball.

    Attrs:
        center: center point.
        radius: geodesic radius, positive.
    """

    center: Point
    radius: float

    def __post_init__(self) -> None:
        """Check the radius.

        Raises:
            DomainViolationError: if the radius is not positive.
        """
        if not self.radius > 0:
            raise DomainViolationError(f"ball radius must be positive, got {self.radius}")

    def shrink(self, tau: float) -> "GeodesicBall":
        """Contract the ball toward its center.

        Args:
            tau: shrink factor in [0, 1).

        Returns:
            The concentric ball of radius (1 - tau) r.

        Raises:
            InvalidShrinkageError: if tau is outside [0, 1).
        """
        if not 0 <= tau < 1:
            raise InvalidShrinkageError(f"shrink factor must lie in [0, 1), got {tau}")
        if tau == 0:
            return self
        return GeodesicBall(center=self.center, radius=(1 - tau) * self.radius)


def _unit_norm(v: np.ndarray) -> np.ndarray:
    """Return the Euclidean norm over the last axis, keeping it.

    Args:
        v: array of vectors.

    Returns:
        the norms with a trailing singleton axis.
    """
    return np.linalg.norm(v, axis=-1, keepdims=True)


class ManifoldChart(abc.ABC):
    """Manifold of constant curvature behind a single interface.

    Attrs:
        kind: which manifold this is.
        dim: intrinsic dimension d.
        ambient_dim: length of coordinate vectors.
        k_min: lower sectional curvature bound.
        k_max: upper sectional curvature bound.
        injectivity_radius: radius within which the exponential map is invertible.
    """

    kind: ManifoldKind
    curvature: float
    injectivity_radius: float = math.inf

    def __init__(self, dim: int) -> None:
        """Construct.

        Args:
            dim: intrinsic dimension, positive.

        Raises:
            DomainViolationError: if the dimension is not positive.
        """
        if dim < 1:
            raise DomainViolationError(f"intrinsic dimension must be positive, got {dim}")
        self.dim = dim

    def __repr__(self) -> str:
        """Return the chart description."""
        return f"{type(self).__name__}(dim={self.dim})"

    @property
    def ambient_dim(self) -> int:
        """Return the ambient dimension."""
        return self.dim + 1

    @property
    def k_min(self) -> float:
        """Return the lower curvature bound."""
        return self.curvature

    @property
    def k_max(self) -> float:
        """Return the upper curvature bound."""
        return self.curvature

    # array kernels

    @abc.abstractmethod
    def origin(self) -> np.ndarray:
        """Return the reference point of the chart."""

    @abc.abstractmethod
    def inner_product(self, x: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Return the metric inner product of tangent vectors at x."""

    @abc.abstractmethod
    def projx(self, x: np.ndarray) -> np.ndarray:
        """Project ambient coordinates onto the manifold."""

    @abc.abstractmethod
    def proju(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Project an ambient vector onto the tangent space at x."""

    @abc.abstractmethod
    def expmap(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Follow the geodesic from x with initial velocity v for unit time."""

    @abc.abstractmethod
    def logmap(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Return the initial velocity of the minimizing geodesic from x to y."""

    @abc.abstractmethod
    def distance(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Return the geodesic distance."""

    @abc.abstractmethod
    def transp(self, x: np.ndarray, v: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Parallel transport v from x to y along the minimizing geodesic."""

    @abc.abstractmethod
    def sn(self, t: np.ndarray) -> np.ndarray:
        """Return the generalized sine of the chart curvature."""

    def tangent_basis(self, x: np.ndarray) -> np.ndarray:
        """Return an orthonormal basis of the tangent space at x, one vector per row.

        Args:
            x: a point.

        Returns:
            a (dim, ambient_dim) array.
        """
        return scipy.linalg.null_space(np.asarray(x, dtype=float)[None, :]).T

    def norm_array(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Return the metric norm of tangent vectors.

        Args:
            x: base points.
            v: tangent vectors.

        Returns:
            the norms.
        """
        return np.sqrt(np.maximum(self.inner_product(x, v, v), 0.0))

    def sample_unit_tangents(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Sample one uniform unit tangent vector per point.

        Args:
            x: base points, shape (..., ambient_dim).
            rng: random generator.

        Returns:
            unit tangent vectors with the shape of x.
        """
        x = np.asarray(x, dtype=float)
        v = self.proju(x, rng.standard_normal(x.shape))
        return v / self.norm_array(x, v)[..., None]

    def sample_radii(self, radius: float, count: int, rng: np.random.Generator) -> np.ndarray:
        """Sample geodesic radii with density proportional to sn(t)^(d-1) on [0, radius].

        Candidates uniform on [0, radius] are accepted with probability
        (sn(t)/sn(radius))^(d-1); sn is increasing on the admissible radii.

        Args:
            radius: ball radius.
            count: number of radii.
            rng: random generator.

        Returns:
            the radii.
        """
        if self.dim == 1:
            return rng.uniform(0.0, radius, size=count)
        envelope = self.sn(np.array(radius))
        accepted: typing.List[np.ndarray] = []
        missing = count
        while missing > 0:
            candidates = rng.uniform(0.0, radius, size=max(4 * missing * self.dim, 16))
            ratio = (self.sn(candidates) / envelope) ** (self.dim - 1)
            kept = candidates[rng.uniform(size=candidates.size) < ratio][:missing]
            accepted.append(kept)
            missing -= kept.size
        return np.concatenate(accepted)

    def sample_ball(
        self, centers: np.ndarray, radius: float, rng: np.random.Generator
    ) -> np.ndarray:
        """Sample points from the Riemannian volume of balls around each center.

        Args:
            centers: ball centers, shape (m, ambient_dim) or (ambient_dim,).
            radius: common ball radius.
            rng: random generator.

        Returns:
            one sample per center, shape of centers.
        """
        centers = np.asarray(centers, dtype=float)
        batch = np.atleast_2d(centers)
        directions = self.sample_unit_tangents(batch, rng)
        radii = self.sample_radii(radius, batch.shape[0], rng)
        samples = self.expmap(batch, radii[:, None] * directions)
        return samples.reshape(centers.shape)

    def project_ball_array(
        self, center: np.ndarray, radius: float, xs: np.ndarray
    ) -> np.ndarray:
        """Retract points outside a ball radially onto its boundary.

        Args:
            center: ball center.
            radius: ball radius.
            xs: points, shape (m, ambient_dim).

        Returns:
            the projected points; points already inside are returned unchanged.
        """
        xs = np.array(xs, dtype=float)
        outside = self.distance(center, xs) > radius + BALL_TOL
        if np.any(outside):
            v = self.logmap(center, xs[outside])
            norms = self.norm_array(center, v)
            xs[outside] = self.expmap(center, v * (radius / norms)[..., None])
        return xs

    # typed operations

    def check_point(self, x: Point) -> None:
        """Check that a point lies on the manifold.

        Args:
            x: the point.

        Raises:
            InvalidPointError: if the coordinates are off the manifold.
        """
        if x.coords.shape != (self.ambient_dim,) or not np.all(np.isfinite(x.coords)):
            raise InvalidPointError(
                f"expected {self.ambient_dim} finite coordinates, got shape {x.coords.shape}"
            )
        defect = self._point_defect(x.coords)
        if defect > POINT_TOL:
            raise InvalidPointError(f"point is off the {self.kind.value} by {defect:.3e}")

    def check_tangent(self, v: TangentVector) -> None:
        """Check that a vector is tangent at its base point.

        Args:
            v: the tangent vector.

        Raises:
            InvalidTangentError: if the vector is not tangent.
        """
        try:
            self.check_point(v.base)
        except InvalidPointError as exc:
            raise InvalidTangentError(f"invalid anchor: {exc.msg}") from exc
        if v.coords.shape != (self.ambient_dim,):
            raise InvalidTangentError(f"expected {self.ambient_dim} coordinates")
        defect = abs(float(self._tangent_defect(v.base.coords, v.coords)))
        if defect > POINT_TOL * max(1.0, float(np.linalg.norm(v.coords))):
            raise InvalidTangentError(f"vector leaves the tangent space by {defect:.3e}")

    def check_ball(self, ball: GeodesicBall) -> None:
        """Check that a ball is admissible for this chart.

        Args:
            ball: the ball.

        Raises:
            DomainViolationError: if the ball is too large to be uniquely convex.
        """
        self.check_point(ball.center)
        if self.kind is ManifoldKind.SPHERE and ball.radius >= math.pi / 2:
            raise DomainViolationError(f"sphere balls need radius < pi/2, got {ball.radius}")

    def point(self, coords: typing.Any) -> Point:
        """Build a validated point.

        Args:
            coords: ambient coordinates.

        Returns:
            the point.
        """
        x = Point(coords)
        self.check_point(x)
        return x

    def tangent(self, base: Point, coords: typing.Any) -> TangentVector:
        """Build a validated tangent vector.

        Args:
            base: anchor point.
            coords: ambient coordinates.

        Returns:
            the tangent vector.
        """
        v = TangentVector(base, coords)
        self.check_tangent(v)
        return v

    def exp(self, v: TangentVector) -> Point:
        """Exponential map.

        Args:
            v: tangent vector.

        Returns:
            the endpoint of the geodesic with initial velocity v.

        Raises:
            BeyondInjectivityError: if the vector is longer than the injectivity radius.
        """
        self.check_tangent(v)
        if self.norm(v) >= self.injectivity_radius:
            raise BeyondInjectivityError(
                f"tangent norm {self.norm(v):.6f} reaches the injectivity radius"
            )
        return Point(self.expmap(v.base.coords, v.coords))

    def log(self, x: Point, y: Point) -> TangentVector:
        """Logarithm map.

        Args:
            x: base point.
            y: target point.

        Returns:
            the tangent at x pointing to y with norm d(x, y); zero when x = y.

        Raises:
            BeyondInjectivityError: if y is at or beyond the injectivity radius.
        """
        self.check_point(x)
        self.check_point(y)
        if self.dist(x, y) >= self.injectivity_radius - POINT_TOL:
            raise BeyondInjectivityError("points are antipodal; the logarithm is undefined")
        return TangentVector(x, self.logmap(x.coords, y.coords))

    def dist(self, x: Point, y: Point) -> float:
        """Geodesic distance.

        Args:
            x: first point.
            y: second point.

        Returns:
            the distance.
        """
        self.check_point(x)
        self.check_point(y)
        return float(self.distance(x.coords, y.coords))

    def inner(self, u: TangentVector, v: TangentVector) -> float:
        """Metric inner product.

        Args:
            u: first tangent vector.
            v: second tangent vector, anchored at the same point.

        Returns:
            the inner product.

        Raises:
            BaseMismatchError: if the anchors differ.
        """
        self.check_tangent(u)
        self.check_tangent(v)
        if not np.allclose(u.base.coords, v.base.coords, rtol=0.0, atol=POINT_TOL):
            raise BaseMismatchError("tangent vectors are anchored at different points")
        return float(self.inner_product(u.base.coords, u.coords, v.coords))

    def norm(self, v: TangentVector) -> float:
        """Metric norm.

        Args:
            v: tangent vector.

        Returns:
            the norm.
        """
        return float(self.norm_array(v.base.coords, v.coords))

    def parallel_transport(self, v: TangentVector, to: Point) -> TangentVector:
        """Parallel transport along the minimizing geodesic.

        Args:
            v: tangent vector.
            to: destination point.

        Returns:
            the transported vector anchored at the destination.

        Raises:
            BeyondInjectivityError: if the destination is beyond the injectivity radius.
        """
        self.check_tangent(v)
        if self.dist(v.base, to) >= self.injectivity_radius - POINT_TOL:
            raise BeyondInjectivityError("no unique geodesic to transport along")
        return TangentVector(to, self.transp(v.base.coords, v.coords, to.coords))

    def project_ball(self, ball: GeodesicBall, x: Point) -> Point:
        """Riemannian projection onto a geodesic ball.

        Args:
            ball: the ball.
            x: point to project.

        Returns:
            x when it lies in the ball, else its radial retraction onto the boundary.

        Raises:
            BeyondInjectivityError: if x is beyond the injectivity radius of the center.
        """
        if self.dist(ball.center, x) >= self.injectivity_radius - POINT_TOL:
            raise BeyondInjectivityError("point is antipodal to the ball center")
        projected = self.project_ball_array(ball.center.coords, ball.radius, x.coords[None, :])
        return Point(projected[0])

    def sample_unit_tangent(self, x: Point, rng: np.random.Generator) -> TangentVector:
        """Sample a uniform unit tangent vector.

        Args:
            x: base point.
            rng: random generator.

        Returns:
            the unit tangent vector.
        """
        self.check_point(x)
        return TangentVector(x, self.sample_unit_tangents(x.coords, rng))

    def sample_uniform_ball(self, ball: GeodesicBall, rng: np.random.Generator) -> Point:
        """Sample a point from the Riemannian volume measure on a ball.

        Args:
            ball: the ball.
            rng: random generator.

        Returns:
            the sample.
        """
        self.check_ball(ball)
        return Point(self.sample_ball(ball.center.coords, ball.radius, rng))

    @abc.abstractmethod
    def _point_defect(self, x: np.ndarray) -> float:
        """Return how far coordinates are from the manifold."""

    @abc.abstractmethod
    def _tangent_defect(self, x: np.ndarray, v: np.ndarray) -> float:
        """Return the tangency residual of v at x."""


class Sphere(ManifoldChart):
    """Unit sphere in R^(d+1)."""

    kind = ManifoldKind.SPHERE
    curvature = 1.0
    injectivity_radius = math.pi

    def origin(self) -> np.ndarray:
        """Return the first basis vector."""
        return np.eye(self.ambient_dim)[0]

    def inner_product(self, x: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Return the ambient dot product."""
        return np.sum(u * v, axis=-1)

    def projx(self, x: np.ndarray) -> np.ndarray:
        """Normalize to unit length."""
        return x / _unit_norm(x)

    def proju(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Remove the radial component."""
        return v - np.sum(x * v, axis=-1, keepdims=True) * x

    def expmap(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Follow the great circle cos|v| x + sin|v| v/|v|."""
        norm_v = _unit_norm(v)
        small = norm_v <= SMALL_NORM
        ratio = np.where(small, 1.0, np.sin(norm_v) / np.where(small, 1.0, norm_v))
        return self.projx(np.cos(norm_v) * x + ratio * v)

    def logmap(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Scale the tangent component of y to the geodesic distance.

        Raises:
            BeyondInjectivityError: for antipodal pairs.
        """
        u = y - np.sum(x * y, axis=-1, keepdims=True) * x
        norm_u = _unit_norm(u)
        angle = self.distance(x, y)[..., None]
        small = norm_u <= SMALL_NORM
        if np.any(small & (angle > math.pi / 2)):
            raise BeyondInjectivityError("points are antipodal; the logarithm is undefined")
        return self.proju(x, np.where(small, 1.0, angle / np.where(small, 1.0, norm_u)) * u)

    def distance(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Return the angle between x and y."""
        # chordal form of arccos(<x, y>): exact at coincident and antipodal pairs
        return 2.0 * np.arctan2(np.linalg.norm(x - y, axis=-1), np.linalg.norm(x + y, axis=-1))

    def transp(self, x: np.ndarray, v: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Transport along the great circle from x to y.

        Raises:
            BeyondInjectivityError: for antipodal pairs.
        """
        denominator = 1.0 + np.sum(x * y, axis=-1, keepdims=True)
        if np.any(denominator <= SMALL_NORM):
            raise BeyondInjectivityError("no unique geodesic between antipodal points")
        moved = v - np.sum(y * v, axis=-1, keepdims=True) / denominator * (x + y)
        return self.proju(y, moved)

    def sn(self, t: np.ndarray) -> np.ndarray:
        """Return sin(t)."""
        return np.sin(t)

    def _point_defect(self, x: np.ndarray) -> float:
        return abs(float(np.linalg.norm(x)) - 1.0)

    def _tangent_defect(self, x: np.ndarray, v: np.ndarray) -> float:
        return float(np.dot(x, v))


class Hyperboloid(ManifoldChart):
    """Hyperboloid model {x : <x, x>_L = -1, x_0 > 0} of hyperbolic space."""

    kind = ManifoldKind.HYPERBOLOID
    curvature = -1.0

    @staticmethod
    def lorentz(u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Return the Lorentz form -u_0 v_0 + sum_i u_i v_i.

        Args:
            u: first vectors.
            v: second vectors.

        Returns:
            the form evaluated over the last axis.
        """
        return np.sum(u[..., 1:] * v[..., 1:], axis=-1) - u[..., 0] * v[..., 0]

    def origin(self) -> np.ndarray:
        """Return the vertex (1, 0, ..., 0)."""
        return np.eye(self.ambient_dim)[0]

    def inner_product(self, x: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Return the Lorentz form, positive definite on tangent spaces."""
        return self.lorentz(u, v)

    def projx(self, x: np.ndarray) -> np.ndarray:
        """Recompute the time coordinate from the space coordinates."""
        spatial = x[..., 1:]
        time = np.sqrt(1.0 + np.sum(spatial * spatial, axis=-1, keepdims=True))
        return np.concatenate([time, spatial], axis=-1)

    def proju(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Remove the Lorentz-normal component."""
        return v + self.lorentz(x, v)[..., None] * x

    def expmap(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Follow the hyperbola cosh|v| x + sinh|v| v/|v|."""
        norm_v = self.norm_array(x, v)[..., None]
        small = norm_v <= SMALL_NORM
        ratio = np.where(small, 1.0, np.sinh(norm_v) / np.where(small, 1.0, norm_v))
        return self.projx(np.cosh(norm_v) * x + ratio * v)

    def logmap(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Scale the tangent component of y to the geodesic distance."""
        u = y + self.lorentz(x, y)[..., None] * x
        norm_u = np.sqrt(np.maximum(self.lorentz(u, u), 0.0))[..., None]
        angle = self.distance(x, y)[..., None]
        small = norm_u <= SMALL_NORM
        return self.proju(x, np.where(small, 1.0, angle / np.where(small, 1.0, norm_u)) * u)

    def distance(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Return arccosh(-<x, y>_L)."""
        # chordal form: <x - y, x - y>_L = 2(cosh d - 1) avoids cancellation near x = y
        chord = x - y
        return 2.0 * np.arcsinh(np.sqrt(np.maximum(self.lorentz(chord, chord), 0.0)) / 2.0)

    def transp(self, x: np.ndarray, v: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Transport along the hyperbola from x to y."""
        coefficient = self.lorentz(y, v) / (1.0 - self.lorentz(x, y))
        return self.proju(y, v + coefficient[..., None] * (x + y))

    def sn(self, t: np.ndarray) -> np.ndarray:
        """Return sinh(t)."""
        return np.sinh(t)

    def tangent_basis(self, x: np.ndarray) -> np.ndarray:
        """Transport the standard basis at the vertex to x."""
        x = np.asarray(x, dtype=float)
        basis = np.eye(self.ambient_dim)[1:]
        return self.transp(self.origin(), basis, np.broadcast_to(x, basis.shape))

    def sample_unit_tangents(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Sample at the vertex, where the form is Euclidean, then transport."""
        x = np.asarray(x, dtype=float)
        at_origin = rng.standard_normal(x.shape)
        at_origin[..., 0] = 0.0
        at_origin /= _unit_norm(at_origin)
        return self.transp(self.origin(), at_origin, x)

    def _point_defect(self, x: np.ndarray) -> float:
        if x[0] <= 0:
            return math.inf
        return abs(float(self.lorentz(x, x)) + 1.0) / max(1.0, float(x[0]) ** 2)

    def _tangent_defect(self, x: np.ndarray, v: np.ndarray) -> float:
        return float(self.lorentz(x, v)) / max(1.0, float(x[0]))


class Euclidean(ManifoldChart):
    """Flat space R^d."""

    kind = ManifoldKind.EUCLIDEAN
    curvature = 0.0

    @property
    def ambient_dim(self) -> int:
        """Return the dimension."""
        return self.dim

    def origin(self) -> np.ndarray:
        """Return zero."""
        return np.zeros(self.dim)

    def inner_product(self, x: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Return the dot product."""
        return np.sum(u * v, axis=-1)

    def projx(self, x: np.ndarray) -> np.ndarray:
        """Return x."""
        return x

    def proju(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Return v."""
        return np.broadcast_to(v, np.broadcast_shapes(np.shape(x), np.shape(v))).copy()

    def expmap(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Return x + v."""
        return x + v

    def logmap(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Return y - x."""
        return y - x

    def distance(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Return |x - y|."""
        return np.linalg.norm(x - y, axis=-1)

    def transp(self, x: np.ndarray, v: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Return v."""
        return self.proju(y, v)

    def sn(self, t: np.ndarray) -> np.ndarray:
        """Return t."""
        return np.asarray(t, dtype=float)

    def tangent_basis(self, x: np.ndarray) -> np.ndarray:
        """Return the identity."""
        return np.eye(self.dim)

    def _point_defect(self, x: np.ndarray) -> float:
        return 0.0

    def _tangent_defect(self, x: np.ndarray, v: np.ndarray) -> float:
        return 0.0


_CHARTS: typing.Dict[ManifoldKind, typing.Type[ManifoldChart]] = {
    ManifoldKind.SPHERE: Sphere,
    ManifoldKind.HYPERBOLOID: Hyperboloid,
    ManifoldKind.EUCLIDEAN: Euclidean,
}


def chart_for(kind: typing.Union[ManifoldKind, str], dim: int) -> ManifoldChart:
    """Create the chart of a manifold kind.

    Args:
        kind: manifold kind or its name.
        dim: intrinsic dimension.

    Returns:
        the chart.
    """
    return _CHARTS[ManifoldKind(kind)](dim)
