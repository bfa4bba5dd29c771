# Copyright 2025 Canonical Ltd.
# See LICENSE file for licensing details.

"""Curvature comparison functions and the constants derived from them.

The comparison functions bound how far geodesic triangles on a manifold with
sectional curvature in [K_min, K_max] deviate from Euclidean ones. Every step
size, contraction rate and reported regret bound of the package is derived here
from a CurvatureContext. Algorithm iterates only ever depend on the step sizes;
C3, C4 and C8 are analysis inputs whose exact values are not computable from the
geometry alone, so they default to order-correct heuristics and only influence
reported bounds.
"""

import itertools
import logging
import math
import typing

# pydantic is causing this no-name-in-module problem
from pydantic import (  # pylint: disable=no-name-in-module,import-error
    BaseModel,
    Extra,
    Field,
    ValidationError,
    root_validator,
)

from exceptions import DomainViolationError

logger = logging.getLogger(__name__)


def c1(k: float, diameter: float) -> float:
    """Evaluate the smoothness comparison function.

    Args:
        k: Lower curvature bound.
        diameter: Distance scale, positive.

    Returns:
        1 for nonnegative curvature, sqrt(-k)*D/tanh(sqrt(-k)*D) otherwise.

    Raises:
        DomainViolationError: if the distance scale is not positive.
    """
    if diameter <= 0:
        raise DomainViolationError(f"c1 needs a positive distance, got {diameter}")
    if k >= 0:
        return 1.0
    scaled = math.sqrt(-k) * diameter
    return scaled / math.tanh(scaled)


def c2(k: float, diameter: float) -> float:
    """Evaluate the convexity comparison function.

    Args:
        k: Upper curvature bound.
        diameter: Distance scale, positive and below pi/sqrt(k) when k > 0.

    Returns:
        1 for nonpositive curvature, sqrt(k)*D*cot(sqrt(k)*D) otherwise.

    Raises:
        DomainViolationError: if the distance is outside the function domain.
    """
    if diameter <= 0:
        raise DomainViolationError(f"c2 needs a positive distance, got {diameter}")
    if k <= 0:
        return 1.0
    scaled = math.sqrt(k) * diameter
    if scaled >= math.pi:
        raise DomainViolationError(
            f"c2 is undefined for curvature {k} at distance {diameter} >= pi/sqrt(K)"
        )
    return scaled / math.tan(scaled)


def c7(k: float, distance: float) -> float:
    """Evaluate the projection-error comparison function.

    The value is negative on (0, pi/(2 sqrt(k))) for positive curvature and is
    returned as is.

    Args:
        k: Upper curvature bound.
        distance: Distance scale, positive.

    Returns:
        -sqrt(k)*d*cot(sqrt(k)*d) below the quarter circle for k > 0, 0 otherwise.

    Raises:
        DomainViolationError: if the distance scale is not positive.
    """
    if distance <= 0:
        raise DomainViolationError(f"c7 needs a positive distance, got {distance}")
    if k <= 0:
        return 0.0
    scaled = math.sqrt(k) * distance
    if scaled >= math.pi / 2:
        return 0.0
    return -scaled / math.tan(scaled)


def c11(k: float, radius: float) -> float:
    """Evaluate the generalized sine sn_K.

    Args:
        k: Curvature.
        radius: Geodesic radius.

    Returns:
        radius when k = 0, sin(sqrt(k) r)/sqrt(k) when k > 0 and sinh(sqrt(-k) r)/sqrt(-k)
        when k < 0.
    """
    if k == 0:
        return radius
    if k > 0:
        root = math.sqrt(k)
        return math.sin(root * radius) / root
    root = math.sqrt(-k)
    return math.sinh(root * radius) / root


def heuristic_analysis_constants(k_min: float, k_max: float) -> typing.Tuple[float, float, float]:
    """Return the default C3, C4 and C8 for a curvature range.

    Args:
        k_min: Lower curvature bound.
        k_max: Upper curvature bound.

    Returns:
        (C3, C4, C8), all equal to max(|k_min|, k_max).
    """
    scale = max(abs(k_min), k_max)
    return scale, scale, scale


class CurvatureContext(BaseModel):  # pylint: disable=too-few-public-methods
    """Inputs of the derived constants.

    Attrs:
        k_min: lower sectional curvature bound.
        k_max: upper sectional curvature bound.
        diameter: diameter D of the feasible domain.
        c3: lower distortion constant of the logarithm map.
        c4: upper distortion constant of the logarithm map.
        c8: parallel transport comparison constant.
        n_agents: number of agents.
        sigma2: second largest singular value of the communication matrix.
    """

    k_min: float
    k_max: float
    diameter: float = Field(..., gt=0)
    c3: float = Field(..., ge=0)
    c4: float = Field(..., ge=0)
    c8: float = Field(..., ge=0)
    n_agents: int = Field(..., ge=1)
    sigma2: float = Field(..., ge=0, lt=1)

    class Config:  # pylint: disable=too-few-public-methods
        """Config class.

        Attrs:
            extra: extra configuration.
            allow_mutation: whether fields may be reassigned.
        """

        extra = Extra.forbid
        allow_mutation = False

    @root_validator(skip_on_failure=True)
    @classmethod
    def _check_curvature(
        cls, values: typing.Dict[str, typing.Any]
    ) -> typing.Dict[str, typing.Any]:
        """Check the curvature bounds against the domain diameter.

        Args:
            values: field values.

        Returns:
            the unchanged values.

        Raises:
            ValueError: if the bounds are inverted or the diameter is too large.
        """
        if values["k_min"] > values["k_max"]:
            raise ValueError("k_min must not exceed k_max")
        k_max = values["k_max"]
        if k_max > 0 and values["diameter"] >= math.pi / (2 * math.sqrt(k_max)):
            raise ValueError("diameter must stay below pi/(2 sqrt(k_max))")
        return values

    @classmethod
    def build(
        cls,
        *,
        k_min: float,
        k_max: float,
        diameter: float,
        n_agents: int,
        sigma2: float,
        c3: typing.Optional[float] = None,
        c4: typing.Optional[float] = None,
        c8: typing.Optional[float] = None,
    ) -> "CurvatureContext":
        """Create a context, filling unset analysis constants with the heuristic defaults.

        Args:
            k_min: lower sectional curvature bound.
            k_max: upper sectional curvature bound.
            diameter: diameter of the feasible domain.
            n_agents: number of agents.
            sigma2: second largest singular value of the communication matrix.
            c3: lower distortion constant, heuristic when None.
            c4: upper distortion constant, heuristic when None.
            c8: transport comparison constant, heuristic when None.

        Returns:
            The validated context.

        Raises:
            DomainViolationError: if the values violate the context invariants.
        """
        default_c3, default_c4, default_c8 = heuristic_analysis_constants(k_min, k_max)
        if None in (c3, c4, c8):
            logger.debug("Using heuristic analysis constants for curvature [%s, %s]", k_min, k_max)
        try:
            return cls(
                k_min=k_min,
                k_max=k_max,
                diameter=diameter,
                c3=default_c3 if c3 is None else c3,
                c4=default_c4 if c4 is None else c4,
                c8=default_c8 if c8 is None else c8,
                n_agents=n_agents,
                sigma2=sigma2,
            )
        except ValidationError as exc:
            error_fields = set(
                itertools.chain.from_iterable(error["loc"] for error in exc.errors())
            )
            reasons = "; ".join(error["msg"] for error in exc.errors())
            error_field_str = " ".join(f"{f}" for f in sorted(error_fields))
            raise DomainViolationError(
                f"invalid curvature context: {error_field_str} ({reasons})"
            ) from exc


class DerivedConstants(BaseModel):  # pylint: disable=too-few-public-methods
    """Constants derived from a CurvatureContext.

    Attrs:
        c1: smoothness constant, at least 1.
        c2: convexity constant in (0, 1].
        c5: full-information regret constant.
        c6: subconvexity constant of the smoothed losses.
        c7: projection-error constant.
        c9: geodesic-variation constant at the smoothing radius.
        c10: logarithm-variation constant.
        alpha: curvature discount of the network step-size.
        rho: consensus contraction rate in (0, 1).
        s_consensus: variance-optimal consensus step-size c2/(2 c1).
        s_network: network-error consensus step-size alpha (1 - sigma2)/(4 c1).
        smoothing_radius: smoothing radius used for c9.
    """

    c1: float
    c2: float
    c5: float
    c6: float
    c7: float
    c9: float
    c10: float
    alpha: float
    rho: float
    s_consensus: float
    s_network: float
    smoothing_radius: float

    class Config:  # pylint: disable=too-few-public-methods
        """Config class.

        Attrs:
            allow_mutation: whether fields may be reassigned.
        """

        allow_mutation = False


def c9(k_min: float, k_max: float, smoothing_radius: float) -> float:
    """Evaluate the geodesic-variation constant at a smoothing radius.

    Args:
        k_min: Lower curvature bound.
        k_max: Upper curvature bound.
        smoothing_radius: Smoothing radius, positive.

    Returns:
        (cosh(sqrt(max(k_max, |k_min|)) delta) - 1) / delta^2.
    """
    root = math.sqrt(max(k_max, abs(k_min)))
    return (math.cosh(root * smoothing_radius) - 1.0) / smoothing_radius**2


def derive(
    ctx: CurvatureContext, smoothing_radius: typing.Optional[float] = None
) -> DerivedConstants:
    """Compute every derived constant of a context.

    Args:
        ctx: The curvature context.
        smoothing_radius: Radius used by c9; the supremum over radii up to the
            diameter, attained at the diameter, when None.

    Returns:
        The derived constants.

    Raises:
        DomainViolationError: if c2 is outside its domain or degenerates to zero.
    """
    diameter = ctx.diameter
    delta = diameter if smoothing_radius is None else smoothing_radius
    if delta <= 0:
        raise DomainViolationError(f"smoothing radius must be positive, got {delta}")
    const_1 = c1(ctx.k_min, diameter)
    const_2 = c2(ctx.k_max, diameter)
    if const_2 <= 0:
        raise DomainViolationError(f"c2 vanishes at diameter {diameter}")
    const_7 = c7(ctx.k_max, 2 * diameter)
    distortion = (1 + ctx.c4 * diameter**2) ** 2
    rho = 1 - const_2**3 * (1 - ctx.sigma2) / (4 * const_1 * distortion)
    alpha = const_2 / (1 + 16 * ctx.c4 * diameter**2) ** 2
    const_9 = c9(ctx.k_min, ctx.k_max, delta)
    const_10 = 2 * ctx.c8 * (1 + 16 * ctx.c4 * diameter**2)
    return DerivedConstants(
        c1=const_1,
        c2=const_2,
        c5=math.sqrt(8 * math.sqrt(ctx.n_agents) / (1 - rho) + const_1 + const_7),
        c6=const_9 * diameter**2 + 4 * const_10 * diameter**2,
        c7=const_7,
        c9=const_9,
        c10=const_10,
        alpha=alpha,
        rho=rho,
        s_consensus=const_2 / (2 * const_1),
        s_network=network_step_size(alpha, const_1, ctx.sigma2),
        smoothing_radius=delta,
    )


def network_step_size(alpha: float, const_1: float, sigma2: float) -> float:
    """Return the consensus step-size that bounds the network error.

    Args:
        alpha: Curvature discount.
        const_1: Smoothness constant c1.
        sigma2: Second largest singular value of the communication matrix.

    Returns:
        alpha (1 - sigma2) / (4 c1).
    """
    return alpha * (1 - sigma2) / (4 * const_1)


def theta(k_min: float, k_max: float, diameter: float, inner_radius: float) -> float:
    """Return the ratio relating smoothing radius and shrinkage.

    Args:
        k_min: Lower curvature bound.
        k_max: Upper curvature bound.
        diameter: Outer radius D of the domain around its interior point.
        inner_radius: Radius r of a ball around the interior point inside the domain.

    Returns:
        c11(k_max, D + r) / c11(k_min, D + r); exactly 1 for constant curvature.
    """
    scale = diameter + inner_radius
    return c11(k_max, scale) / c11(k_min, scale)


def coupled_tau(delta: float, inner_radius: float, ratio: float) -> float:
    """Return the shrinkage that keeps delta-perturbed queries feasible.

    Args:
        delta: Smoothing radius.
        inner_radius: Radius r of the inner ball.
        ratio: Value of theta.

    Returns:
        delta / (r theta).
    """
    return delta / (inner_radius * ratio)


def network_error_bound(n_agents: int, eta: float, lipschitz: float, rho: float) -> float:
    """Bound the distance of any agent to the network mean under a constant step.

    Args:
        n_agents: Number of agents.
        eta: Constant gradient step-size.
        lipschitz: Lipschitz constant of the losses.
        rho: Consensus contraction rate.

    Returns:
        2 sqrt(n) eta L / (1 - rho).
    """
    return 2 * math.sqrt(n_agents) * eta * lipschitz / (1 - rho)


def tuned_eta(
    diameter: float, lipschitz: float, horizon: int, constants: DerivedConstants, n_agents: int
) -> float:
    """Return the constant step-size that attains the full-information regret bound.

    Args:
        diameter: Domain diameter.
        lipschitz: Lipschitz constant of the losses.
        horizon: Number of rounds.
        constants: Derived constants.
        n_agents: Number of agents.

    Returns:
        D / (L sqrt(T)) (8 sqrt(n)/(1 - rho) + c1 + c7)^(-1/2).
    """
    scale = 8 * math.sqrt(n_agents) / (1 - constants.rho) + constants.c1 + constants.c7
    return diameter / (lipschitz * math.sqrt(horizon)) / math.sqrt(scale)


def full_regret_bound(
    diameter: float, lipschitz: float, horizon: int, constants: DerivedConstants
) -> float:
    """Return the full-information static regret bound c5 D L sqrt(T).

    Args:
        diameter: Domain diameter.
        lipschitz: Lipschitz constant of the losses.
        horizon: Number of rounds.
        constants: Derived constants.

    Returns:
        The bound.
    """
    return constants.c5 * diameter * lipschitz * math.sqrt(horizon)


def bandit_regret_bound(  # pylint: disable=too-many-arguments
    *,
    diameter: float,
    lipschitz: float,
    dim: int,
    horizon: int,
    eta: float,
    delta: float,
    tau: float,
    n_agents: int,
    constants: DerivedConstants,
) -> float:
    """Return the expected two-point bandit regret bound for explicit eta, delta and tau.

    Args:
        diameter: Domain diameter D.
        lipschitz: Lipschitz constant L.
        dim: Intrinsic dimension d.
        horizon: Number of rounds T.
        eta: Constant gradient step-size.
        delta: Smoothing radius.
        tau: Shrink fraction.
        n_agents: Number of agents.
        constants: Derived constants.

    Returns:
        D^2/(2 eta) + eta T (4 sqrt(n)(dL)^2/(1 - rho) + c1 (dL)^2/2)
        + delta T (3L + L c6) + tau T (D L + D^2/eta).
    """
    scaled = (dim * lipschitz) ** 2
    return (
        diameter**2 / (2 * eta)
        + eta
        * horizon
        * (4 * math.sqrt(n_agents) * scaled / (1 - constants.rho) + constants.c1 * scaled / 2)
        + delta * horizon * (3 * lipschitz + lipschitz * constants.c6)
        + tau * horizon * (diameter * lipschitz + diameter**2 / eta)
    )


class ProjectionErrorBound(typing.NamedTuple):
    """Projection-error bound of a run.

    Attrs:
        value: c7(k_max, 2D) times the accumulated half squared step lengths over eta.
        vacuous: whether the comparison constant is negative, which makes the bound
            assert a strict decrease that projection cannot guarantee in general.
    """

    value: float
    vacuous: bool


def projection_error_bound(
    k_max: float, diameter: float, eta: float, gradient_norms: typing.Iterable[float]
) -> ProjectionErrorBound:
    """Bound the accumulated change of squared distance caused by projection.

    Args:
        k_max: Upper curvature bound.
        diameter: Domain diameter.
        eta: Gradient step-size.
        gradient_norms: Norms of the gradients applied by one agent.

    Returns:
        The bound, flagged vacuous when the comparison constant is negative.
    """
    const_7 = c7(k_max, 2 * diameter)
    value = const_7 * sum(0.5 * eta * norm**2 for norm in gradient_norms)
    if const_7 < 0:
        logger.warning("Projection-error constant %.6f is negative; the bound is vacuous", const_7)
    return ProjectionErrorBound(value=value, vacuous=const_7 < 0)
