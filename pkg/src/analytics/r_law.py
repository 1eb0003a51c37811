"""
Root equation for the joint Laplace transform of (sigma, R):

    beta + psi(gamma + theta + v) = psi(v + theta) + psi(v + gamma),

solved for v >= max(0, -gamma), cross-checked against the composition
v = psi_theta^{-1}(beta + c) with c = G(gamma + psi_theta^{-1}(beta + c)).

The equation is written here for exponents e^{-beta sigma - gamma R}; which
sign of gamma is meaningful is left to the caller, so both signs are accepted
on the range where every psi argument is nonnegative.
"""
import math
import logging
from dataclasses import dataclass

from src.utils.errors import DomainError, NumericError
from src.utils.numerics import expand_bracket, find_root, iterate_monotone

logger = logging.getLogger(__name__)

ROOT_RESIDUAL_RTOL = 1e-12


@dataclass(frozen=True)
class RLawRoot:
    v: float
    residual: float
    alternate_v: float
    route_gap: float


def r_law_equation(t, beta, gamma, v):
    """psi(v + theta) + psi(v + gamma) - psi(v + gamma + theta) - beta, increasing in v."""
    psi, theta = t.base.psi, t.theta
    return psi(v + theta) + psi(v + gamma) - psi(v + gamma + theta) - beta


def _lowest_admissible(gamma):
    return max(0.0, -gamma)


def r_law_bisection(t, beta, gamma):
    """Root of the equation by a geometrically expanded bracket and Brent's method."""
    if not beta >= 0:
        raise DomainError("beta must be nonnegative, got %r" % (beta,))
    lower = _lowest_admissible(gamma)

    def equation(v):
        return r_law_equation(t, beta, gamma, v)

    at_lower = equation(lower)
    if at_lower > 0:
        raise NumericError(
            "no nonnegative root: the equation is already positive at the lowest admissible v; "
            "with gamma < 0 the sign convention for the R exponent is ambiguous",
            beta=beta, gamma=gamma, v_lower=lower, value=at_lower,
        )
    if at_lower == 0:
        return lower
    upper = expand_bracket(equation, lower, lower + max(1.0, beta) + beta)
    return find_root(equation, lower, upper)


def r_law_composition(t, beta, gamma, accelerate=True):
    """Second route: iterate c -> G(gamma + psi_theta^{-1}(beta + c)) from the lowest admissible c."""
    if not beta >= 0:
        raise DomainError("beta must be nonnegative, got %r" % (beta,))
    start = max(0.0, t.psi_theta(_lowest_admissible(gamma)) - beta)

    def update(c):
        argument = gamma + t.psi_theta_inverse(beta + c)
        if argument < 0:
            raise DomainError("G argument %r < 0 at c=%r" % (argument, c))
        return t.big_G(argument)

    if update(start) < start:
        raise NumericError("composition route has no admissible fixed point", beta=beta, gamma=gamma, start=start)
    c, _ = iterate_monotone(update, start=start, accelerate=accelerate)
    return t.psi_theta_inverse(beta + c)


def solve_R_law_root(t, beta, gamma):
    v = r_law_bisection(t, beta, gamma)
    residual = abs(r_law_equation(t, beta, gamma, v))
    scale = 1.0 + beta + t.base.psi(v + abs(gamma) + t.theta)
    if residual > ROOT_RESIDUAL_RTOL * scale:
        raise NumericError("root residual above tolerance", beta=beta, gamma=gamma, v=v, residual=residual)
    alternate = r_law_composition(t, beta, gamma)
    gap = abs(v - alternate)
    if gap > 1e-8 * (1.0 + v):
        logger.warning("R-law routes disagree at beta=%g gamma=%g: %.15g vs %.15g" % (beta, gamma, v, alternate))
    return RLawRoot(v=v, residual=residual, alternate_v=alternate, route_gap=gap)


def r_law_laplace(t, beta, gamma, s0):
    """N[exp(-beta sigma - gamma R) | sigma~ = s0] implied by the root, exp(-(psi_theta(v)) s0)."""
    if not s0 >= 0:
        raise DomainError("s0 must be nonnegative, got %r" % (s0,))
    root = solve_R_law_root(t, beta, gamma)
    return math.exp(-t.psi_theta(root.v) * s0)
