"""
Laplace functional of (calN^eps, calM^eps, R, sigma) given the tagged fragment,
and the first two moments of the linear form x calN + y calM + gamma R.

For weights (x, y, gamma, beta) the conditional Laplace transform is
exp(-(beta + c') s0) where c' is the smallest root of c = H(c + beta) and

    H(c) = G(gamma + N[1 - exp(-(x 1{s > eps} + y s 1{s <= eps} + c s))]),

N[F(s)] = int F(r) e^{-psi(theta) r} pi_*(dr). Differentiating the fixed point
twice along t -> (t x, t y, t gamma) at t = 0 gives c_1 and c_2, hence the
moments.
"""
import math
import logging
from dataclasses import dataclass, field
from typing import Tuple

from src.utils.errors import DomainError, NumericError
from src.utils.numerics import iterate_monotone

logger = logging.getLogger(__name__)

FIXED_POINT_STEP_RTOL = 1e-14
# |c' - H(c' + beta)| above this, relative to 1 + c', is a failure
FIXED_POINT_RESIDUAL_RTOL = 1e-10


@dataclass(frozen=True)
class LaplaceArgs:
    x: float = 0.0
    y: float = 0.0
    gamma: float = 0.0
    beta: float = 0.0
    eps: float = 0.01

    def __post_init__(self):
        for name in ("x", "y", "beta"):
            if not getattr(self, name) >= 0:
                raise DomainError("%s must be nonnegative, got %r" % (name, getattr(self, name)))
        if not math.isfinite(self.gamma):
            raise DomainError("gamma must be finite, got %r" % (self.gamma,))
        if not self.eps > 0:
            raise DomainError("eps must be positive, got %r" % (self.eps,))

    def scaled(self, t):
        """Weights (t x, t y, t gamma) with beta and eps unchanged."""
        return LaplaceArgs(t * self.x, t * self.y, t * self.gamma, self.beta, self.eps)

    def weight(self, r):
        """x 1{r > eps} + y r 1{r <= eps}."""
        return self.x if r > self.eps else self.y * r


@dataclass(frozen=True)
class FixedPointResult:
    c_prime: float
    iterations: int
    residual: float
    iterates: Tuple[float, ...] = field(default=(), repr=False)


@dataclass(frozen=True)
class MomentCoeffs:
    h_beta: float
    c0: float
    c1: float
    c2: float
    a0: float
    a1: float
    a2: float


def tilted_excursion_functional(t, args, c):
    """N[1 - exp(-(x 1{s > eps} + y s 1{s <= eps} + c s))], by quadrature split at eps."""
    if not c >= 0:
        raise DomainError("c must be nonnegative, got %r" % (c,))
    x, y, eps = args.x, args.y, args.eps
    if x == 0 and y == 0 and c == 0:
        return 0.0
    below, _ = t.tilted_expectation(lambda r: -math.expm1(-(y + c) * r), upper=eps)
    above, _ = t.tilted_expectation(lambda r: -math.expm1(-(x + c * r)), lower=eps)
    return below + above


def _G_argument(t, args, c):
    argument = args.gamma + tilted_excursion_functional(t, args, c)
    if argument < 0:
        raise DomainError(
            "G is evaluated at gamma + N[...] = %r < 0; gamma=%r is outside the admissible range"
            % (argument, args.gamma)
        )
    return argument


def H(t, args, c):
    return t.big_G(_G_argument(t, args, c))


def solve_fixed_point(t, args, accelerate=False):
    """
    Smallest root c' of c = H(c + beta), by the increasing iteration
    c_0 = 0, c_{k+1} = H(c_k + beta).
    With ``accelerate`` the iteration hands over to Brent's method on a
    bracket above the current iterate.
    """
    beta = args.beta

    def update(c):
        return H(t, args, c + beta)

    c_prime, iterates = iterate_monotone(update, start=0.0, rtol=FIXED_POINT_STEP_RTOL, accelerate=accelerate)
    residual = abs(c_prime - update(c_prime))
    if residual > FIXED_POINT_RESIDUAL_RTOL * (1.0 + c_prime):
        raise NumericError("fixed point residual above tolerance", c_prime=c_prime, residual=residual,
                           iterations=len(iterates) - 1)
    logger.debug("Fixed point c'=%.15g after %i iterations (residual %.2g)" % (c_prime, len(iterates) - 1, residual))
    return FixedPointResult(c_prime, len(iterates) - 1, residual, tuple(iterates))


def conditional_laplace(t, args, s0, fixed_point=None):
    """N[exp(-(x calN + y calM + gamma R + beta sigma)) | sigma~ = s0] = exp(-(beta + c') s0)."""
    if not s0 >= 0:
        raise DomainError("s0 must be nonnegative, got %r" % (s0,))
    if s0 == 0:
        return 1.0
    if fixed_point is None:
        fixed_point = solve_fixed_point(t, args)
    return math.exp(-(args.beta + fixed_point.c_prime) * s0)


def h_beta(t, beta):
    """h_beta = psi_theta(psi^{-1}(beta))."""
    return t.psi_theta(t.base.psi_inverse(beta))


def tagged_mass_mean(t, h):
    """N[sigma~ e^{-h sigma~}] = 1 / psi_theta'(psi_theta^{-1}(h))."""
    return 1.0 / t.psi_theta_prime(t.psi_theta_inverse(h))


def moment_denominator(t, beta):
    """
    1 - G'(a0) N[sigma~ e^{-h_beta sigma~}] in closed form, which equals
    psi'(a0) / psi_theta'(a0) with a0 = psi^{-1}(beta).
    """
    a0 = t.base.psi_inverse(beta)
    return 1.0 - t.big_G_prime(a0) * tagged_mass_mean(t, h_beta(t, beta))


def moment_coefficients(t, args):
    if not args.beta > 0:
        raise DomainError("the moment expansion needs beta > 0, got %r" % (args.beta,))
    eps = args.eps
    a0 = t.base.psi_inverse(args.beta)
    h = t.psi_theta(a0)
    c0 = h - args.beta

    def expectation(func):
        below, _ = t.tilted_expectation(lambda r: math.exp(-h * r) * func(r), upper=eps)
        above, _ = t.tilted_expectation(lambda r: math.exp(-h * r) * func(r), lower=eps)
        return below + above

    n_sigma = expectation(lambda r: r)
    n_weight = expectation(args.weight)
    g1 = t.big_G_prime(a0)
    g2 = t.big_G_second(a0)
    denominator = 1.0 - g1 * n_sigma
    if not denominator > 0:
        raise NumericError("second-moment denominator is not positive", denominator=denominator,
                           G_prime=g1, N_sigma=n_sigma)

    c1 = g1 * (args.gamma + n_weight) / denominator
    n_square = expectation(lambda r: (args.weight(r) + c1 * r) ** 2)
    c2 = (c1 * c1 * g2 / (g1 * g1) - g1 * n_square) / denominator
    a1 = args.gamma + n_weight + c1 * n_sigma
    a2 = c2 * n_sigma - n_square
    return MomentCoeffs(h_beta=h, c0=c0, c1=c1, c2=c2, a0=a0, a1=a1, a2=a2)


def second_moment(t, args, s0):
    """
    N[(x calN + y calM + gamma R)^2 e^{-beta sigma} | sigma~ = s0]
    = e^{-h_beta s0} (c1^2 s0 - c2) s0.
    """
    if not s0 >= 0:
        raise DomainError("s0 must be nonnegative, got %r" % (s0,))
    coeffs = moment_coefficients(t, args)
    value = math.exp(-coeffs.h_beta * s0) * (coeffs.c1 ** 2 * s0 - coeffs.c2) * s0
    return coeffs, value


def first_moment(t, args, s0, coeffs=None):
    """N[(x calN + y calM + gamma R) e^{-beta sigma} | sigma~ = s0] = e^{-h_beta s0} c1 s0."""
    if not s0 >= 0:
        raise DomainError("s0 must be nonnegative, got %r" % (s0,))
    coeffs = moment_coefficients(t, args) if coeffs is None else coeffs
    return math.exp(-coeffs.h_beta * s0) * coeffs.c1 * s0


def unconditional_second_moment(t, args, coeffs=None):
    """N[(x calN + y calM + gamma R)^2 e^{-beta sigma}] = c1^2 N[e^{-h s} s^2] - c2 N[e^{-h s} s]."""
    coeffs = moment_coefficients(t, args) if coeffs is None else coeffs
    h = coeffs.h_beta
    n_sigma = t.tilted_expectation(lambda r: math.exp(-h * r) * r)[0]
    n_sigma2 = t.tilted_expectation(lambda r: math.exp(-h * r) * r * r)[0]
    return coeffs.c1 ** 2 * n_sigma2 - coeffs.c2 * n_sigma


def second_moment_rate_bound(m, eps):
    """1 / pi_bar_*(eps) + eps / phi(eps): the order of the L^2 error at eps."""
    return 1.0 / m.pi_star_tail(eps) + eps / m.phi_small_mass(eps)
