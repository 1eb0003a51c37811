"""
Branching mechanisms psi, their tilts and the Levy measures attached to them.

Two mechanisms are provided. ``StableMechanism`` has everything in closed form.
``GeneralMechanism`` takes a user-supplied Levy density and evaluates psi and
its derivatives by quadrature. ``TiltedMechanism`` wraps either one with a
tilt ``theta`` and exposes psi_theta, its inverse and the function G.
"""
import math
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import gamma

from src.utils.errors import DomainError, NumericError
from src.utils.numerics import integrate, expand_bracket, find_root

logger = logging.getLogger(__name__)

# psi_inverse residual bound, relative to (1 + v)
PSI_INVERSE_RTOL = 1e-12
# below this value of lambda * l the integrand of psi uses its Taylor series
_SERIES_CUTOFF = 1e-3


def _require_nonneg(name, value):
    if not value >= 0:
        raise DomainError("%s must be nonnegative, got %r" % (name, value))


def _require_positive(name, value):
    if not value > 0:
        raise DomainError("%s must be positive, got %r" % (name, value))


def _compensated_exp(x):
    """e^{-x} - 1 + x without cancellation for small x."""
    if x < _SERIES_CUTOFF:
        return x * x * (0.5 - x * (1.0 / 6.0 - x / 24.0))
    return math.expm1(-x) + x


class Mechanism:
    """Quadrature machinery shared by every mechanism.

    Subclasses provide ``levy_density`` (density of pi), ``alpha0`` and the
    integration range ``quad_lower``/``quad_upper``; ``excursion_density``
    (density of pi_*) is optional.
    """

    def levy_density(self, ell):
        raise NotImplementedError

    def excursion_density(self, r):
        raise DomainError("%s has no excursion density pi_*" % type(self).__name__)

    @property
    def has_excursion_measure(self):
        return True

    # --- integrals against pi(dl) and pi_*(dr) -------------------------------

    def integrate_levy(self, func, lower=None, upper=None, points=()):
        lower = self.quad_lower if lower is None else max(lower, self.quad_lower)
        upper = self.quad_upper if upper is None else min(upper, self.quad_upper)
        if upper <= lower:
            return 0.0, 0.0
        return integrate(lambda ell: func(ell) * self.levy_density(ell), lower, upper, points=points)

    def integrate_excursion(self, func, lower=0.0, upper=math.inf, points=()):
        if not self.has_excursion_measure:
            raise DomainError("%s has no excursion density pi_*" % type(self).__name__)
        return integrate(lambda r: func(r) * self.excursion_density(r), lower, upper, points=points)

    # --- quadrature forms ---------------------------------------------------

    def psi_integral(self, lam):
        """alpha0 * lambda + int pi(dl) [e^{-lambda l} - 1 + lambda l], with its error."""
        _require_nonneg("lambda", lam)
        if lam == 0:
            return 0.0, 0.0
        value, abserr = self.integrate_levy(lambda ell: _compensated_exp(lam * ell), points=(1.0 / lam,))
        return self.alpha0 * lam + value, abserr

    def psi_prime_integral(self, lam):
        _require_nonneg("lambda", lam)
        if lam == 0:
            return self.alpha0, 0.0
        value, abserr = self.integrate_levy(lambda ell: -ell * math.expm1(-lam * ell), points=(1.0 / lam,))
        return self.alpha0 + value, abserr

    def psi_second_integral(self, lam):
        _require_positive("lambda", lam)
        return self.integrate_levy(lambda ell: ell * ell * math.exp(-lam * ell), points=(1.0 / lam,))

    def pi_star_tail_integral(self, eps):
        _require_positive("eps", eps)
        return self.integrate_excursion(lambda r: 1.0, lower=eps)

    def phi_small_mass_integral(self, eps):
        _require_positive("eps", eps)
        return self.integrate_excursion(lambda r: r, lower=0.0, upper=eps)

    def check_shape(self, grid=None):
        """Spot check psi(0) = 0, psi increasing and convex on a grid."""
        grid = np.linspace(0.0, 10.0, 41) if grid is None else np.asarray(grid, dtype=float)
        values = np.array([self.psi(lam) for lam in grid])
        if grid[0] == 0 and values[0] != 0:
            raise DomainError("psi(0) = %r, expected 0" % values[0])
        steps = np.diff(values)
        if np.any(steps <= 0):
            raise DomainError("psi is not strictly increasing on the grid")
        slopes = steps / np.diff(grid)
        if np.any(np.diff(slopes) < -1e-9 * np.abs(slopes[1:])):
            raise DomainError("psi is not convex on the grid")
        return True


@dataclass(frozen=True)
class StableMechanism(Mechanism):
    """psi(lambda) = lambda^alpha with 1 < alpha < 2."""

    alpha: float
    alpha0 = 0.0
    quad_lower = 0.0
    quad_upper = math.inf

    def __post_init__(self):
        if not 1.0 < self.alpha < 2.0:
            raise DomainError("alpha must lie in (1, 2), got %r" % (self.alpha,))
        object.__setattr__(self, "alpha", float(self.alpha))

    # constants of pi(dl) = levy_constant * l^{-1-alpha} dl and
    # pi_*(dr) = excursion_constant * r^{-1-1/alpha} dr
    @property
    def levy_constant(self):
        return self.alpha * (self.alpha - 1.0) / gamma(2.0 - self.alpha)

    @property
    def excursion_constant(self):
        return 1.0 / (self.alpha * gamma(1.0 - 1.0 / self.alpha))

    def levy_density(self, ell):
        return self.levy_constant * ell ** (-1.0 - self.alpha)

    def excursion_density(self, r):
        return self.excursion_constant * r ** (-1.0 - 1.0 / self.alpha)

    def psi(self, lam):
        _require_nonneg("lambda", lam)
        return lam ** self.alpha

    def psi_prime(self, lam):
        _require_nonneg("lambda", lam)
        return self.alpha * lam ** (self.alpha - 1.0)

    def psi_second(self, lam):
        _require_nonneg("lambda", lam)
        if lam == 0:
            return math.inf
        return self.alpha * (self.alpha - 1.0) * lam ** (self.alpha - 2.0)

    def psi_inverse(self, v):
        _require_nonneg("v", v)
        return v ** (1.0 / self.alpha)

    def pi_star_tail(self, eps):
        _require_positive("eps", eps)
        return eps ** (-1.0 / self.alpha) / gamma(1.0 - 1.0 / self.alpha)

    def phi_small_mass(self, eps):
        _require_positive("eps", eps)
        return eps ** (1.0 - 1.0 / self.alpha) / ((self.alpha - 1.0) * gamma(1.0 - 1.0 / self.alpha))


@dataclass(frozen=True)
class GeneralMechanism(Mechanism):
    """
    psi(lambda) = alpha0 * lambda + int pi(dl) [e^{-lambda l} - 1 + lambda l]
    for a user-supplied Levy density on (quad_lower, quad_upper).

    ``infinite_variation`` records the user's assertion that
    int_{(0,1)} l pi(dl) is infinite; it is not checked. Without
    ``excursion_density`` the N[.] functionals of the analytics module are
    unavailable.
    """

    alpha0: float
    levy_density: Callable[[float], float] = field(compare=False)
    infinite_variation: bool = True
    excursion_density: Optional[Callable[[float], float]] = field(default=None, compare=False)
    quad_lower: float = 0.0
    quad_upper: float = math.inf

    def __post_init__(self):
        _require_nonneg("alpha0", self.alpha0)
        if not 0.0 <= self.quad_lower < self.quad_upper:
            raise DomainError("invalid quadrature domain (%r, %r)" % (self.quad_lower, self.quad_upper))
        if not self.infinite_variation:
            logger.warning("GeneralMechanism declared with finite variation; the fragmentation results assume infinite variation")
        try:
            small, _ = self.integrate_levy(lambda ell: ell * ell, upper=1.0)
            large, _ = self.integrate_levy(lambda ell: ell, lower=1.0)
        except NumericError as error:
            raise DomainError("int (l ^ l^2) pi(dl) does not converge: %s" % error) from error
        if not (math.isfinite(small) and math.isfinite(large)):
            raise DomainError("int (l ^ l^2) pi(dl) is infinite")

    @property
    def has_excursion_measure(self):
        return self.excursion_density is not None

    def psi(self, lam):
        return self.psi_integral(lam)[0]

    def psi_prime(self, lam):
        return self.psi_prime_integral(lam)[0]

    def psi_second(self, lam):
        return self.psi_second_integral(lam)[0]

    def psi_inverse(self, v):
        _require_nonneg("v", v)
        if v == 0:
            return 0.0
        upper = expand_bracket(lambda lam: self.psi(lam) - v, 0.0, max(1.0, v) + v)
        root = find_root(lambda lam: self.psi(lam) - v, 0.0, upper)
        value, abserr = self.psi_integral(root)
        residual = abs(value - v)
        if residual > PSI_INVERSE_RTOL * (1.0 + v) + abserr:
            raise NumericError("psi_inverse residual above tolerance", v=v, root=root, residual=residual)
        return root

    def pi_star_tail(self, eps):
        return self.pi_star_tail_integral(eps)[0]

    def phi_small_mass(self, eps):
        return self.phi_small_mass_integral(eps)[0]


@dataclass(frozen=True)
class TiltedMechanism:
    """psi_theta(lambda) = psi(lambda + theta) - psi(theta) for a base mechanism."""

    base: Mechanism
    theta: float

    def __post_init__(self):
        _require_nonneg("theta", self.theta)
        object.__setattr__(self, "theta", float(self.theta))

    @property
    def is_stable(self):
        return isinstance(self.base, StableMechanism)

    def psi_theta(self, lam):
        _require_nonneg("lambda", lam)
        return self.base.psi(lam + self.theta) - self.base.psi(self.theta)

    def psi_theta_prime(self, lam):
        _require_nonneg("lambda", lam)
        return self.base.psi_prime(lam + self.theta)

    def psi_theta_inverse(self, v):
        _require_nonneg("v", v)
        if v == 0:
            return 0.0
        # rounding can push the difference a hair below zero for tiny v
        return max(self.base.psi_inverse(v + self.base.psi(self.theta)) - self.theta, 0.0)

    def big_G(self, a):
        """G(a) = psi(theta + a) - psi(a) - psi(theta)."""
        _require_nonneg("a", a)
        return self.base.psi(self.theta + a) - self.base.psi(a) - self.base.psi(self.theta)

    def big_G_prime(self, a):
        _require_nonneg("a", a)
        return self.base.psi_prime(self.theta + a) - self.base.psi_prime(a)

    def big_G_second(self, a):
        _require_nonneg("a", a)
        if a == 0:
            return -math.inf
        return self.base.psi_second(self.theta + a) - self.base.psi_second(a)

    def big_G_integral(self, a):
        """int pi(dr) (1 - e^{-theta r}) (1 - e^{-a r}), with its error."""
        _require_nonneg("a", a)
        if a == 0 or self.theta == 0:
            return 0.0, 0.0
        theta = self.theta
        return self.base.integrate_levy(
            lambda r: math.expm1(-theta * r) * math.expm1(-a * r),
            points=(1.0 / theta, 1.0 / a),
        )

    @property
    def excursion_tilt(self):
        """psi(theta): rate of the exponential weight turning pi_* into the law of sigma~."""
        return self.base.psi(self.theta)

    def tilted_expectation(self, func, lower=0.0, upper=math.inf, points=()):
        """N[F(sigma~)] = int F(r) e^{-psi(theta) r} pi_*(dr), with its error."""
        rate = self.excursion_tilt
        mesh = tuple(points) + ((1.0 / rate,) if rate > 0 else ())
        return self.base.integrate_excursion(
            lambda r: func(r) * math.exp(-rate * r), lower=lower, upper=upper, points=mesh,
        )

    def tilted_tail(self, eps):
        """int_eps^inf e^{-psi(theta) r} pi_*(dr): mean number of tagged-type fragments above eps."""
        _require_positive("eps", eps)
        return self.tilted_expectation(lambda r: 1.0, lower=eps)[0]


def psi(m, lam):
    return m.psi(lam)


def psi_inverse(m, v):
    return m.psi_inverse(v)


def psi_theta(t, lam):
    return t.psi_theta(lam)


def psi_theta_inverse(t, v):
    return t.psi_theta_inverse(v)


def pi_star_tail(m, eps):
    return m.pi_star_tail(eps)


def phi_small_mass(m, eps):
    return m.phi_small_mass(eps)


def big_G(t, a):
    return t.big_G(a)
