"""
Numerical plumbing: piecewise adaptive quadrature, bracketed root finding and
Monte Carlo summaries.

All sums that feed reproducible outputs go through ``math.fsum`` so the result
does not depend on the order in which partial results arrive.
"""
import math
import logging
import warnings

import numpy as np
import scipy.integrate
import scipy.optimize
from scipy.integrate import IntegrationWarning

from src.utils.errors import DomainError, NumericError

logger = logging.getLogger(__name__)

# per-segment tolerances handed to QUADPACK
QUAD_EPSABS = 1e-13
QUAD_EPSREL = 1e-11
QUAD_LIMIT = 200
# a segment that raised an IntegrationWarning is still accepted below these
ACCEPT_ABSERR = 1e-10
ACCEPT_RELERR = 1e-8

# smallest / largest decade breakpoints inserted on unbounded ranges
MESH_FLOOR = 1e-14
MESH_CEILING = 1e8


def decade_points(lower, upper):
    """Powers of ten strictly inside (lower, upper), clipped to the mesh range."""
    low = max(lower, MESH_FLOOR)
    high = min(upper, MESH_CEILING)
    if not low < high:
        return []
    first = math.ceil(math.log10(low))
    last = math.floor(math.log10(high))
    return [10.0 ** k for k in range(first, last + 1) if lower < 10.0 ** k < upper]


def _quad_segment(func, a, b, epsabs, epsrel):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", IntegrationWarning)
        value, abserr = scipy.integrate.quad(func, a, b, epsabs=epsabs, epsrel=epsrel, limit=QUAD_LIMIT)
    if caught and abserr > max(ACCEPT_ABSERR, ACCEPT_RELERR * abs(value)):
        raise NumericError(
            "quadrature did not converge",
            lower=a, upper=b, value=value, abserr=abserr, warning=str(caught[-1].message),
        )
    if caught:
        logger.debug("Quadrature on [%g, %g] warned but abserr %.3g is acceptable" % (a, b, abserr))
    return value, abserr


def _tail_integrand(func, start):
    """Integrand of int_start^inf func(r) dr after r = start / u, on u in (0, 1]."""

    def transformed(u):
        if u <= 0:
            return 0.0
        r = start / u
        jacobian = r / u
        if not math.isfinite(jacobian):
            return 0.0
        value = func(r)
        return value * jacobian if value else 0.0

    return transformed


def integrate(func, lower, upper, points=(), epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL):
    """
    Integrate ``func`` over [lower, upper], splitting at decade breakpoints and
    at every user-supplied point inside the range. ``upper`` may be ``inf``;
    the last segment [a, inf) is then mapped onto (0, 1] by r = a / u, so a
    power-law tail is integrated as an algebraic singularity at u = 0.

    Returns ``(value, abserr)``.
    """
    if upper < lower:
        raise DomainError("integration range [%g, %g] is reversed" % (lower, upper))
    if upper == lower:
        return 0.0, 0.0
    inner = set(decade_points(lower, upper))
    inner.update(p for p in points if p is not None and np.isfinite(p) and lower < p < upper)
    edges = [lower] + sorted(inner) + [upper]

    values, errors = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        if math.isinf(b) and a > 0:
            value, abserr = _quad_segment(_tail_integrand(func, a), 0.0, 1.0, epsabs, epsrel)
        else:
            value, abserr = _quad_segment(func, a, b, epsabs, epsrel)
        values.append(value)
        errors.append(abserr)
    return math.fsum(values), math.fsum(errors)


def expand_bracket(func, lower, guess, factor=2.0, max_steps=400):
    """
    Grow ``upper`` geometrically from ``guess`` until ``func(upper) > 0``.
    ``func`` is assumed increasing with ``func(lower) <= 0``.
    """
    upper = max(guess, lower + 1.0)
    for _ in range(max_steps):
        if func(upper) > 0:
            return upper
        upper = lower + (upper - lower) * factor
    raise NumericError("no sign change found while expanding the bracket", lower=lower, last_upper=upper)


def find_root(func, lower, upper, xtol=1e-15, rtol=4 * np.finfo(float).eps):
    """Brent's method on a bracket with a sign change."""
    f_lower, f_upper = func(lower), func(upper)
    if f_lower == 0.0:
        return lower
    if f_upper == 0.0:
        return upper
    if np.sign(f_lower) == np.sign(f_upper):
        raise NumericError("bracket has no sign change", lower=lower, upper=upper,
                           f_lower=f_lower, f_upper=f_upper)
    return scipy.optimize.brentq(func, lower, upper, xtol=xtol, rtol=rtol, maxiter=500)


def mean_stderr(values):
    """Order-independent sample mean and standard error of the mean."""
    values = np.asarray(values, dtype=float)
    n = values.size
    if n == 0:
        raise DomainError("cannot summarise an empty sample")
    mean = math.fsum(values) / n
    if n == 1:
        return mean, 0.0
    variance = math.fsum((values - mean) ** 2) / (n - 1)
    return mean, math.sqrt(variance / n)


def z_score(estimate, oracle, stderr):
    if stderr == 0.0:
        return 0.0 if estimate == oracle else math.copysign(math.inf, estimate - oracle)
    return (estimate - oracle) / stderr


def iterate_monotone(update, start=0.0, rtol=1e-14, noise_rtol=1e-10, max_iter=100000,
                     accelerate=False, warmup=8):
    """
    Increasing fixed-point iteration c_{k+1} = update(c_k) from ``start``.

    Stops once a step falls below ``rtol * (1 + c)``. A non-positive step of at
    most ``noise_rtol * (1 + c)`` is quadrature noise at the limit and also
    stops the iteration; a larger one raises ``NumericError``.

    With ``accelerate`` the iteration switches to Brent's method on
    ``update(c) - c`` after ``warmup`` steps, using the current iterate as the
    lower end of the bracket, and falls back to plain iteration if no bracket
    is found.

    Returns ``(limit, iterates)``; ``iterates`` is strictly increasing.
    """
    iterates = [start]
    current = start
    for step_index in range(1, max_iter + 1):
        proposal = update(current)
        step = proposal - current
        if step <= 0:
            if -step <= noise_rtol * (1.0 + abs(current)):
                return current, iterates
            raise NumericError("fixed-point iteration decreased", iteration=step_index,
                               current=current, proposal=proposal)
        iterates.append(proposal)
        current = proposal
        if step <= rtol * (1.0 + abs(current)):
            return current, iterates
        if accelerate and step_index == warmup:
            root = _bracketed_fixed_point(update, current, step, iterates)
            if root is not None:
                return root, iterates
    raise NumericError("fixed-point iteration did not converge", iterations=max_iter, last=current)


def _bracketed_fixed_point(update, lower, last_step, iterates, max_doublings=60):
    """Brent's method on update(c) - c, or None when no bracket turns up."""
    previous_step = iterates[-2] - iterates[-3] if len(iterates) > 2 else last_step
    ratio = min(last_step / previous_step, 0.99) if previous_step > 0 else 0.5
    width = 2.0 * last_step / (1.0 - ratio) + 1e-12 * (1.0 + lower)

    def excess(c):
        return update(c) - c

    try:
        for _ in range(max_doublings):
            if excess(lower + width) < 0:
                return find_root(excess, lower, lower + width)
            width *= 2.0
    except (NumericError, DomainError) as error:
        logger.debug("Accelerated fixed point abandoned: %s" % error)
    return None
