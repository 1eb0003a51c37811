"""
Small-fragment functionals of the stable dislocation measure and their Monte
Carlo counterparts.

The dislocation integrals reduce to expectations of explicit functions of the
terminal value S of a stable subordinator with Laplace exponent l^{1/alpha}:

    f_b(eps)   = C E[phi(eps S / (1 - eps))]
    phi_b(eps) = C E[S pi_bar_*(eps S / (1 - eps))] - f_b(eps)
    g_b(eps)   sandwiched by E[phi(eps S / (1 - 2 eps))^2 / S] and
               (1 - eps) / (1 + 2 eps) E[phi(eps S / (1 - eps))^2 / S]

with C = alpha (alpha - 1) Gamma(1 - 1/alpha) / Gamma(2 - alpha). The g
bounds and c_alpha are quoted without the factor C.
"""
import logging
import multiprocessing
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma
from tqdm import tqdm

from src.samplers import RngStream, stream_id, sample_positive_stable
from src.utils.errors import DomainError
from src.utils.numerics import mean_stderr
from src.utils.utils import chunk_ranges

logger = logging.getLogger(__name__)

# draws per stream; fixed so results do not depend on the worker count
DRAW_CHUNK = 1 << 16


@dataclass(frozen=True)
class BertoinClosedForms:
    f_b: float
    phi_b: float
    g_b_asymptotic: float
    c_alpha: float


@dataclass(frozen=True)
class BertoinEstimates:
    f_hat: float
    f_stderr: float
    phi_hat: float
    phi_stderr: float
    g_lower: float
    g_lower_stderr: float
    g_upper: float
    g_upper_stderr: float
    g_diagonal: float
    g_diagonal_stderr: float
    n: int


def _check(alpha, eps):
    if not 1.0 < alpha < 2.0:
        raise DomainError("alpha must lie in (1, 2), got %r" % (alpha,))
    if not 0.0 < eps < 1.0:
        raise DomainError("eps must lie in (0, 1), got %r" % (eps,))


def dislocation_constant(alpha):
    """C = alpha (alpha - 1) Gamma(1 - 1/alpha) / Gamma(2 - alpha)."""
    return alpha * (alpha - 1.0) * gamma(1.0 - 1.0 / alpha) / gamma(2.0 - alpha)


def c_alpha(alpha):
    return gamma(3.0 - alpha) / ((alpha - 1.0) ** 2 * gamma(2.0 / alpha) * gamma(1.0 - 1.0 / alpha) ** 2)


def bertoin_closed_forms(alpha, eps):
    _check(alpha, eps)
    odds = eps / (1.0 - eps)
    f_b = odds ** (1.0 - 1.0 / alpha) / gamma(1.0 + 1.0 / alpha)
    phi_b = (alpha - 1.0) / gamma(1.0 + 1.0 / alpha) * odds ** (-1.0 / alpha) - f_b
    constant = c_alpha(alpha)
    return BertoinClosedForms(f_b, phi_b, constant * eps ** (2.0 - 2.0 / alpha), constant)


def stable_fractional_moment(alpha, b):
    """E[S^b] = Gamma(1 - alpha b) / Gamma(1 - b) for b < 1/alpha (S has Laplace exponent l^{1/alpha})."""
    if not 1.0 < alpha < 2.0:
        raise DomainError("alpha must lie in (1, 2), got %r" % (alpha,))
    if not b < 1.0 / alpha:
        raise DomainError("moment of order %r is infinite for alpha=%r (needs b < 1/alpha)" % (b, alpha))
    return gamma(1.0 - alpha * b) / gamma(1.0 - b)


def _bertoin_integrands(alpha, eps, draws):
    """Per-draw values of the five estimators (f and phi include C, g terms do not)."""
    small = 1.0 / ((alpha - 1.0) * gamma(1.0 - 1.0 / alpha))
    tail = 1.0 / gamma(1.0 - 1.0 / alpha)
    C = dislocation_constant(alpha)

    u = eps * draws / (1.0 - eps)
    phi_u = small * u ** (1.0 - 1.0 / alpha)
    if eps < 0.5:
        phi_u2 = small * (eps * draws / (1.0 - 2.0 * eps)) ** (1.0 - 1.0 / alpha)
    else:
        # the upper sandwich term needs eps < 1/2
        phi_u2 = np.full_like(draws, np.nan)
    diagonal = u ** (2.0 - 1.0 / alpha) / ((2.0 * alpha - 1.0) * gamma(1.0 - 1.0 / alpha))
    return {
        "f": C * phi_u,
        "phi": C * (draws * tail * u ** (-1.0 / alpha) - phi_u),
        "g_upper": phi_u2 ** 2 / draws,
        "g_lower": (1.0 - eps) / (1.0 + 2.0 * eps) * phi_u ** 2 / draws,
        "g_diagonal": diagonal / draws,
    }


def _stable_chunk(args):
    alpha, seed, cell, index, size = args
    rng = RngStream(seed, stream_id(cell, index))
    return sample_positive_stable(1.0 / alpha, rng, size=size)


def stable_draws(alpha, n, seed, cell=0, threads=1, chunk_size=DRAW_CHUNK):
    """``n`` draws of S (Laplace exponent l^{1/alpha}); chunk ``j`` uses stream (cell, j)."""
    if n < 1:
        raise DomainError("draw count must be at least 1, got %r" % (n,))
    jobs = [(alpha, seed, cell, j, stop - start) for j, (start, stop) in enumerate(chunk_ranges(n, chunk_size))]
    if threads <= 1:
        parts = [_stable_chunk(job) for job in tqdm(jobs, desc="stable draws", disable=len(jobs) < 2)]
    else:
        with multiprocessing.Pool(threads) as executor:
            parts = list(tqdm(executor.imap(_stable_chunk, jobs), total=len(jobs), desc="stable draws"))
    return np.concatenate(parts)


def bertoin_mc(alpha, eps, n, seed, cell=0, threads=1):
    """Monte Carlo estimates of f_b, phi_b and the g_b sandwich, with standard errors."""
    _check(alpha, eps)
    logger.debug("Dislocation estimators at alpha=%g, eps=%g on %i draws" % (alpha, eps, n))
    draws = stable_draws(alpha, n, seed, cell=cell, threads=threads)
    values = _bertoin_integrands(alpha, eps, draws)
    f_hat, f_se = mean_stderr(values["f"])
    phi_hat, phi_se = mean_stderr(values["phi"])
    lower, lower_se = mean_stderr(values["g_lower"])
    upper, upper_se = mean_stderr(values["g_upper"])
    diagonal, diagonal_se = mean_stderr(values["g_diagonal"])
    return BertoinEstimates(
        f_hat=f_hat, f_stderr=f_se,
        phi_hat=phi_hat, phi_stderr=phi_se,
        g_lower=lower, g_lower_stderr=lower_se,
        g_upper=upper, g_upper_stderr=upper_se,
        g_diagonal=diagonal, g_diagonal_stderr=diagonal_se,
        n=int(draws.size),
    )


def g_ratio_limit(alpha):
    """Limit of g_b / f_b^2 as eps -> 0: c_alpha Gamma(1 + 1/alpha)^2."""
    return c_alpha(alpha) * gamma(1.0 + 1.0 / alpha) ** 2


def fractional_moment_mc(alpha, b, n, seed, cell=0, threads=1):
    """Mean and s.e. of S^b over ``n`` draws."""
    draws = stable_draws(alpha, n, seed, cell=cell, threads=threads)
    return mean_stderr(draws ** b)
