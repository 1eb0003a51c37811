import numpy as np

from src.utils.errors import DomainError
from src.samplers.rng import as_generator


def sample_positive_stable(rho, rng, size=None):
    """
    Draw S > 0 with E[exp(-l S)] = exp(-l^rho), 0 < rho < 1.

    Kanter's representation S = (A(U) / E)^{(1-rho)/rho}, with U uniform on
    (0, pi], E standard exponential and
    A(u) = [sin(rho u)^rho sin((1-rho) u)^(1-rho) / sin(u)]^(1/(1-rho)),
    evaluated in log space.
    """
    if not 0.0 < rho < 1.0:
        raise DomainError("rho must lie in (0, 1), got %r" % (rho,))
    generator = as_generator(rng)
    u = np.pi * (1.0 - generator.random(size))
    e = generator.standard_exponential(size)
    log_a = (
        rho * np.log(np.sin(rho * u))
        + (1.0 - rho) * np.log(np.sin((1.0 - rho) * u))
        - np.log(np.sin(u))
    ) / (1.0 - rho)
    draws = np.exp((1.0 - rho) / rho * (log_a - np.log(e)))
    if size is None:
        return float(draws)
    return draws
