"""
Truncated Poisson point processes driving the cascade.

Both intensities are infinite near zero. Atoms are drawn only on
(cutoff, inf), by thinning a Pareto envelope, and the size-sum of the
discarded atoms is replaced by its mean (the compensation mass).

* fragment PPP: rate * e^{-psi(theta) r} pi_*(dr), envelope rate * pi_*(dr)
  (Pareto index 1/alpha), acceptance e^{-psi(theta) r};
* node PPP: rate * (1 - e^{-theta r}) pi(dr), envelope
  rate * theta * r * pi(dr) (Pareto index alpha - 1), acceptance
  (1 - e^{-theta r}) / (theta r).

The envelope count of the node PPP grows like cutoff^{1 - alpha}, so the
cascade draws the node mass in aggregate instead (``sample_node_mass``): the
node measure splits into the tempered stable measure
theta r e^{-theta r / 2} pi(dr), drawn exactly through a stable variable and
rejection, plus a finite remainder of total mass
theta psi'(theta / 2) - psi(theta), drawn atom by atom.
"""
import math
import logging
import functools
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.mechanism import TiltedMechanism
from src.utils.errors import DomainError, NumericError
from src.utils.numerics import expand_bracket, find_root
from src.samplers.rng import as_generator
from src.samplers.stable import sample_positive_stable

logger = logging.getLogger(__name__)

# envelope points handled per numpy block
BLOCK_SIZE = 1 << 20
# discarded node mass allowed per unit rate when no cutoff is given
NODE_MASS_BUDGET = 1e-6
FRAGMENT_CUTOFF_FACTOR = 0.01
# envelope points a single PPP draw may handle, and per unit rate for a node cutoff
MAX_ENVELOPE_POINTS = 1e8
MAX_NODE_ENVELOPE = 1e7
# pieces of a tempered stable draw; each is accepted with probability >= 1/e
MAX_TEMPERED_PIECES = 1e7


@dataclass(frozen=True, eq=False)
class PppSample:
    """Atoms above ``cutoff`` (descending, or None when not retained) plus the
    analytic mean of the size-sum below it."""

    atoms: Optional[np.ndarray]
    count: int
    atom_sum: float
    compensation_mass: float
    cutoff: float

    @property
    def total_mass(self):
        return self.atom_sum + self.compensation_mass


def _check_inputs(rate, tilted, cutoff):
    if not rate >= 0:
        raise DomainError("rate must be nonnegative, got %r" % (rate,))
    if not cutoff > 0:
        raise DomainError("cutoff must be positive, got %r" % (cutoff,))
    if not isinstance(tilted, TiltedMechanism) or not tilted.is_stable:
        raise DomainError("the samplers support tilted stable mechanisms only")


# --- deterministic means, per unit rate ---------------------------------------

@functools.lru_cache(maxsize=1024)
def fragment_compensation(tilted, cutoff):
    """int_0^cutoff r e^{-psi(theta) r} pi_*(dr)."""
    return tilted.tilted_expectation(lambda r: r, upper=cutoff)[0]


@functools.lru_cache(maxsize=1024)
def fragment_mean_count(tilted, cutoff):
    """int_cutoff^inf e^{-psi(theta) r} pi_*(dr)."""
    return tilted.tilted_tail(cutoff)


@functools.lru_cache(maxsize=1024)
def node_compensation(tilted, cutoff):
    """int_0^cutoff r (1 - e^{-theta r}) pi(dr)."""
    theta = tilted.theta
    if theta == 0:
        return 0.0
    return tilted.base.integrate_levy(lambda r: -r * math.expm1(-theta * r), upper=cutoff)[0]


@functools.lru_cache(maxsize=1024)
def node_mean_count(tilted, cutoff):
    """int_cutoff^inf (1 - e^{-theta r}) pi(dr)."""
    theta = tilted.theta
    if theta == 0:
        return 0.0
    return tilted.base.integrate_levy(lambda r: -math.expm1(-theta * r), lower=cutoff)[0]


def node_mean_mass(tilted, lower, upper=math.inf):
    """int_lower^upper r (1 - e^{-theta r}) pi(dr)."""
    theta = tilted.theta
    return tilted.base.integrate_levy(lambda r: -r * math.expm1(-theta * r), lower=lower, upper=upper)[0]


def node_envelope_mass(tilted, cutoff):
    """Envelope points per unit rate of the node PPP: theta c r^{1 - alpha} / (alpha - 1) at the cutoff."""
    if not cutoff > 0:
        raise DomainError("cutoff must be positive, got %r" % (cutoff,))
    index = tilted.base.alpha - 1.0
    return tilted.theta * tilted.base.levy_constant * cutoff ** (-index) / index


def node_remainder_mass(tilted):
    """theta psi'(theta / 2) - psi(theta): total mass of (1 - e^{-theta r} - theta r e^{-theta r / 2}) pi(dr)."""
    base, theta = tilted.base, tilted.theta
    return theta * base.psi_prime(0.5 * theta) - base.psi(theta)


def default_fragment_cutoff(eps_grid):
    return FRAGMENT_CUTOFF_FACTOR * min(eps_grid)


@functools.lru_cache(maxsize=64)
def default_node_cutoff(tilted, budget=NODE_MASS_BUDGET):
    """Largest cutoff whose discarded node mass per unit rate stays below ``budget``."""
    if not tilted.theta > 0:
        raise DomainError("the node intensity vanishes at theta = 0; no cutoff to choose")
    if not budget > 0:
        raise DomainError("budget must be positive, got %r" % (budget,))
    alpha = tilted.base.alpha
    # 1 - e^{-theta r} <= theta r gives a cutoff whose mass is below budget
    start = ((2.0 - alpha) * budget / (tilted.theta * tilted.base.levy_constant)) ** (1.0 / (2.0 - alpha))

    def excess(log_cutoff):
        return node_compensation(tilted, math.exp(log_cutoff)) - budget

    lower = math.log(start)
    cutoff = start
    if excess(lower) < 0:
        upper = expand_bracket(excess, lower, lower + 1.0)
        cutoff = math.exp(find_root(excess, lower, upper, xtol=1e-12))
        # stay on the safe side of the budget
        while node_compensation(tilted, cutoff) > budget:
            cutoff *= 1.0 - 1e-9
    if node_envelope_mass(tilted, cutoff) > MAX_NODE_ENVELOPE:
        raise NumericError(
            "the node cutoff meeting this budget needs too many envelope points; draw node masses in aggregate",
            alpha=alpha, theta=tilted.theta, budget=budget, cutoff=cutoff,
            envelope_per_unit_rate=node_envelope_mass(tilted, cutoff),
        )
    logger.debug("Node cutoff %.6g for theta=%g, alpha=%g, budget %g" % (cutoff, tilted.theta, alpha, budget))
    return cutoff


# --- samplers -------------------------------------------------------------------

def _thinned_pareto(generator, envelope_mass, cutoff, index, accept, keep_atoms):
    """
    Poisson(envelope_mass) points r = cutoff * U^{-1/index}, each kept with
    probability ``accept(r)``. Returns (atoms or None, count, atom_sum).
    """
    if envelope_mass > MAX_ENVELOPE_POINTS:
        raise NumericError("envelope Poisson mean too large to draw atom by atom",
                           envelope_mass=envelope_mass, cutoff=cutoff, limit=MAX_ENVELOPE_POINTS)
    total = int(generator.poisson(envelope_mass)) if envelope_mass > 0 else 0
    kept, block_sums, count = [], [], 0
    remaining = total
    while remaining > 0:
        block = min(remaining, BLOCK_SIZE)
        remaining -= block
        sizes = cutoff * (1.0 - generator.random(block)) ** (-1.0 / index)
        survive = generator.random(block) < accept(sizes)
        sizes = sizes[survive & (sizes > cutoff)]
        count += sizes.size
        block_sums.append(float(np.sum(sizes)))
        if keep_atoms:
            kept.append(sizes)
    atoms = None
    if keep_atoms:
        atoms = np.sort(np.concatenate(kept))[::-1] if kept else np.empty(0)
    return atoms, count, math.fsum(block_sums)


def sample_fragment_ppp(rate, tilted, cutoff, rng, keep_atoms=True):
    """Fragments of one generation: Poisson with intensity rate * e^{-psi(theta) r} pi_*(dr)."""
    _check_inputs(rate, tilted, cutoff)
    if rate == 0:
        return PppSample(np.empty(0) if keep_atoms else None, 0, 0.0, 0.0, cutoff)
    generator = as_generator(rng)
    tilt = tilted.excursion_tilt
    envelope_mass = rate * tilted.base.pi_star_tail(cutoff)
    atoms, count, atom_sum = _thinned_pareto(
        generator, envelope_mass, cutoff, 1.0 / tilted.base.alpha,
        lambda r: np.exp(-tilt * r), keep_atoms,
    )
    return PppSample(atoms, count, atom_sum, rate * fragment_compensation(tilted, cutoff), cutoff)


def sample_node_ppp(rate, tilted, cutoff, rng, keep_atoms=False):
    """Marked nodes of one generation: Poisson with intensity rate * (1 - e^{-theta r}) pi(dr)."""
    _check_inputs(rate, tilted, cutoff)
    theta = tilted.theta
    if rate == 0 or theta == 0:
        return PppSample(np.empty(0) if keep_atoms else None, 0, 0.0, 0.0, cutoff)
    generator = as_generator(rng)
    index = tilted.base.alpha - 1.0
    envelope_mass = rate * node_envelope_mass(tilted, cutoff)
    atoms, count, atom_sum = _thinned_pareto(
        generator, envelope_mass, cutoff, index,
        lambda r: -np.expm1(-theta * r) / (theta * r), keep_atoms,
    )
    return PppSample(atoms, count, atom_sum, rate * node_compensation(tilted, cutoff), cutoff)


# --- node mass in aggregate ---------------------------------------------------

@dataclass(frozen=True)
class NodeMassSample:
    """Total node mass, split into its tempered stable and remainder parts."""

    tempered: float
    remainder: float
    remainder_count: int

    @property
    def total(self):
        return self.tempered + self.remainder


def _tempered_stable_sum(generator, time, scale, rho, tilt):
    """
    Value at ``time`` of the subordinator with Laplace exponent
    scale * ((l + tilt)^rho - tilt^rho): stable draws of exponent
    (time / m) * scale * l^rho accepted with probability e^{-tilt S}, summed
    over m pieces.
    """
    if time == 0:
        return 0.0
    pieces = max(1, math.ceil(time * scale * tilt ** rho))
    if pieces > MAX_TEMPERED_PIECES:
        raise NumericError("tempered stable draw needs too many pieces", time=time, pieces=pieces)
    piece_scale = (time * scale / pieces) ** (1.0 / rho)
    accepted, pending = [], pieces
    while pending > 0:
        draws = piece_scale * sample_positive_stable(rho, generator, size=pending)
        keep = draws[generator.random(pending) < np.exp(-tilt * draws)]
        accepted.append(math.fsum(keep))
        pending -= keep.size
    return math.fsum(accepted)


def _remainder_density_ratio(x):
    """(1 - e^{-x} - x e^{-x/2}) / min(x^3 / 24, 1), in [0, 1]."""
    y = 0.5 * x
    small = y < 1e-2
    ys = np.where(small, y, 0.0)
    # 2 e^{-y} (sinh y - y), by its series for small y
    series = 2.0 * np.exp(-ys) * ys ** 3 / 6.0 * (1.0 + ys * ys / 20.0 * (1.0 + ys * ys / 42.0))
    direct = -np.expm1(-x) - x * np.exp(-y)
    value = np.where(small, series, direct)
    return np.clip(value / (np.minimum(x, 24.0 ** (1.0 / 3.0)) ** 3 / 24.0), 0.0, 1.0)


def _remainder_atoms(generator, rate, tilted):
    """
    Atoms of the finite measure rate * (1 - e^{-theta r} - theta r e^{-theta r/2}) pi(dr),
    thinned from the envelope rate * min((theta r)^3 / 24, 1) pi(dr).
    """
    alpha, theta = tilted.base.alpha, tilted.theta
    constant = tilted.base.levy_constant
    knee = 24.0 ** (1.0 / 3.0) / theta
    below = constant * theta ** 3 / 24.0 * knee ** (3.0 - alpha) / (3.0 - alpha)
    above = constant * knee ** (-alpha) / alpha
    total = int(generator.poisson(rate * (below + above)))
    if total == 0:
        return np.empty(0)
    u = 1.0 - generator.random(total)
    sizes = np.where(
        generator.random(total) < below / (below + above),
        knee * u ** (1.0 / (3.0 - alpha)),
        knee * u ** (-1.0 / alpha),
    )
    return sizes[generator.random(total) < _remainder_density_ratio(theta * sizes)]


def sample_node_mass(rate, tilted, rng):
    """
    Total mass of the marked nodes of one generation, drawn without a cutoff:
    the sum of a Poisson process with intensity rate * (1 - e^{-theta r}) pi(dr),
    whose Laplace transform is exp(-rate * G(l)).
    """
    if not rate >= 0:
        raise DomainError("rate must be nonnegative, got %r" % (rate,))
    if not isinstance(tilted, TiltedMechanism) or not tilted.is_stable:
        raise DomainError("the samplers support tilted stable mechanisms only")
    theta = tilted.theta
    if rate == 0 or theta == 0:
        return NodeMassSample(0.0, 0.0, 0)
    generator = as_generator(rng)
    alpha = tilted.base.alpha
    # theta r e^{-theta r / 2} pi(dr) has exponent theta alpha ((l + theta/2)^{alpha-1} - (theta/2)^{alpha-1})
    tempered = _tempered_stable_sum(generator, rate, theta * alpha, alpha - 1.0, 0.5 * theta)
    atoms = _remainder_atoms(generator, rate, tilted)
    return NodeMassSample(tempered, math.fsum(atoms), int(atoms.size))
