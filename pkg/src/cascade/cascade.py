"""
Generation-by-generation simulation of the fragmentation at nodes, started
from a tagged fragment of size s0.

Generation 0 is the tagged fragment alone (R_0 = 0, L_0 = s0). For k >= 1
the marked nodes hanging off generation k-1 form a Poisson process of
intensity L_{k-1} (1 - e^{-theta r}) pi(dr); their total mass is R_k. The
fragments of generation k then form a Poisson process of intensity
R_k e^{-psi(theta) r} pi_*(dr); their total mass is L_k.

With no node cutoff the node mass R_k is drawn in aggregate and no node
atoms are kept; with a cutoff the nodes above it are drawn one by one and
the mass below it enters through its mean.
"""
import math
import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from src.mechanism import StableMechanism, TiltedMechanism
from src.samplers import PppSample, sample_fragment_ppp, sample_node_ppp, sample_node_mass, node_envelope_mass
from src.samplers.ppp import MAX_NODE_ENVELOPE
from src.utils.errors import DomainError

logger = logging.getLogger(__name__)

DEFAULT_K_MAX = 60
DEFAULT_MASS_TOLERANCE = 1e-10


@dataclass(frozen=True)
class CascadeParams:
    alpha: float
    theta: float
    s0: float = 1.0
    fragment_cutoff: float = 1e-6
    node_cutoff: Optional[float] = None
    k_max: int = DEFAULT_K_MAX
    mass_tolerance: Optional[float] = None
    keep_node_atoms: bool = False

    def __post_init__(self):
        if not 1.0 < self.alpha < 2.0:
            raise DomainError("alpha must lie in (1, 2), got %r" % (self.alpha,))
        if not self.theta > 0:
            raise DomainError("theta must be positive, got %r" % (self.theta,))
        if not self.s0 > 0:
            raise DomainError("s0 must be positive, got %r" % (self.s0,))
        if not self.fragment_cutoff > 0:
            raise DomainError("fragment_cutoff must be positive, got %r" % (self.fragment_cutoff,))
        if isinstance(self.k_max, bool) or not isinstance(self.k_max, (int, np.integer)) or self.k_max < 1:
            raise DomainError("k_max must be a positive integer, got %r" % (self.k_max,))
        if self.mass_tolerance is None:
            object.__setattr__(self, "mass_tolerance", DEFAULT_MASS_TOLERANCE * self.s0)
        if not 0 <= self.mass_tolerance < self.s0:
            raise DomainError("mass_tolerance must lie in [0, s0), got %r" % (self.mass_tolerance,))
        if self.node_cutoff is None:
            if self.keep_node_atoms:
                raise DomainError("keep_node_atoms needs a node_cutoff")
            return
        if not self.node_cutoff > 0:
            raise DomainError("node_cutoff must be positive, got %r" % (self.node_cutoff,))
        envelope = node_envelope_mass(self.tilted, self.node_cutoff)
        if envelope > MAX_NODE_ENVELOPE:
            raise DomainError(
                "node_cutoff %g needs %.3g envelope points per unit mass at alpha=%g (limit %g); "
                "raise it or leave it unset" % (self.node_cutoff, envelope, self.alpha, MAX_NODE_ENVELOPE)
            )

    @property
    def mechanism(self):
        return StableMechanism(self.alpha)

    @property
    def tilted(self):
        return TiltedMechanism(self.mechanism, self.theta)

    def check_grid(self, eps_grid):
        """Raise unless ``eps_grid`` is ascending, positive and above the fragment cutoff."""
        eps = np.asarray(eps_grid, dtype=float)
        if eps.ndim != 1 or eps.size == 0:
            raise DomainError("eps_grid must be a nonempty 1-d sequence")
        if np.any(np.diff(eps) <= 0):
            raise DomainError("eps_grid must be strictly ascending")
        if not eps[0] > self.fragment_cutoff:
            raise DomainError(
                "smallest eps %g is not above the fragment cutoff %g; compensated mass "
                "cannot be split across eps" % (eps[0], self.fragment_cutoff)
            )
        return eps


@dataclass(eq=False)
class GenerationRecord:
    k: int
    R_k: float
    node_count: int
    fragment_sizes: np.ndarray
    L_k: float
    fragment_compensation: float
    node_compensation: float = 0.0
    node_atoms: Optional[np.ndarray] = None

    @property
    def fragment_count(self):
        return int(self.fragment_sizes.size)


@dataclass(eq=False)
class CascadeRecord:
    params: CascadeParams
    generations: List[GenerationRecord] = field(default_factory=list)
    sigma: float = 0.0
    R_total: float = 0.0
    truncated_at_kmax: bool = False
    residual_mass: float = 0.0

    @property
    def fragment_compensation_total(self):
        return math.fsum(g.fragment_compensation for g in self.generations)

    @property
    def node_compensation_total(self):
        return math.fsum(g.node_compensation for g in self.generations)

    @property
    def generation_count(self):
        """Number of generations simulated after the tagged fragment."""
        return len(self.generations) - 1

    def L(self, k):
        return self.generations[k].L_k if k < len(self.generations) else 0.0

    def R(self, k):
        return self.generations[k].R_k if k < len(self.generations) else 0.0

    def all_fragment_sizes(self, include_root=True):
        start = 0 if include_root else 1
        parts = [g.fragment_sizes for g in self.generations[start:]]
        return np.concatenate(parts) if parts else np.empty(0)


def _draw_nodes(mass, tilted, params, rng):
    if params.node_cutoff is not None:
        return sample_node_ppp(mass, tilted, params.node_cutoff, rng, keep_atoms=params.keep_node_atoms)
    total = sample_node_mass(mass, tilted, rng).total
    return PppSample(None, 0, total, 0.0, 0.0)


def simulate_cascade(params, rng):
    """
    Run the cascade until L_k drops below ``mass_tolerance`` or ``k_max``
    generations have been drawn.
    """
    tilted = params.tilted
    root = GenerationRecord(
        k=0, R_k=0.0, node_count=0, fragment_sizes=np.array([params.s0]),
        L_k=params.s0, fragment_compensation=0.0,
    )
    generations = [root]
    previous_mass = params.s0

    for k in range(1, params.k_max + 1):
        nodes = _draw_nodes(previous_mass, tilted, params, rng)
        R_k = nodes.atom_sum + nodes.compensation_mass
        fragments = sample_fragment_ppp(R_k, tilted, params.fragment_cutoff, rng)
        L_k = math.fsum(fragments.atoms) + fragments.compensation_mass
        generations.append(GenerationRecord(
            k=k,
            R_k=R_k,
            node_count=nodes.count,
            fragment_sizes=fragments.atoms,
            L_k=L_k,
            fragment_compensation=fragments.compensation_mass,
            node_compensation=nodes.compensation_mass,
            node_atoms=nodes.atoms,
        ))
        previous_mass = L_k
        if L_k < params.mass_tolerance:
            break

    truncated = previous_mass >= params.mass_tolerance
    if truncated:
        logger.debug("Cascade hit k_max=%i with L=%.3g still above tolerance" % (params.k_max, previous_mass))
    return CascadeRecord(
        params=params,
        generations=generations,
        sigma=math.fsum(g.L_k for g in generations),
        R_total=math.fsum(g.R_k for g in generations),
        truncated_at_kmax=truncated,
        residual_mass=previous_mass,
    )
