import math
import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class FragmentStats:
    """
    Small-fragment statistics of one cascade on a grid of eps.

    ``N_eps`` counts fragments strictly larger than eps, ``M_eps`` is the mass
    of fragments at most eps plus every compensation mass. With
    ``include_root=False`` the tagged fragment is left out of both.
    """

    eps_grid: np.ndarray
    N_eps: np.ndarray
    M_eps: np.ndarray
    mass_above: np.ndarray
    R: float
    sigma: float
    include_root: bool
    root_mass: float

    def partition_error(self):
        """Largest relative gap in M_eps + (mass above eps) + (excluded root) = sigma."""
        excluded = 0.0 if self.include_root else self.root_mass
        totals = np.array([math.fsum((m, a, excluded)) for m, a in zip(self.M_eps, self.mass_above)])
        return float(np.max(np.abs(totals - self.sigma)) / self.sigma)

    def is_monotone(self):
        return bool(np.all(np.diff(self.N_eps) <= 0) and np.all(np.diff(self.M_eps) >= 0))


def fragment_statistics(rec, eps_grid, include_root=True):
    """N^eps and M^eps of a cascade record on ``eps_grid``."""
    eps = rec.params.check_grid(eps_grid)
    sizes = np.sort(rec.all_fragment_sizes(include_root=include_root))
    compensation = rec.fragment_compensation_total

    below = np.searchsorted(sizes, eps, side="right")
    N_eps = (sizes.size - below).astype(np.int64)
    M_eps = np.array([math.fsum(np.append(sizes[:i], compensation)) for i in below])
    mass_above = np.array([math.fsum(sizes[i:]) for i in below])
    return FragmentStats(
        eps_grid=eps,
        N_eps=N_eps,
        M_eps=M_eps,
        mass_above=mass_above,
        R=rec.R_total,
        sigma=rec.sigma,
        include_root=include_root,
        root_mass=rec.params.s0,
    )
