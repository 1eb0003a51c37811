"""
Independent cascade replicates and their weighted reductions.

Replicate ``i`` of grid cell ``cell`` always uses
``RngStream(base_seed, stream_id(cell, i))``, and every reduction goes through
``math.fsum``. Worker count and scheduling therefore never change a number.
"""
import math
import logging
import multiprocessing
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pandas as pd
from scipy.special import gamma
from tqdm import tqdm

from src.cascade.cascade import simulate_cascade
from src.cascade.statistics import fragment_statistics
from src.samplers import RngStream, stream_id
from src.utils.errors import DomainError
from src.utils.numerics import mean_stderr
from src.utils.utils import chunk_ranges

logger = logging.getLogger(__name__)

CHUNK_SIZE = 64
# generations whose mass is recorded per replicate (L_1..L_3)
TRACKED_GENERATIONS = 3


@dataclass(eq=False)
class ReplicateSet:
    """Per-replicate observations, one row per replicate (rows in stream order)."""

    params: object
    eps_grid: np.ndarray
    base_seed: int
    cell: int
    cal_N: np.ndarray        # root excluded, shape (n, len(eps))
    cal_M: np.ndarray
    N: np.ndarray            # root included
    M: np.ndarray
    R: np.ndarray
    sigma: np.ndarray
    R_first: np.ndarray
    L: np.ndarray            # shape (n, TRACKED_GENERATIONS)
    generations: np.ndarray
    truncated: np.ndarray
    residual_mass: np.ndarray
    fragment_compensation: np.ndarray
    node_compensation: np.ndarray
    partition_error: np.ndarray
    monotone: np.ndarray

    @property
    def n(self):
        return int(self.R.size)

    @property
    def stream_start(self):
        return stream_id(self.cell, 0)

    @property
    def stream_stop(self):
        return stream_id(self.cell, 0) + self.n

    def weights(self, beta):
        return np.exp(-beta * self.sigma)


def _observe(record, eps_grid):
    excluded = fragment_statistics(record, eps_grid, include_root=False)
    included = fragment_statistics(record, eps_grid, include_root=True)
    return {
        "cal_N": excluded.N_eps,
        "cal_M": excluded.M_eps,
        "N": included.N_eps,
        "M": included.M_eps,
        "R": record.R_total,
        "sigma": record.sigma,
        "R_first": record.R(1),
        "L": [record.L(k) for k in range(1, TRACKED_GENERATIONS + 1)],
        "generations": record.generation_count,
        "truncated": record.truncated_at_kmax,
        "residual_mass": record.residual_mass,
        "fragment_compensation": record.fragment_compensation_total,
        "node_compensation": record.node_compensation_total,
        "partition_error": max(excluded.partition_error(), included.partition_error()),
        "monotone": excluded.is_monotone() and included.is_monotone(),
    }


def _simulate_chunk(params, eps_grid, base_seed, cell, start, stop):
    rows = []
    for index in range(start, stop):
        rng = RngStream(base_seed, stream_id(cell, index))
        rows.append(_observe(simulate_cascade(params, rng), eps_grid))
    return rows


def _simulate_chunk_star(args):
    return _simulate_chunk(*args)


def simulate_replicates(params, eps_grid, n, base_seed, cell=0, threads=1, chunk_size=CHUNK_SIZE):
    """Simulate ``n`` cascades and keep their compact observations."""
    if n < 1:
        raise DomainError("replicate count must be at least 1, got %r" % (n,))
    eps = params.check_grid(eps_grid)
    jobs = [(params, eps, base_seed, cell, start, stop) for start, stop in chunk_ranges(n, chunk_size)]
    logger.debug("Simulating %i cascades in %i chunks on %i worker(s)" % (n, len(jobs), threads))

    rows = []
    if threads <= 1:
        for job in tqdm(jobs, desc="cascades", disable=len(jobs) < 2):
            rows.extend(_simulate_chunk_star(job))
    else:
        with multiprocessing.Pool(threads) as executor:
            # imap keeps submission order whatever the completion order
            for result in tqdm(executor.imap(_simulate_chunk_star, jobs), total=len(jobs), desc="cascades"):
                rows.extend(result)

    def column(key, dtype=float):
        return np.array([row[key] for row in rows], dtype=dtype)

    return ReplicateSet(
        params=params,
        eps_grid=eps,
        base_seed=base_seed,
        cell=cell,
        cal_N=column("cal_N", np.int64),
        cal_M=column("cal_M"),
        N=column("N", np.int64),
        M=column("M"),
        R=column("R"),
        sigma=column("sigma"),
        R_first=column("R_first"),
        L=column("L"),
        generations=column("generations", np.int64),
        truncated=column("truncated", bool),
        residual_mass=column("residual_mass"),
        fragment_compensation=column("fragment_compensation"),
        node_compensation=column("node_compensation"),
        partition_error=column("partition_error"),
        monotone=column("monotone", bool),
    )


# --- reductions -----------------------------------------------------------------

def linear_form(rs, x, y, gamma_, eps_index):
    """x * calN^eps + y * calM^eps + gamma * R, per replicate."""
    return x * rs.cal_N[:, eps_index] + y * rs.cal_M[:, eps_index] + gamma_ * rs.R


def laplace_mean(rs, x, y, gamma_, beta, eps_index):
    """Mean and s.e. of exp(-(x calN + y calM + gamma R + beta sigma))."""
    return mean_stderr(np.exp(-(linear_form(rs, x, y, gamma_, eps_index) + beta * rs.sigma)))


def weighted_moment(rs, x, y, gamma_, beta, eps_index, power):
    """Mean and s.e. of (x calN + y calM + gamma R)^power e^{-beta sigma}."""
    return mean_stderr(linear_form(rs, x, y, gamma_, eps_index) ** power * rs.weights(beta))


def normalised_errors(rs, lambda_N=1.0, lambda_M=0.0):
    """
    lambda_N calN/pi_bar_*(eps) + lambda_M calM/phi(eps) - (lambda_N + lambda_M) R,
    per replicate and eps.
    """
    mechanism = rs.params.mechanism
    tail = np.array([mechanism.pi_star_tail(e) for e in rs.eps_grid])
    small = np.array([mechanism.phi_small_mass(e) for e in rs.eps_grid])
    return lambda_N * rs.cal_N / tail + lambda_M * rs.cal_M / small - (lambda_N + lambda_M) * rs.R[:, None]


def weighted_discrepancy(rs, beta, lambda_N=1.0, lambda_M=0.0):
    """Per eps, mean and s.e. of (normalised error)^2 e^{-beta sigma}."""
    values = normalised_errors(rs, lambda_N, lambda_M) ** 2 * rs.weights(beta)[:, None]
    return [mean_stderr(values[:, j]) for j in range(values.shape[1])]


def point_estimate_errors(rs):
    """
    Pooled relative errors of the stable-case point estimates of R,
    Gamma(1-1/alpha) eps^{1/alpha} N^eps and
    (alpha-1) Gamma(1-1/alpha) M^eps / eps^{1-1/alpha}.
    """
    alpha = rs.params.alpha
    scale = gamma(1.0 - 1.0 / alpha)
    total = math.fsum(rs.R)
    count_errors, mass_errors = [], []
    for j, eps in enumerate(rs.eps_grid):
        count_estimate = scale * eps ** (1.0 / alpha) * rs.N[:, j]
        mass_estimate = (alpha - 1.0) * scale * rs.M[:, j] / eps ** (1.0 - 1.0 / alpha)
        count_errors.append(math.fsum(np.abs(count_estimate - rs.R)) / total)
        mass_errors.append(math.fsum(np.abs(mass_estimate - rs.R)) / total)
    return np.array(count_errors), np.array(mass_errors)


def summary_table(rs, beta, lambda_N=1.0, lambda_M=1.0):
    """One row per eps with the ratio means, D_N, D_M, the combined D and point-estimate errors."""
    mechanism = rs.params.mechanism
    d_N = weighted_discrepancy(rs, beta, 1.0, 0.0)
    d_M = weighted_discrepancy(rs, beta, 0.0, 1.0)
    d_mix = weighted_discrepancy(rs, beta, lambda_N, lambda_M)
    count_errors, mass_errors = point_estimate_errors(rs)
    R_mean, R_se = mean_stderr(rs.R)
    rows = []
    for j, eps in enumerate(rs.eps_grid):
        tail, small = mechanism.pi_star_tail(eps), mechanism.phi_small_mass(eps)
        n_mean, n_se = mean_stderr(rs.cal_N[:, j] / tail)
        m_mean, m_se = mean_stderr(rs.cal_M[:, j] / small)
        rows.append({
            "eps": eps,
            "N_ratio_mean": n_mean,
            "N_ratio_stderr": n_se,
            "M_ratio_mean": m_mean,
            "M_ratio_stderr": m_se,
            "R_mean": R_mean,
            "R_stderr": R_se,
            "D_N": d_N[j][0],
            "D_N_stderr": d_N[j][1],
            "D_M": d_M[j][0],
            "D_M_stderr": d_M[j][1],
            "D_mix": d_mix[j][0],
            "D_mix_stderr": d_mix[j][1],
            "rate_bound": 1.0 / tail + eps / small,
            "count_estimate_relerr": count_errors[j],
            "mass_estimate_relerr": mass_errors[j],
        })
    return pd.DataFrame(rows)


def laplace_table(rs, beta, laplace_args: Sequence):
    rows = []
    for j, eps in enumerate(rs.eps_grid):
        for x, y, gamma_ in laplace_args:
            mean, se = laplace_mean(rs, x, y, gamma_, beta, j)
            rows.append({"eps": eps, "x": x, "y": y, "gamma": gamma_, "beta": beta,
                         "laplace_mean": mean, "laplace_stderr": se})
    return pd.DataFrame(rows)


@dataclass(eq=False)
class ReplicateSummary:
    replicates: ReplicateSet
    by_eps: pd.DataFrame
    laplace: pd.DataFrame
    truncated_fraction: float


def run_replicates(params, eps_grid, beta, n, base_seed, laplace_args=((0.0, 0.0, 0.0),),
                   cell=0, threads=1, lambda_N=1.0, lambda_M=1.0):
    """Simulate ``n`` cascades and reduce them to the weighted summary tables."""
    if not beta >= 0:
        raise DomainError("beta must be nonnegative, got %r" % (beta,))
    rs = simulate_replicates(params, eps_grid, n, base_seed, cell=cell, threads=threads)
    truncated_fraction = float(np.count_nonzero(rs.truncated)) / rs.n
    if truncated_fraction > 0.01:
        logger.warning("%.2f%% of cascades hit k_max=%i" % (100 * truncated_fraction, params.k_max))
    return ReplicateSummary(
        replicates=rs,
        by_eps=summary_table(rs, beta, lambda_N, lambda_M),
        laplace=laplace_table(rs, beta, laplace_args),
        truncated_fraction=truncated_fraction,
    )
