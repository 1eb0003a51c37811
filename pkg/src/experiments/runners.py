"""
One runner per experiment kind. Each takes a validated ``ExperimentConfig``
and returns a pandas DataFrame; every row carries the base seed and the
half-open range of stream ids that produced it.
"""
import math
import itertools
import logging

import numpy as np
import pandas as pd
from scipy import stats
from scipy.special import gamma

from src.analytics import (
    LaplaceArgs,
    solve_fixed_point,
    conditional_laplace,
    second_moment,
    moment_denominator,
    first_moment,
    unconditional_second_moment,
    solve_R_law_root,
    bertoin_closed_forms,
    bertoin_mc,
    g_ratio_limit,
    stable_draws,
    stable_fractional_moment,
)
from src.cascade import (
    run_replicates,
    simulate_replicates,
    laplace_mean,
    weighted_moment,
)
from src.samplers import (
    RngStream,
    stream_id,
    sample_fragment_ppp,
    sample_node_ppp,
    sample_node_mass,
    fragment_mean_count,
    node_mean_count,
    node_mean_mass,
    node_remainder_mass,
)
from src.analytics.bertoin import DRAW_CHUNK
from src.utils.decorators import timing_decorator
from src.utils.errors import FraglabError
from src.utils.numerics import mean_stderr, z_score

logger = logging.getLogger(__name__)

CHECK_COLUMNS = ["check", "alpha", "theta", "param", "estimate", "stderr", "oracle", "z", "flag", "error"]
STAMP_COLUMNS = ["seed", "stream_start", "stream_stop"]


def _stamp(frame, seed, start, stop):
    frame["seed"] = seed
    frame["stream_start"] = start
    frame["stream_stop"] = stop
    return frame


def _check_row(check, alpha, theta, param, estimate, stderr, oracle, z_flag, error=""):
    z = z_score(estimate, oracle, stderr) if np.isfinite(oracle) and np.isfinite(stderr) else np.nan
    return {
        "check": check, "alpha": alpha, "theta": theta, "param": param,
        "estimate": estimate, "stderr": stderr, "oracle": oracle, "z": z,
        "flag": bool(np.isfinite(z) and abs(z) > z_flag), "error": error,
    }


def _error_row(check, alpha, theta, param, error):
    logger.warning("%s at param=%r failed: %s" % (check, param, error))
    return {"check": check, "alpha": alpha, "theta": theta, "param": param,
            "estimate": np.nan, "stderr": np.nan, "oracle": np.nan, "z": np.nan,
            "flag": True, "error": str(error)}


def _slope(eps, values):
    values = np.asarray(values, dtype=float)
    if np.any(~np.isfinite(values)) or np.any(values <= 0):
        return np.nan, np.nan
    fit = stats.linregress(np.log(eps), np.log(values))
    return fit.slope, fit.stderr


@timing_decorator
def run_convergence(config):
    """D_N, D_M and the combined discrepancy per eps, with log-log slopes."""
    params = config.cascade_params()
    summary = run_replicates(params, config.eps_grid, config.beta, config.n, config.seed, threads=config.threads,
                             lambda_N=config.lambda_N, lambda_M=config.lambda_M)
    table = summary.by_eps
    eps = table["eps"].to_numpy()
    for name, column in (("N", "D_N"), ("M", "D_M"), ("mix", "D_mix")):
        slope, stderr = _slope(eps, table[column])
        table["slope_%s" % name] = slope
        table["slope_%s_stderr" % name] = stderr
    table["expected_slope"] = 1.0 / config.alpha
    table["truncated_fraction"] = summary.truncated_fraction
    table["n"] = config.n
    logger.info("Slopes: D_N %.3f (%.3f), D_M %.3f (%.3f), expected %.3f" % (
        table["slope_N"].iloc[0], table["slope_N_stderr"].iloc[0],
        table["slope_M"].iloc[0], table["slope_M_stderr"].iloc[0], 1.0 / config.alpha))
    rs = summary.replicates
    return _stamp(table, config.seed, rs.stream_start, rs.stream_stop)


@timing_decorator
def run_laplace_xval(config):
    """Monte Carlo Laplace functional against exp(-(beta + c') s0) on the (x, y, gamma) grid."""
    params = config.cascade_params()
    rs = simulate_replicates(params, [config.laplace_eps], config.n, config.seed, threads=config.threads)
    t = config.tilted
    rows = []
    for x, y, gamma_ in itertools.product(config.x_grid, config.y_grid, config.gamma_grid):
        row = {"x": x, "y": y, "gamma": gamma_, "beta": config.beta, "eps": config.laplace_eps}
        mc_mean, mc_se = laplace_mean(rs, x, y, gamma_, config.beta, 0)
        row.update({"mc_mean": mc_mean, "mc_stderr": mc_se})
        try:
            args = LaplaceArgs(x, y, gamma_, config.beta, config.laplace_eps)
            fixed_point = solve_fixed_point(t, args)
            oracle = conditional_laplace(t, args, config.s0, fixed_point)
            row.update({"c_prime": fixed_point.c_prime, "iterations": fixed_point.iterations,
                        "residual": fixed_point.residual, "oracle": oracle,
                        "z": z_score(mc_mean, oracle, mc_se), "error": ""})
        except FraglabError as error:
            logger.warning("Cell (x=%g, y=%g, gamma=%g) failed: %s" % (x, y, gamma_, error))
            row.update({"oracle": np.nan, "z": np.nan, "error": str(error)})
        else:
            if config.beta > 0:
                try:
                    _, second = second_moment(t, args, config.s0)
                except FraglabError as error:
                    logger.warning("Second moment at (x=%g, y=%g, gamma=%g) failed: %s" % (x, y, gamma_, error))
                    row["error"] = str(error)
                else:
                    m2, m2_se = weighted_moment(rs, x, y, gamma_, config.beta, 0, 2)
                    row.update({"second_moment_oracle": second, "second_moment_mc": m2,
                                "second_moment_stderr": m2_se, "second_moment_z": z_score(m2, second, m2_se)})
        row["flag"] = bool(not np.isfinite(row["z"]) or abs(row["z"]) > config.z_flag)
        rows.append(row)
    columns = ["x", "y", "gamma", "beta", "eps", "mc_mean", "mc_stderr", "oracle", "z", "flag", "c_prime",
               "iterations", "residual", "second_moment_oracle", "second_moment_mc", "second_moment_stderr",
               "second_moment_z", "error"]
    table = pd.DataFrame(rows).reindex(columns=columns)
    flagged = int(table["flag"].sum())
    logger.info("%i of %i cells outside |z| <= %g" % (flagged, len(table), config.z_flag))
    return _stamp(table, config.seed, rs.stream_start, rs.stream_stop)


@timing_decorator
def run_second_moment(config):
    """First and second weighted moments of x calN + y calM + gamma R against the expansion."""
    params = config.cascade_params()
    rs = simulate_replicates(params, [config.moment_eps], config.n, config.seed, threads=config.threads)
    t = config.tilted
    args = LaplaceArgs(config.moment_x, config.moment_y, config.moment_gamma, config.beta, config.moment_eps)
    s0 = config.s0
    coeffs, second = second_moment(t, args, s0)
    first = first_moment(t, args, s0, coeffs)
    try:
        laplace = conditional_laplace(t, args, s0)
    except FraglabError as error:
        logger.warning("Laplace oracle at the moment point failed: %s" % error)
        laplace = np.nan

    h = coeffs.h_beta
    n_sigma = t.tilted_expectation(lambda r: math.exp(-h * r) * r)[0]
    extra = {
        "h_beta": coeffs.h_beta, "c0": coeffs.c0, "c1": coeffs.c1, "c2": coeffs.c2,
        "a0": coeffs.a0, "a1": coeffs.a1, "a2": coeffs.a2,
        "denominator_quadrature": 1.0 - t.big_G_prime(coeffs.a0) * n_sigma,
        "denominator_closed_form": moment_denominator(t, config.beta),
        "unconditional_second_moment": unconditional_second_moment(t, args, coeffs),
    }
    x, y, g = args.x, args.y, args.gamma
    rows = []
    for check, (estimate, stderr), oracle in (
        ("second_moment", weighted_moment(rs, x, y, g, config.beta, 0, 2), second),
        ("first_moment", weighted_moment(rs, x, y, g, config.beta, 0, 1), first),
        ("laplace", laplace_mean(rs, x, y, g, config.beta, 0), laplace),
    ):
        row = _check_row(check, config.alpha, config.theta, config.moment_eps, estimate, stderr, oracle, config.z_flag)
        row.update(extra)
        rows.append(row)
    table = pd.DataFrame(rows)
    return _stamp(table, config.seed, rs.stream_start, rs.stream_stop)


@timing_decorator
def run_r_law(config):
    """Root of the R-law equation by bisection and by the composition route on the (beta, gamma) grid."""
    t = config.tilted
    rows = []
    for beta, gamma_ in itertools.product(config.r_beta_grid, config.r_gamma_grid):
        row = {"alpha": config.alpha, "theta": config.theta, "beta": beta, "gamma": gamma_}
        try:
            root = solve_R_law_root(t, beta, gamma_)
            row.update({"v_bisection": root.v, "v_composition": root.alternate_v,
                        "route_gap": root.route_gap, "residual": root.residual, "error": ""})
        except FraglabError as error:
            logger.warning("R-law cell (beta=%g, gamma=%g) failed: %s" % (beta, gamma_, error))
            row.update({"v_bisection": np.nan, "v_composition": np.nan, "route_gap": np.nan,
                        "residual": np.nan, "error": str(error)})
        row["v_gamma_zero"] = beta ** (1.0 / config.alpha) if gamma_ == 0 else np.nan
        rows.append(row)
    table = pd.DataFrame(rows)
    return _stamp(table, config.seed, 0, 0)


@timing_decorator
def run_bertoin(config):
    """Dislocation functionals f_b, phi_b and the g_b sandwich on the (alpha, eps) grid."""
    rows = []
    cells = list(itertools.product(config.alpha_grid, config.bertoin_eps))
    chunks = -(-config.draws // DRAW_CHUNK)
    for cell, (alpha, eps) in enumerate(cells):
        start, stop = stream_id(cell, 0), stream_id(cell, 0) + chunks
        try:
            closed = bertoin_closed_forms(alpha, eps)
            mc = bertoin_mc(alpha, eps, config.draws, config.seed, cell=cell, threads=config.threads)
        except FraglabError as error:
            row = _error_row("bertoin", alpha, config.theta, eps, error)
            rows.append(dict(row, seed=config.seed, stream_start=start, stream_stop=stop))
            continue
        bracketed = (mc.g_lower - 3.0 * mc.g_lower_stderr <= closed.g_b_asymptotic
                     <= mc.g_upper + 3.0 * mc.g_upper_stderr)
        midpoint = 0.5 * (mc.g_lower + mc.g_upper)
        cell_rows = [
            _check_row("f_b", alpha, np.nan, eps, mc.f_hat, mc.f_stderr, closed.f_b, config.z_flag),
            _check_row("phi_b", alpha, np.nan, eps, mc.phi_hat, mc.phi_stderr, closed.phi_b, config.z_flag),
            _check_row("g_lower", alpha, np.nan, eps, mc.g_lower, mc.g_lower_stderr, closed.g_b_asymptotic, np.inf),
            _check_row("g_upper", alpha, np.nan, eps, mc.g_upper, mc.g_upper_stderr, closed.g_b_asymptotic, np.inf),
            _check_row("g_diagonal", alpha, np.nan, eps, mc.g_diagonal, mc.g_diagonal_stderr, np.nan, np.inf),
            _check_row("g_ratio", alpha, np.nan, eps, midpoint / closed.f_b ** 2, np.nan, g_ratio_limit(alpha), np.inf),
        ]
        for row in cell_rows:
            if row["check"].startswith("g_") and row["check"] != "g_diagonal":
                row["flag"] = not bracketed
            rows.append(dict(row, seed=config.seed, stream_start=start, stream_stop=stop))
    return pd.DataFrame(rows).reindex(columns=CHECK_COLUMNS + STAMP_COLUMNS)


@timing_decorator
def run_moments(config):
    """Fractional moments E[S^b] against Gamma(1 - alpha b) / Gamma(1 - b)."""
    rows = []
    chunks = -(-config.draws // DRAW_CHUNK)
    for cell, alpha in enumerate(config.alpha_grid):
        start, stop = stream_id(cell, 0), stream_id(cell, 0) + chunks
        draws = stable_draws(alpha, config.draws, config.seed, cell=cell, threads=config.threads)
        for b in config.moment_orders:
            try:
                oracle = stable_fractional_moment(alpha, b)
            except FraglabError as error:
                row = _error_row("fractional_moment", alpha, np.nan, b, error)
            else:
                estimate, stderr = mean_stderr(draws ** b)
                row = _check_row("fractional_moment", alpha, np.nan, b, estimate, stderr, oracle, config.z_flag)
            rows.append(dict(row, seed=config.seed, stream_start=start, stream_stop=stop))
    return pd.DataFrame(rows).reindex(columns=CHECK_COLUMNS + STAMP_COLUMNS)


def _poisson_gof(counts, mean):
    """Chi-square p-value of integer ``counts`` against Poisson(mean), tails pooled."""
    lo = int(stats.poisson.ppf(1e-3, mean))
    hi = max(int(stats.poisson.isf(1e-3, mean)), lo + 2)
    observed = np.bincount(np.clip(counts, lo, hi) - lo, minlength=hi - lo + 1).astype(float)
    inner = np.arange(lo + 1, hi)
    expected = np.concatenate(([stats.poisson.cdf(lo, mean)], stats.poisson.pmf(inner, mean),
                               [stats.poisson.sf(hi - 1, mean)]))
    expected = expected / expected.sum() * observed.sum()
    return stats.chisquare(observed, expected).pvalue


def _band_rows(name, band_counts, band_means, alpha, theta, edges, z_flag):
    rows = []
    for j, mean in enumerate(band_means):
        estimate, stderr = mean_stderr(band_counts[:, j])
        rows.append(_check_row("%s_band_%d_count" % (name, j), alpha, theta, edges[j], estimate, stderr, mean, z_flag))
    for i, j in itertools.combinations(range(len(band_means)), 2):
        products = (band_counts[:, i] - band_means[i]) * (band_counts[:, j] - band_means[j])
        estimate, stderr = mean_stderr(products)
        rows.append(_check_row("%s_band_cov_%d_%d" % (name, i, j), alpha, theta, edges[i], estimate, stderr, 0.0, z_flag))
    return rows


@timing_decorator
def run_sampler_gof(config):
    """Distributional checks of the stable sampler and both PPP samplers."""
    alpha, theta, z_flag = config.alpha, config.theta, config.z_flag
    t = config.tilted
    rows = []

    # positive stable variable, Laplace transform exp(-l^{1/alpha})
    chunks = -(-config.draws // DRAW_CHUNK)
    draws = stable_draws(alpha, config.draws, config.seed, cell=0, threads=config.threads)
    for lam in config.laplace_points:
        estimate, stderr = mean_stderr(np.exp(-lam * draws))
        row = _check_row("stable_laplace", alpha, np.nan, lam, estimate, stderr, math.exp(-lam ** (1.0 / alpha)), z_flag)
        rows.append(dict(row, seed=config.seed, stream_start=stream_id(0, 0), stream_stop=stream_id(0, 0) + chunks))
    row = _check_row("stable_positive", alpha, np.nan, np.nan, float(np.all(draws > 0)), 0.0, 1.0, z_flag)
    rows.append(dict(row, seed=config.seed, stream_start=stream_id(0, 0), stream_stop=stream_id(0, 0) + chunks))

    cutoff = config.gof_cutoff
    edges = [cutoff, 10.0 * cutoff, 100.0 * cutoff, math.inf]
    n = config.gof_replicates

    for cell, name in ((1, "fragment"), (2, "node")):
        counts = np.empty(n, dtype=np.int64)
        masses = np.empty(n)
        atom_masses = np.empty(n)
        band_counts = np.empty((n, len(edges) - 1), dtype=np.int64)
        minimum = math.inf
        for i in range(n):
            rng = RngStream(config.seed, stream_id(cell, i))
            if name == "fragment":
                sample = sample_fragment_ppp(1.0, t, cutoff, rng)
            else:
                sample = sample_node_ppp(1.0, t, cutoff, rng, keep_atoms=True)
            counts[i] = sample.count
            masses[i] = sample.total_mass
            atom_masses[i] = sample.atom_sum
            ascending = sample.atoms[::-1]
            band_counts[i] = np.diff(np.searchsorted(ascending, edges, side="right"))
            if sample.count:
                minimum = min(minimum, float(ascending[0]))
        if name == "fragment":
            mean_count = fragment_mean_count(t, cutoff)
            mean_mass = 1.0 / t.base.psi_prime(theta)
            band_means = [t.tilted_expectation(lambda r: 1.0, lower=a, upper=b)[0] for a, b in zip(edges[:-1], edges[1:])]
        else:
            mean_count = node_mean_count(t, cutoff)
            mean_mass = t.base.psi_prime(theta)
            band_means = [t.base.integrate_levy(lambda r: -math.expm1(-theta * r), lower=a, upper=b)[0]
                          for a, b in zip(edges[:-1], edges[1:])]
        cell_rows = []
        estimate, stderr = mean_stderr(counts)
        cell_rows.append(_check_row("%s_count" % name, alpha, theta, cutoff, estimate, stderr, mean_count, z_flag))
        estimate, stderr = mean_stderr(masses)
        # node masses have tail index alpha: no finite variance, so no z flag
        mass_flag = z_flag if name == "fragment" else np.inf
        cell_rows.append(_check_row("%s_mass" % name, alpha, theta, cutoff, estimate, stderr, mean_mass, mass_flag))
        p_value = _poisson_gof(counts, mean_count)
        gof = _check_row("%s_count_chi2_pvalue" % name, alpha, theta, cutoff, p_value, np.nan, np.nan, z_flag)
        gof["flag"] = bool(p_value < 1e-3)
        cell_rows.append(gof)
        above = _check_row("%s_min_atom_above_cutoff" % name, alpha, theta, cutoff,
                           float(minimum > cutoff), 0.0, 1.0, z_flag)
        cell_rows.append(above)
        cell_rows.extend(_band_rows(name, band_counts, band_means, alpha, theta, edges, z_flag))
        if name == "node":
            estimate, stderr = mean_stderr(atom_masses)
            cell_rows.append(_check_row("node_atom_mass", alpha, theta, cutoff, estimate, stderr,
                                        node_mean_mass(t, cutoff), np.inf))
        for row in cell_rows:
            rows.append(dict(row, seed=config.seed, stream_start=stream_id(cell, 0), stream_stop=stream_id(cell, 0) + n))

    # node mass drawn in aggregate, Laplace transform exp(-G(l))
    cell = 3
    totals = np.empty(n)
    remainder_counts = np.empty(n, dtype=np.int64)
    for i in range(n):
        sample = sample_node_mass(1.0, t, RngStream(config.seed, stream_id(cell, i)))
        totals[i] = sample.total
        remainder_counts[i] = sample.remainder_count
    cell_rows = []
    for lam in config.laplace_points:
        estimate, stderr = mean_stderr(np.exp(-lam * totals))
        cell_rows.append(_check_row("node_mass_laplace", alpha, theta, lam, estimate, stderr,
                                    math.exp(-t.big_G(lam)), z_flag))
    estimate, stderr = mean_stderr(totals)
    cell_rows.append(_check_row("node_mass_total", alpha, theta, np.nan, estimate, stderr,
                                t.base.psi_prime(theta), np.inf))
    estimate, stderr = mean_stderr(remainder_counts)
    cell_rows.append(_check_row("node_remainder_count", alpha, theta, np.nan, estimate, stderr,
                                node_remainder_mass(t), z_flag))
    for row in cell_rows:
        rows.append(dict(row, seed=config.seed, stream_start=stream_id(cell, 0), stream_stop=stream_id(cell, 0) + n))
    return pd.DataFrame(rows).reindex(columns=CHECK_COLUMNS + STAMP_COLUMNS)


@timing_decorator
def run_structure(config):
    """E[R_1], E[L_k] for k <= 3 and the exact per-record identities."""
    params = config.cascade_params()
    rs = simulate_replicates(params, config.eps_grid, config.n, config.seed, threads=config.threads)
    alpha, theta, s0, z_flag = config.alpha, config.theta, config.s0, config.z_flag
    rows = []
    estimate, stderr = mean_stderr(rs.R_first)
    rows.append(_check_row("R_1", alpha, theta, 1, estimate, stderr, s0 * config.mechanism.psi_prime(theta), np.inf))
    for k in range(rs.L.shape[1]):
        estimate, stderr = mean_stderr(rs.L[:, k])
        rows.append(_check_row("L_%d" % (k + 1), alpha, theta, k + 1, estimate, stderr, s0, np.inf))

    partition = float(np.max(rs.partition_error))
    row = _check_row("partition_error_max", alpha, theta, np.nan, partition, 0.0, 0.0, z_flag)
    row["flag"] = partition > 1e-10
    rows.append(row)
    monotone = float(np.mean(rs.monotone))
    row = _check_row("monotone_fraction", alpha, theta, np.nan, monotone, 0.0, 1.0, z_flag)
    row["flag"] = monotone < 1.0
    rows.append(row)
    truncated = float(np.mean(rs.truncated))
    row = _check_row("truncated_fraction", alpha, theta, params.k_max, truncated, 0.0, 0.0, z_flag)
    row["flag"] = truncated >= 0.01
    rows.append(row)
    for check, values in (("generations", rs.generations), ("fragment_compensation", rs.fragment_compensation),
                          ("node_compensation", rs.node_compensation), ("residual_mass", rs.residual_mass)):
        estimate, stderr = mean_stderr(values)
        rows.append(_check_row(check, alpha, theta, np.nan, estimate, stderr, np.nan, z_flag))
    table = pd.DataFrame(rows).reindex(columns=CHECK_COLUMNS)
    return _stamp(table, config.seed, rs.stream_start, rs.stream_stop)


@timing_decorator
def run_trajectory(config):
    """Per-replicate scaled N and M over R along eps_n = n^{-2 alpha}."""
    params = config.cascade_params()
    grid = config.cascade_grid()
    rs = simulate_replicates(params, grid, config.trajectory_replicates, config.seed, threads=config.threads)
    alpha = config.alpha
    scale = gamma(1.0 - 1.0 / alpha)
    index_of = {k: grid.index(k ** (-2.0 * alpha)) for k in set(config.trajectory_n)}
    rows = []
    for i in range(rs.n):
        for k in sorted(set(config.trajectory_n)):
            j = index_of[k]
            eps = grid[j]
            R = rs.R[i]
            # no marked nodes: both ratios are undefined
            count_ratio = scale * eps ** (1.0 / alpha) * rs.N[i, j] / R if R > 0 else np.nan
            mass_ratio = (alpha - 1.0) * scale * rs.M[i, j] * eps ** (1.0 / alpha - 1.0) / R if R > 0 else np.nan
            rows.append({
                "replicate": i, "n_index": k, "eps": eps,
                "N": int(rs.N[i, j]), "M": rs.M[i, j], "R": R,
                "count_ratio": count_ratio,
                "mass_ratio": mass_ratio,
                "seed": config.seed,
                "stream_start": stream_id(0, i),
                "stream_stop": stream_id(0, i) + 1,
            })
    return pd.DataFrame(rows)


RUNNERS = {
    "convergence": run_convergence,
    "laplace-xval": run_laplace_xval,
    "second-moment": run_second_moment,
    "r-law": run_r_law,
    "bertoin": run_bertoin,
    "moments": run_moments,
    "sampler-gof": run_sampler_gof,
    "structure": run_structure,
    "trajectory": run_trajectory,
}


def run_experiment(config):
    logger.info("============ Running %s (seed %d, %d thread(s)) ============" % (
        config.experiment, config.seed, config.threads))
    table = RUNNERS[config.experiment](config)
    logger.info("============ %s done: %i rows ============" % (config.experiment, len(table)))
    return table
