import math
import unittest

import numpy as np

from src.cascade import (
    CascadeParams,
    simulate_cascade,
    fragment_statistics,
    simulate_replicates,
    run_replicates,
    laplace_mean,
    weighted_moment,
    normalised_errors,
    summary_table,
)
from src.samplers import RngStream, stream_id, node_mean_count
from src.utils.errors import DomainError
from src.utils.numerics import mean_stderr, z_score

EPS_GRID = [1e-3, 1e-2, 1e-1]


def fast_params(**overrides):
    values = dict(alpha=1.5, theta=1.0, s0=1.0, fragment_cutoff=1e-5, node_cutoff=1e-5, k_max=30)
    values.update(overrides)
    return CascadeParams(**values)


class Test_Params(unittest.TestCase):
    def test_validation(self):
        for overrides in ({"alpha": 2.5}, {"theta": 0.0}, {"s0": -1.0}, {"k_max": 0},
                          {"fragment_cutoff": 0.0}, {"mass_tolerance": 2.0}):
            with self.assertRaises(DomainError):
                fast_params(**overrides)

    def test_defaults(self):
        params = CascadeParams(alpha=1.5, theta=1.0, s0=2.0)
        self.assertEqual(params.mass_tolerance, 2e-10)
        self.assertIsNone(params.node_cutoff)

    def test_node_cutoff_checks(self):
        # about 4e23 envelope points per unit mass
        with self.assertRaises(DomainError):
            fast_params(alpha=1.8, node_cutoff=1e-30)
        with self.assertRaises(DomainError):
            fast_params(node_cutoff=0.0)
        with self.assertRaises(DomainError):
            CascadeParams(alpha=1.5, theta=1.0, keep_node_atoms=True)
        self.assertEqual(fast_params(node_cutoff=1e-5, keep_node_atoms=True).node_cutoff, 1e-5)

    def test_grid_checks(self):
        params = fast_params()
        self.assertTrue(np.array_equal(params.check_grid(EPS_GRID), np.array(EPS_GRID)))
        with self.assertRaises(DomainError):
            params.check_grid([1e-2, 1e-3])
        with self.assertRaises(DomainError):
            params.check_grid([1e-6, 1e-2])
        with self.assertRaises(DomainError):
            params.check_grid([])


class Test_Cascade(unittest.TestCase):
    def setUp(self):
        self.params = fast_params()
        self.record = simulate_cascade(self.params, RngStream(2024, 0))

    def test_reproducible(self):
        again = simulate_cascade(self.params, RngStream(2024, 0))
        self.assertEqual(again.sigma, self.record.sigma)
        self.assertEqual(again.R_total, self.record.R_total)
        self.assertEqual(again.generation_count, self.record.generation_count)

    def test_totals(self):
        rec = self.record
        self.assertEqual(rec.L(0), 1.0)
        self.assertEqual(rec.R(0), 0.0)
        self.assertEqual(rec.sigma, math.fsum(g.L_k for g in rec.generations))
        self.assertEqual(rec.R_total, math.fsum(g.R_k for g in rec.generations))
        for g in rec.generations[1:]:
            self.assertAlmostEqual(g.L_k, math.fsum(g.fragment_sizes) + g.fragment_compensation,
                                   delta=1e-14 * (1.0 + g.L_k))
            self.assertTrue(np.all(g.fragment_sizes > self.params.fragment_cutoff))

    def test_stopping_rule(self):
        rec = self.record
        last = rec.generations[-1].L_k
        self.assertEqual(rec.residual_mass, last)
        if rec.truncated_at_kmax:
            self.assertEqual(rec.generation_count, self.params.k_max)
            self.assertGreaterEqual(last, self.params.mass_tolerance)
        else:
            self.assertLess(last, self.params.mass_tolerance)

    def test_single_generation_is_truncated(self):
        rec = simulate_cascade(fast_params(k_max=1), RngStream(9, 0))
        self.assertEqual(rec.generation_count, 1)
        self.assertEqual(rec.truncated_at_kmax, rec.L(1) >= 1e-10)
        self.assertEqual(rec.L(5), 0.0)

    def test_fragment_statistics(self):
        included = fragment_statistics(self.record, EPS_GRID, include_root=True)
        excluded = fragment_statistics(self.record, EPS_GRID, include_root=False)
        for stats in (included, excluded):
            self.assertLess(stats.partition_error(), 1e-12)
            self.assertTrue(stats.is_monotone())
        # the root (s0 = 1) is above every eps
        self.assertTrue(np.array_equal(included.N_eps - excluded.N_eps, np.ones(3, dtype=np.int64)))
        self.assertTrue(np.array_equal(included.M_eps, excluded.M_eps))
        self.assertEqual(included.R, self.record.R_total)

    def test_aggregate_nodes_near_alpha_two(self):
        params = CascadeParams(alpha=1.8, theta=1.0, fragment_cutoff=1e-5, k_max=20)
        for i in range(5):
            rec = simulate_cascade(params, RngStream(31, i))
            self.assertTrue(math.isfinite(rec.sigma) and math.isfinite(rec.R_total))
            self.assertEqual(rec.node_compensation_total, 0.0)
            for g in rec.generations[1:]:
                self.assertGreaterEqual(g.R_k, 0.0)
                self.assertEqual(g.node_count, 0)
                self.assertIsNone(g.node_atoms)


class Test_Generation_Means(unittest.TestCase):
    def test_fragment_mass_given_nodes(self):
        # E[L_1 | R_1] = R_1 / psi'(theta), checked at theta = 2
        params = fast_params(theta=2.0, k_max=1, node_cutoff=1e-4, fragment_cutoff=1e-4)
        ratios, node_counts = [], []
        for i in range(1500):
            rec = simulate_cascade(params, RngStream(77, stream_id(0, i)))
            ratios.append(rec.L(1) / rec.R(1))
            node_counts.append(rec.generations[1].node_count)
        mean, stderr = mean_stderr(ratios)
        self.assertLess(abs(z_score(mean, 1.0 / params.mechanism.psi_prime(2.0), stderr)), 4.0)
        mean, stderr = mean_stderr(node_counts)
        self.assertLess(abs(z_score(mean, node_mean_count(params.tilted, 1e-4), stderr)), 4.0)

    def test_node_mass_laplace(self):
        # E exp(-l R_1) = exp(-s0 G(l)), and G(l) / l -> psi'(theta) = alpha theta^{alpha-1}
        params = CascadeParams(alpha=1.5, theta=2.0, s0=2.0, fragment_cutoff=1e-4, k_max=1)
        t = params.tilted
        self.assertAlmostEqual(t.big_G(1e-8) / 1e-8, 1.5 * 2.0 ** 0.5, delta=1e-3)
        R_1 = np.array([simulate_cascade(params, RngStream(78, i)).R(1) for i in range(3000)])
        for lam in (0.1, 0.5, 2.0):
            mean, stderr = mean_stderr(-np.expm1(-lam * R_1) / lam)
            expected = -math.expm1(-params.s0 * t.big_G(lam)) / lam
            self.assertLess(abs(z_score(mean, expected, stderr)), 4.5, lam)

    def test_mass_is_a_martingale(self):
        # E exp(-l L_k) = exp(-s0 Phi^k(l)) with Phi(l) = G(psi_theta^{-1}(l)), and Phi(l) / l -> 1
        params = CascadeParams(alpha=1.5, theta=1.0, s0=2.0, fragment_cutoff=1e-5, k_max=3)
        t = params.tilted

        def step(lam):
            return t.big_G(t.psi_theta_inverse(lam))

        records = [simulate_cascade(params, RngStream(79, i)) for i in range(3000)]
        small, lam = 1e-8, 0.5
        for k in (1, 2, 3):
            small, lam = step(small), step(lam)
            self.assertAlmostEqual(small / 1e-8, 1.0, delta=1e-3)
            L_k = np.array([rec.L(k) for rec in records])
            mean, stderr = mean_stderr(-np.expm1(-0.5 * L_k) / 0.5)
            expected = -math.expm1(-params.s0 * lam) / 0.5
            self.assertLess(abs(z_score(mean, expected, stderr)), 4.5, k)


class Test_Replicates(unittest.TestCase):
    def setUp(self):
        self.params = fast_params(k_max=20)

    def test_thread_count_does_not_change_results(self):
        one = simulate_replicates(self.params, EPS_GRID, 6, 5, threads=1, chunk_size=2)
        two = simulate_replicates(self.params, EPS_GRID, 6, 5, threads=2, chunk_size=2)
        for name in ("cal_N", "cal_M", "N", "M", "R", "sigma", "L", "generations", "truncated"):
            self.assertTrue(np.array_equal(getattr(one, name), getattr(two, name)), name)
        self.assertEqual(one.stream_start, 0)
        self.assertEqual(one.stream_stop, 6)

    def test_replicate_matches_single_cascade(self):
        rs = simulate_replicates(self.params, EPS_GRID, 3, 5, cell=2)
        rec = simulate_cascade(self.params, RngStream(5, stream_id(2, 1)))
        self.assertEqual(rs.sigma[1], rec.sigma)
        self.assertEqual(rs.R[1], rec.R_total)
        self.assertEqual(rs.stream_start, stream_id(2, 0))

    def test_reductions(self):
        rs = simulate_replicates(self.params, EPS_GRID, 8, 1)
        self.assertEqual(laplace_mean(rs, 0.0, 0.0, 0.0, 0.0, 0)[0], 1.0)
        mean, _ = weighted_moment(rs, 0.0, 0.0, 1.0, 0.0, 0, 1)
        self.assertAlmostEqual(mean, float(np.mean(rs.R)), delta=1e-12 * (1.0 + mean))
        errors = normalised_errors(rs, 1.0, 0.0)
        self.assertEqual(errors.shape, (8, 3))
        table = summary_table(rs, 1.0)
        self.assertEqual(list(table["eps"]), EPS_GRID)
        self.assertTrue(np.all(table["D_N"] >= 0))
        self.assertTrue(np.all(np.isfinite(table["rate_bound"])))

    def test_run_replicates(self):
        summary = run_replicates(self.params, EPS_GRID, 1.0, 4, 3, laplace_args=((0.0, 0.0, 0.0), (1.0, 0.0, 0.0)))
        self.assertEqual(len(summary.by_eps), 3)
        self.assertEqual(len(summary.laplace), 6)
        self.assertTrue(0.0 <= summary.truncated_fraction <= 1.0)
        with self.assertRaises(DomainError):
            run_replicates(self.params, EPS_GRID, -1.0, 4, 3)
        with self.assertRaises(DomainError):
            simulate_replicates(self.params, EPS_GRID, 0, 3)


if __name__ == '__main__':
    unittest.main()
