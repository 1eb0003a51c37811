import math
import unittest

import numpy as np

from src.utils.errors import DomainError, NumericError
from src.utils.numerics import (
    decade_points,
    integrate,
    expand_bracket,
    find_root,
    mean_stderr,
    z_score,
    iterate_monotone,
)


class Test_Quadrature(unittest.TestCase):
    def test_decade_points(self):
        points = decade_points(1e-3, 10.0)
        self.assertEqual(len(points), 3)
        for got, expected in zip(points, [1e-2, 1e-1, 1.0]):
            self.assertAlmostEqual(got, expected, places=15)

    def test_exponential_on_half_line(self):
        value, abserr = integrate(lambda x: math.exp(-x), 0.0, math.inf)
        self.assertAlmostEqual(value, 1.0, delta=1e-11)
        self.assertLess(abserr, 1e-9)

    def test_power_singularity(self):
        value, _ = integrate(lambda x: x ** -0.5, 0.0, 1.0)
        self.assertAlmostEqual(value, 2.0, delta=1e-9)

    def test_power_law_tails(self):
        # about 5e-6 of the first integral lies beyond 1e8
        value, _ = integrate(lambda x: x ** (-5.0 / 3.0), 1.0, math.inf)
        self.assertAlmostEqual(value, 1.5, delta=1e-10)
        value, _ = integrate(lambda x: x ** -1.5, 1.0, math.inf)
        self.assertAlmostEqual(value, 2.0, delta=1e-10)
        value, _ = integrate(lambda x: -math.expm1(-x) * x ** (-5.0 / 3.0), 0.0, math.inf)
        self.assertAlmostEqual(value, 1.5 * math.gamma(1.0 / 3.0), delta=1e-9)

    def test_tail_starting_beyond_mesh(self):
        value, _ = integrate(lambda x: x ** -2.0, 1e9, math.inf)
        self.assertAlmostEqual(value, 1e-9, delta=1e-20)

    def test_user_breakpoint(self):
        value, _ = integrate(lambda x: 1.0 if x <= 0.3 else 0.0, 0.0, 1.0, points=(0.3,))
        self.assertAlmostEqual(value, 0.3, delta=1e-10)

    def test_empty_and_reversed_range(self):
        self.assertEqual(integrate(math.exp, 1.0, 1.0), (0.0, 0.0))
        with self.assertRaises(DomainError):
            integrate(math.exp, 2.0, 1.0)


class Test_Roots(unittest.TestCase):
    def test_find_root(self):
        root = find_root(lambda x: x * x - 2.0, 0.0, 2.0)
        self.assertAlmostEqual(root, math.sqrt(2.0), places=14)

    def test_no_sign_change(self):
        with self.assertRaises(NumericError) as context:
            find_root(lambda x: x * x + 1.0, 0.0, 2.0)
        self.assertIn("f_lower", str(context.exception))
        self.assertIn("lower", context.exception.diagnostics)

    def test_expand_bracket(self):
        upper = expand_bracket(lambda x: x - 100.0, 0.0, 1.0)
        self.assertGreater(upper, 100.0)
        with self.assertRaises(NumericError):
            expand_bracket(lambda x: -1.0, 0.0, 1.0, max_steps=10)


class Test_Summaries(unittest.TestCase):
    def test_mean_stderr(self):
        mean, stderr = mean_stderr([1.0, 2.0, 3.0, 4.0])
        self.assertEqual(mean, 2.5)
        self.assertAlmostEqual(stderr, math.sqrt((5.0 / 3.0) / 4.0), places=15)

    def test_mean_is_order_independent(self):
        values = np.random.default_rng(3).standard_cauchy(10001)
        shuffled = np.random.default_rng(4).permutation(values)
        self.assertEqual(mean_stderr(values)[0], mean_stderr(shuffled)[0])

    def test_single_and_empty_sample(self):
        self.assertEqual(mean_stderr([7.0]), (7.0, 0.0))
        with self.assertRaises(DomainError):
            mean_stderr([])

    def test_z_score(self):
        self.assertEqual(z_score(3.0, 1.0, 0.5), 4.0)
        self.assertEqual(z_score(1.0, 1.0, 0.0), 0.0)
        self.assertEqual(z_score(2.0, 1.0, 0.0), math.inf)


class Test_Monotone_Iteration(unittest.TestCase):
    def test_contraction(self):
        limit, iterates = iterate_monotone(lambda c: 0.5 * c + 1.0)
        self.assertAlmostEqual(limit, 2.0, delta=1e-13)
        self.assertTrue(all(b > a for a, b in zip(iterates, iterates[1:])))

    def test_accelerated_matches_plain(self):
        plain, plain_iterates = iterate_monotone(lambda c: 0.9 * c + 0.1)
        fast, fast_iterates = iterate_monotone(lambda c: 0.9 * c + 0.1, accelerate=True)
        self.assertAlmostEqual(plain, 1.0, delta=1e-12)
        self.assertAlmostEqual(fast, 1.0, delta=1e-12)
        self.assertLess(len(fast_iterates), len(plain_iterates))

    def test_decreasing_update_fails(self):
        with self.assertRaises(NumericError):
            iterate_monotone(lambda c: c - 1.0)


if __name__ == '__main__':
    unittest.main()
