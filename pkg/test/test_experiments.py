import os
import tempfile
import unittest
from unittest.mock import patch

import numpy as np
import pandas as pd
import yaml
from scipy.special import gamma

from src.experiments import (
    ExperimentConfig,
    RUNNERS,
    MANIFEST_FILE,
    RESULTS_FILE,
    load_manifest,
    run_experiment,
)
from src.experiments.runners import CHECK_COLUMNS, STAMP_COLUMNS, _poisson_gof
from src.fraglab import main, EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC
from src.utils.errors import ConfigError, NumericError
from src.utils.logger import create_logger
from src.utils.utils import sha256_file


def config(**kwargs):
    mapping = {"schema": 1}
    mapping.update(kwargs)
    return ExperimentConfig.from_mapping(mapping)


class Test_Config(unittest.TestCase):
    def test_rejects_bad_configs(self):
        bad = [
            {"experiment": "r-law"},
            {"schema": 2, "experiment": "r-law"},
            {"schema": 1, "experiment": "r-law", "colour": "blue"},
            {"schema": 1, "experiment": "r-law", "alpha": 2.5},
            {"schema": 1, "experiment": "r-law", "alpha": "one and a half"},
            {"schema": 1, "experiment": "r-law", "r_beta_grid": [1.0, "two"]},
            {"schema": 1, "experiment": "convergence", "eps_grid": [1.0e-3, 1.0e-2, 1.0e-1]},
            {"schema": 1, "experiment": "bertoin", "draws": 0},
            {"schema": 1, "experiment": "structure", "n": 0},
            {"schema": 1, "experiment": "counting"},
        ]
        for mapping in bad:
            with self.assertRaises(ConfigError, msg=str(mapping)):
                ExperimentConfig.from_mapping(mapping)

    def test_experiment_must_match(self):
        with self.assertRaises(ConfigError):
            ExperimentConfig.from_mapping({"schema": 1, "experiment": "r-law"}, experiment="bertoin")
        self.assertEqual(ExperimentConfig.from_mapping({"schema": 1}, experiment="bertoin").experiment, "bertoin")

    def test_eps_grid_is_sorted(self):
        c = config(experiment="bertoin", eps_grid=[1e-2, 1e-4, 1e-3])
        self.assertEqual(c.eps_grid, [1e-4, 1e-3, 1e-2])
        with self.assertRaises(ConfigError):
            config(experiment="bertoin", eps_grid=[1e-2, 1e-2])

    def test_cascade_params(self):
        c = config(experiment="structure", eps_grid=[1e-2, 1e-1], node_cutoff=1e-4, s0=2.0)
        params = c.cascade_params()
        self.assertEqual(params.node_cutoff, 1e-4)
        self.assertLess(params.fragment_cutoff, 1e-2)
        self.assertEqual(params.mass_tolerance, 2e-10)

    def test_node_cutoff_choices(self):
        self.assertIsNone(config(experiment="structure").cascade_params().node_cutoff)
        budgeted = config(experiment="structure", node_mass_budget=1e-4).cascade_params()
        self.assertGreater(budgeted.node_cutoff, 0.0)
        with self.assertRaises(ConfigError):
            config(experiment="structure", alpha=1.8, node_cutoff=1e-30)
        with self.assertRaises(ConfigError):
            config(experiment="structure", alpha=1.8, node_mass_budget=1e-6)
        with self.assertRaises(ConfigError):
            config(experiment="structure", node_mass_budget=0.0)

    def test_trajectory_grid(self):
        c = config(experiment="trajectory", trajectory_n=[4, 2])
        self.assertEqual(c.cascade_grid(), [4 ** -3.0, 2 ** -3.0])

    def test_missing_file(self):
        with self.assertRaises(ConfigError):
            ExperimentConfig.from_file("/nonexistent/config.yaml")


class Test_Runners(unittest.TestCase):
    def test_moments(self):
        c = config(experiment="moments", alpha_grid=[1.5], moment_orders=[0.2, 0.9], draws=4000, seed=5)
        table = run_experiment(c)
        self.assertEqual(len(table), 2)
        good, bad = table.iloc[0], table.iloc[1]
        self.assertAlmostEqual(good["oracle"], gamma(0.7) / gamma(0.8), places=12)
        self.assertLess(abs(good["z"]), 6.0)
        self.assertEqual(good["error"], "")
        self.assertTrue(bad["flag"])
        self.assertNotEqual(bad["error"], "")

    def test_r_law_marks_failed_cells(self):
        c = config(experiment="r-law", r_beta_grid=[0.0, 1.0], r_gamma_grid=[-0.2, 0.0])
        table = run_experiment(c)
        self.assertEqual(len(table), 4)
        failed = table[(table["beta"] == 0.0) & (table["gamma"] == -0.2)].iloc[0]
        self.assertNotEqual(failed["error"], "")
        solved = table[(table["beta"] == 1.0) & (table["gamma"] == 0.0)].iloc[0]
        self.assertAlmostEqual(solved["v_bisection"], 1.0, delta=1e-10)
        self.assertAlmostEqual(solved["v_gamma_zero"], 1.0, places=14)

    def test_poisson_goodness_of_fit(self):
        counts = np.random.default_rng(5).poisson(6.0, 5000)
        self.assertGreater(_poisson_gof(counts, 6.0), 1e-3)
        self.assertLess(_poisson_gof(counts + 2, 6.0), 1e-6)
        self.assertLess(_poisson_gof(counts, 8.0), 1e-6)

    def test_convergence(self):
        eps_grid = [1e-3, 10 ** -2.5, 1e-2, 10 ** -1.5]
        c = config(experiment="convergence", eps_grid=eps_grid, n=20, k_max=20, seed=3)
        table = run_experiment(c)
        self.assertEqual(list(table["eps"]), eps_grid)
        for column in ("D_N", "D_M", "D_mix", "slope_N", "slope_M_stderr", "expected_slope",
                       "truncated_fraction", "n", "seed", "stream_start", "stream_stop"):
            self.assertIn(column, table.columns)
        self.assertTrue(np.all(table["D_N"] >= 0) and np.all(table["D_M"] >= 0))
        self.assertTrue(np.allclose(table["expected_slope"], 1.0 / 1.5))
        self.assertEqual(int(table["stream_stop"].iloc[0] - table["stream_start"].iloc[0]), 20)

    def test_laplace_xval(self):
        c = config(experiment="laplace-xval", n=300, laplace_eps=0.05, x_grid=[0.0, 0.1], y_grid=[0.0],
                   gamma_grid=[0.0, 0.1], k_max=30, seed=8)
        table = run_experiment(c)
        self.assertEqual(len(table), 4)
        for column in ("x", "y", "gamma", "mc_mean", "mc_stderr", "oracle", "z", "flag", "c_prime",
                       "second_moment_oracle", "error", "seed", "stream_start", "stream_stop"):
            self.assertIn(column, table.columns)
        self.assertTrue((table["error"] == "").all())
        self.assertFalse(table["flag"].any())
        self.assertTrue(np.all((table["oracle"] > 0) & (table["oracle"] < 1)))

    def test_second_moment(self):
        c = config(experiment="second-moment", n=300, moment_eps=0.05, moment_gamma=0.0, k_max=30, seed=9)
        table = run_experiment(c)
        self.assertEqual(list(table["check"]), ["second_moment", "first_moment", "laplace"])
        for column in CHECK_COLUMNS + STAMP_COLUMNS + ["h_beta", "c0", "a2", "unconditional_second_moment"]:
            self.assertIn(column, table.columns)
        self.assertTrue(np.all(np.isfinite(table["estimate"])))
        self.assertFalse(table.set_index("check").loc["laplace", "flag"])
        row = table.iloc[0]
        self.assertAlmostEqual(row["denominator_quadrature"], row["denominator_closed_form"], delta=1e-7)

    def test_bertoin(self):
        c = config(experiment="bertoin", alpha_grid=[1.2], bertoin_eps=[0.1], draws=20000, seed=10)
        table = run_experiment(c)
        self.assertEqual(list(table.columns), CHECK_COLUMNS + STAMP_COLUMNS)
        self.assertEqual(list(table["check"]), ["f_b", "phi_b", "g_lower", "g_upper", "g_diagonal", "g_ratio"])
        by_check = table.set_index("check")
        self.assertFalse(by_check.loc["f_b", "flag"])
        self.assertFalse(by_check.loc["phi_b", "flag"])
        self.assertTrue((table["error"] == "").all())
        self.assertLessEqual(by_check.loc["g_lower", "estimate"], by_check.loc["g_upper", "estimate"])

    def test_sampler_gof(self):
        c = config(experiment="sampler-gof", draws=20000, laplace_points=[0.5, 2.0], gof_cutoff=1e-2,
                   gof_replicates=400, seed=12)
        table = run_experiment(c)
        self.assertEqual(list(table.columns), CHECK_COLUMNS + STAMP_COLUMNS)
        checks = set(table["check"])
        for check in ("stable_laplace", "fragment_count_chi2_pvalue", "node_band_cov_0_1", "node_atom_mass",
                      "node_mass_laplace", "node_remainder_count"):
            self.assertIn(check, checks)
        self.assertEqual(len(table), 28)
        self.assertFalse(table["flag"].any(), list(table[table["flag"]]["check"]))

    def test_trajectory(self):
        c = config(experiment="trajectory", trajectory_n=[2, 3], trajectory_replicates=3, k_max=20, seed=13)
        table = run_experiment(c)
        self.assertEqual(len(table), 6)
        for column in ("replicate", "n_index", "eps", "N", "M", "R", "count_ratio", "mass_ratio",
                       "seed", "stream_start", "stream_stop"):
            self.assertIn(column, table.columns)
        self.assertTrue(np.all(table["R"] > 0))
        self.assertTrue(np.all(np.isfinite(table["count_ratio"])))

    def test_trajectory_without_nodes(self):
        # nodes above 1e3 almost never occur, so R = 0 and the ratios are undefined
        c = config(experiment="trajectory", trajectory_n=[2], trajectory_replicates=3, node_cutoff=1e3, seed=14)
        table = run_experiment(c)
        self.assertTrue(np.all(table["R"] == 0.0))
        self.assertTrue(table["count_ratio"].isna().all())
        self.assertTrue(table["mass_ratio"].isna().all())


class Test_Command_Line(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.addCleanup(create_logger, None)

    def write_config(self, name, mapping):
        path = os.path.join(self.tmp.name, name)
        with open(path, "w") as f:
            yaml.safe_dump(mapping, f)
        return path

    def out(self, name):
        return os.path.join(self.tmp.name, name)

    def r_law_config(self):
        return self.write_config("r-law.yaml", {
            "schema": 1, "experiment": "r-law",
            "r_beta_grid": [0.0, 0.5, 1.0], "r_gamma_grid": [-0.2, 0.0, 0.5], "seed": 11,
        })

    def test_run_writes_results_and_manifest(self):
        path = self.r_law_config()
        self.assertEqual(main(["r-law", "--config", path, "--out", self.out("first")]), EXIT_OK)
        results = os.path.join(self.out("first"), RESULTS_FILE)
        table = pd.read_csv(results)
        self.assertEqual(len(table), 9)
        for column in ("beta", "gamma", "v_bisection", "v_composition", "route_gap", "seed", "stream_start"):
            self.assertIn(column, table.columns)
        self.assertTrue(os.path.isfile(os.path.join(self.out("first"), "log.txt")))

        manifest = load_manifest(os.path.join(self.out("first"), MANIFEST_FILE))
        self.assertEqual(manifest["experiment"], "r-law")
        self.assertEqual(manifest["seed"], 11)
        self.assertEqual(manifest["rows"], 9)
        self.assertEqual(manifest["results_sha256"], sha256_file(results))

    def test_manifest_replays_the_run(self):
        path = self.r_law_config()
        main(["r-law", "--config", path, "--out", self.out("first")])
        manifest = os.path.join(self.out("first"), MANIFEST_FILE)
        self.assertEqual(main(["r-law", "--config", manifest, "--out", self.out("second")]), EXIT_OK)
        self.assertEqual(sha256_file(os.path.join(self.out("first"), RESULTS_FILE)),
                         sha256_file(os.path.join(self.out("second"), RESULTS_FILE)))

    def test_config_errors(self):
        bad = self.write_config("bad.yaml", {"schema": 1, "experiment": "r-law", "alpha": 3.0})
        self.assertEqual(main(["r-law", "--config", bad, "--out", self.out("bad")]), EXIT_CONFIG)
        missing = self.out("missing.yaml")
        self.assertEqual(main(["r-law", "--config", missing, "--out", self.out("missing")]), EXIT_CONFIG)
        self.assertEqual(main(["bertoin", "--config", self.r_law_config(), "--out", self.out("other")]), EXIT_CONFIG)

    def test_numeric_failure(self):
        def failing(config):
            raise NumericError("no convergence", iterations=3)

        with patch.dict(RUNNERS, {"r-law": failing}):
            code = main(["r-law", "--config", self.r_law_config(), "--out", self.out("failed")])
        self.assertEqual(code, EXIT_NUMERIC)
        self.assertFalse(os.path.exists(os.path.join(self.out("failed"), RESULTS_FILE)))

    def test_structure_does_not_depend_on_threads(self):
        path = self.write_config("structure.yaml", {
            "schema": 1, "experiment": "structure", "n": 6, "node_cutoff": 1.0e-5, "k_max": 20,
            "eps_grid": [1.0e-2, 3.0e-2, 1.0e-1], "seed": 4,
        })
        self.assertEqual(main(["structure", "--config", path, "--out", self.out("one"), "--threads", "1"]), EXIT_OK)
        self.assertEqual(main(["structure", "--config", path, "--out", self.out("two"), "--threads", "2"]), EXIT_OK)
        self.assertEqual(sha256_file(os.path.join(self.out("one"), RESULTS_FILE)),
                         sha256_file(os.path.join(self.out("two"), RESULTS_FILE)))


if __name__ == '__main__':
    unittest.main()
