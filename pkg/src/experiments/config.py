"""
Experiment configuration.

A config is a flat YAML mapping with ``schema: 1``; every key of
``ExperimentConfig`` may appear, anything else is rejected. A ``manifest.json``
written by a previous run is accepted in place of the YAML file and replays
that run's configuration.
"""
import os
import math
import logging
import dataclasses
from dataclasses import dataclass, field
from typing import List, Optional

from src.cascade import CascadeParams
from src.mechanism import StableMechanism, TiltedMechanism
from src.samplers import default_fragment_cutoff, default_node_cutoff
from src.utils.errors import ConfigError, DomainError, FraglabError
from src.utils.utils import load_yaml, load_json

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
EXPERIMENT_KINDS = (
    "convergence",
    "laplace-xval",
    "second-moment",
    "r-law",
    "bertoin",
    "moments",
    "sampler-gof",
    "structure",
    "trajectory",
)
CASCADE_KINDS = ("convergence", "laplace-xval", "second-moment", "structure", "trajectory")
MIN_SLOPE_POINTS = 4


def _default_eps_grid():
    return [1e-4, 10 ** -3.5, 1e-3, 10 ** -2.5, 1e-2]


@dataclass
class ExperimentConfig:
    experiment: str
    schema: int = SCHEMA_VERSION
    # model
    alpha: float = 1.5
    theta: float = 1.0
    s0: float = 1.0
    beta: float = 1.0
    # cascade experiments
    eps_grid: List[float] = field(default_factory=_default_eps_grid)
    n: int = 10000
    fragment_cutoff: Optional[float] = None
    node_cutoff: Optional[float] = None
    node_mass_budget: Optional[float] = None
    k_max: int = 60
    mass_tolerance_factor: float = 1e-10
    lambda_N: float = 1.0
    lambda_M: float = 1.0
    # laplace-xval
    laplace_eps: float = 0.01
    x_grid: List[float] = field(default_factory=lambda: [0.0, 0.1, 0.3])
    y_grid: List[float] = field(default_factory=lambda: [0.0, 0.1, 0.3])
    gamma_grid: List[float] = field(default_factory=lambda: [0.0, 0.1, 0.3])
    z_flag: float = 4.0
    # second-moment
    moment_x: float = 0.1
    moment_y: float = 0.1
    moment_gamma: float = -0.2
    moment_eps: float = 0.01
    # r-law
    r_beta_grid: List[float] = field(default_factory=lambda: [0.0, 0.5, 1.0, 2.0, 4.0])
    r_gamma_grid: List[float] = field(default_factory=lambda: [-0.2, 0.0, 0.5, 1.0, 2.0])
    # single-variable Monte Carlo (bertoin, moments, sampler-gof)
    draws: int = 1000000
    alpha_grid: List[float] = field(default_factory=lambda: [1.2, 1.5, 1.8])
    bertoin_eps: List[float] = field(default_factory=lambda: [0.1, 0.01, 0.001])
    moment_orders: List[float] = field(default_factory=lambda: [0.2, 1.0 / 3.0, 0.45])
    laplace_points: List[float] = field(default_factory=lambda: [0.5, 1.0, 2.0])
    gof_cutoff: float = 1e-3
    gof_replicates: int = 10000
    # trajectory
    trajectory_n: List[int] = field(default_factory=lambda: [2, 3, 4, 6, 8, 10])
    trajectory_replicates: int = 20
    # run
    seed: int = 0
    out: str = "results"
    threads: int = 1

    # --- loading ----------------------------------------------------------------

    @classmethod
    def from_mapping(cls, mapping, experiment=None):
        mapping = dict(mapping)
        if "schema" not in mapping:
            raise ConfigError("config is missing the `schema` field (expected %d)" % SCHEMA_VERSION)
        if mapping["schema"] != SCHEMA_VERSION:
            raise ConfigError("unsupported config schema %r (expected %d)" % (mapping["schema"], SCHEMA_VERSION))
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(mapping) - known)
        if unknown:
            raise ConfigError("unknown config keys: %s" % ", ".join(unknown))
        if experiment is not None:
            if mapping.get("experiment", experiment) != experiment:
                raise ConfigError("config is for experiment %r, not %r" % (mapping["experiment"], experiment))
            mapping["experiment"] = experiment
        if "experiment" not in mapping:
            raise ConfigError("no experiment kind given")
        config = cls(**mapping)
        try:
            config.validate()
        except TypeError as error:
            raise ConfigError("malformed config value: %s" % error) from error
        return config

    @classmethod
    def from_file(cls, filepath, experiment=None, **overrides):
        if not os.path.isfile(filepath):
            raise ConfigError("config file %s not found" % filepath)
        try:
            if filepath.endswith(".json"):
                manifest = load_json(filepath)
                if "config" not in manifest:
                    raise ConfigError("%s is not a fraglab manifest (no `config` entry)" % filepath)
                mapping = manifest["config"]
            else:
                mapping = load_yaml(filepath)
        except ConfigError:
            raise
        except Exception as error:
            raise ConfigError("cannot read %s: %s" % (filepath, error)) from error
        if not isinstance(mapping, dict):
            raise ConfigError("%s must hold a key/value mapping" % filepath)
        mapping.update({key: value for key, value in overrides.items() if value is not None})
        return cls.from_mapping(mapping, experiment=experiment)

    def to_dict(self):
        return dataclasses.asdict(self)

    # --- validation ---------------------------------------------------------------

    def _require(self, condition, message, *args):
        if not condition:
            raise ConfigError(message % args)

    def _require_int(self, name, minimum):
        value = getattr(self, name)
        self._require(isinstance(value, int) and not isinstance(value, bool) and value >= minimum,
                      "%s must be an integer >= %d, got %r", name, minimum, value)

    def _require_numbers(self, name, values):
        self._require(isinstance(values, (list, tuple)) and len(values) > 0, "%s must be a nonempty list", name)
        for value in values:
            self._require(isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value),
                          "%s holds a non-numeric entry %r", name, value)

    def validate(self):
        self._require(self.experiment in EXPERIMENT_KINDS, "unknown experiment %r (choose from %s)",
                      self.experiment, ", ".join(EXPERIMENT_KINDS))
        self._require(1.0 < self.alpha < 2.0, "alpha must lie in (1, 2), got %r", self.alpha)
        self._require(self.theta > 0, "theta must be positive, got %r", self.theta)
        self._require(self.s0 > 0, "s0 must be positive, got %r", self.s0)
        self._require(self.beta >= 0, "beta must be nonnegative, got %r", self.beta)
        self._require_int("n", 1)
        self._require_int("draws", 1)
        self._require_int("k_max", 1)
        self._require_int("threads", 1)
        self._require_int("gof_replicates", 1)
        self._require_int("trajectory_replicates", 1)
        self._require_int("seed", 0)
        self._require(self.seed < 1 << 64, "seed must fit in 64 unsigned bits")
        for name in ("eps_grid", "x_grid", "y_grid", "gamma_grid", "r_beta_grid", "r_gamma_grid",
                     "alpha_grid", "bertoin_eps", "moment_orders", "laplace_points", "trajectory_n"):
            self._require_numbers(name, getattr(self, name))
        self.eps_grid = sorted(float(e) for e in self.eps_grid)
        self._require(self.eps_grid[0] > 0, "eps_grid entries must be positive")
        self._require(len(set(self.eps_grid)) == len(self.eps_grid), "eps_grid has repeated entries")
        self._require(all(x >= 0 for x in self.x_grid + self.y_grid), "x_grid and y_grid must be nonnegative")
        self._require(all(b >= 0 for b in self.r_beta_grid), "r_beta_grid must be nonnegative")
        self._require(all(1.0 < a < 2.0 for a in self.alpha_grid), "alpha_grid entries must lie in (1, 2)")
        self._require(all(0.0 < e < 1.0 for e in self.bertoin_eps), "bertoin_eps entries must lie in (0, 1)")
        self._require(all(lam >= 0 for lam in self.laplace_points), "laplace_points must be nonnegative")
        self._require(all(isinstance(k, int) and k >= 2 for k in self.trajectory_n),
                      "trajectory_n entries must be integers >= 2")
        self._require(self.gof_cutoff > 0, "gof_cutoff must be positive")
        self._require(self.node_mass_budget is None or self.node_mass_budget > 0,
                      "node_mass_budget must be positive when given")
        self._require(0 <= self.mass_tolerance_factor < 1, "mass_tolerance_factor must lie in [0, 1)")
        self._require(self.laplace_eps > 0 and self.moment_eps > 0, "laplace_eps and moment_eps must be positive")
        self._require(self.moment_x >= 0 and self.moment_y >= 0, "moment_x and moment_y must be nonnegative")

        if self.experiment == "convergence":
            self._require(len(self.eps_grid) >= MIN_SLOPE_POINTS,
                          "the slope fit needs at least %d eps values, got %d", MIN_SLOPE_POINTS, len(self.eps_grid))
        if self.experiment == "second-moment":
            self._require(self.beta > 0, "the second-moment expansion needs beta > 0")
        if self.experiment in CASCADE_KINDS:
            try:
                params = self.cascade_params()
                params.check_grid(self.cascade_grid())
            except DomainError as error:
                raise ConfigError(str(error)) from error
        return self

    # --- derived parameters ---------------------------------------------------------

    @property
    def mechanism(self):
        return StableMechanism(self.alpha)

    @property
    def tilted(self):
        return TiltedMechanism(self.mechanism, self.theta)

    def cascade_grid(self):
        """The eps values the cascade statistics are evaluated on for this experiment."""
        if self.experiment == "laplace-xval":
            return [self.laplace_eps]
        if self.experiment == "second-moment":
            return [self.moment_eps]
        if self.experiment == "trajectory":
            return sorted(k ** (-2.0 * self.alpha) for k in set(self.trajectory_n))
        return list(self.eps_grid)

    def cascade_params(self):
        grid = self.cascade_grid()
        fragment_cutoff = self.fragment_cutoff or default_fragment_cutoff(grid)
        node_cutoff = self.node_cutoff
        if node_cutoff is None and self.node_mass_budget is not None:
            try:
                node_cutoff = default_node_cutoff(self.tilted, self.node_mass_budget)
            except FraglabError as error:
                raise ConfigError("cannot choose a node cutoff: %s" % error) from error
        return CascadeParams(
            alpha=self.alpha,
            theta=self.theta,
            s0=self.s0,
            fragment_cutoff=fragment_cutoff,
            node_cutoff=node_cutoff,
            k_max=self.k_max,
            mass_tolerance=self.mass_tolerance_factor * self.s0,
        )


def load_config(filepath, experiment=None, seed=None, out=None, threads=None):
    """Read a YAML config (or a manifest) and apply command-line overrides."""
    config = ExperimentConfig.from_file(filepath, experiment=experiment, seed=seed, out=out, threads=threads)
    logger.debug("Loaded %s config from %s" % (config.experiment, filepath))
    return config
