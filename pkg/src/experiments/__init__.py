from .config import ExperimentConfig, EXPERIMENT_KINDS, SCHEMA_VERSION, load_config
from .runners import RUNNERS, run_experiment
from .manifest import RESULTS_FILE, MANIFEST_FILE, build_manifest, write_manifest, load_manifest
