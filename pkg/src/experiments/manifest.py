"""
Run manifest: the resolved config, the seed and stream ranges, library
versions and the hash of ``results.csv``. Passing the manifest back as
``--config`` replays the run.
"""
import os
import json
import hashlib
import logging
import platform
from datetime import datetime, timezone

import numpy as np
import pandas as pd
import scipy
import tqdm
import yaml

from src import __version__
from src.utils.utils import load_json, sha256_file, write_json

logger = logging.getLogger(__name__)

RESULTS_FILE = "results.csv"
MANIFEST_FILE = "manifest.json"


def config_digest(config_dict):
    canonical = json.dumps(config_dict, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def library_versions():
    return {
        "fraglab": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
        "pyyaml": yaml.__version__,
        "tqdm": tqdm.__version__,
    }


def stream_ranges(table):
    """Distinct ``[start, stop)`` stream ranges used by a result table, in order of appearance."""
    if "stream_start" not in table or table.empty:
        return []
    pairs = table[["stream_start", "stream_stop"]].drop_duplicates()
    return [[int(start), int(stop)] for start, stop in pairs.itertuples(index=False)]


def build_manifest(config, table, results_path):
    config_dict = config.to_dict()
    return {
        "experiment": config.experiment,
        "schema": config.schema,
        "config": config_dict,
        "config_sha256": config_digest(config_dict),
        "seed": config.seed,
        "streams": stream_ranges(table),
        "rows": int(len(table)),
        "columns": list(table.columns),
        "results_file": os.path.basename(results_path),
        "results_sha256": sha256_file(results_path),
        "versions": library_versions(),
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }


def write_manifest(config, table, out_dir):
    results_path = os.path.join(out_dir, RESULTS_FILE)
    manifest = build_manifest(config, table, results_path)
    save_path = os.path.join(out_dir, MANIFEST_FILE)
    write_json(manifest, save_path)
    logger.info("Wrote %s (results sha256 %s)" % (save_path, manifest["results_sha256"][:12]))
    return manifest


def load_manifest(filepath):
    return load_json(filepath)
