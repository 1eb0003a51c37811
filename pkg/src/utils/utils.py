import os
import json
import hashlib
import logging
from pathlib import Path
from typing import Any, Dict

import yaml

logger = logging.getLogger(__name__)

ROOT_PATH = str(Path(__file__).parents[2])
# 17 significant digits round-trip every double exactly
FLOAT_FORMAT = "%.17g"


def load_yaml(filepath: str) -> Dict[str, Any]:
    with open(filepath, "r") as stream:
        content = yaml.safe_load(stream)
    return {} if content is None else content


def load_json(filepath: str) -> Dict[str, Any]:
    with open(filepath, "r") as json_file:
        return json.load(json_file)


def write_json(data: Dict[str, Any], save_path: str):
    with open(save_path, "w") as file:
        json.dump(data, file, indent=2, sort_keys=True, ensure_ascii=False)
        file.write("\n")


def write_csv(frame, save_path: str):
    """Write a pandas DataFrame with a fixed float format and ``\\n`` line ends."""
    frame.to_csv(save_path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def sha256_file(filepath: str, block_size: int = 1 << 20) -> str:
    digest = hashlib.sha256()
    with open(filepath, "rb") as file:
        for block in iter(lambda: file.read(block_size), b""):
            digest.update(block)
    return digest.hexdigest()


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def chunk_ranges(total: int, chunk_size: int):
    """Split ``range(total)`` into consecutive ``(start, stop)`` pairs."""
    if chunk_size < 1:
        raise ValueError("chunk_size must be positive, got %r" % chunk_size)
    return [(start, min(start + chunk_size, total)) for start in range(0, total, chunk_size)]
