from .errors import FraglabError, DomainError, NumericError, ConfigError
from .logger import create_logger
from .decorators import timing_decorator
from .utils import load_yaml, load_json, write_json, write_csv, sha256_file, ensure_dir, chunk_ranges
