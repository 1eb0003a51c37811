"""
Command-line experiment runner.

    python -m src.fraglab convergence --config data/config/convergence.yaml --out results/convergence

Writes ``results.csv``, ``manifest.json`` and ``log.txt`` into ``--out``.
Exit codes: 0 on success, 2 on a configuration error, 3 on a numeric or
domain failure.
"""
import os
import sys
import argparse
import logging

from src.experiments import EXPERIMENT_KINDS, RESULTS_FILE, load_config, run_experiment, write_manifest
from src.utils.errors import ConfigError, DomainError, NumericError
from src.utils.logger import create_logger
from src.utils.utils import ensure_dir, write_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def parse_args(argv=None):
    parser = argparse.ArgumentParser(prog="fraglab", description=__doc__.strip().splitlines()[0])
    parser.add_argument(
        'experiment',
        choices=EXPERIMENT_KINDS,
        help='experiment kind to run'
    )
    parser.add_argument(
        '--config',
        type=str,
        required=True,
        help='YAML config (schema 1) or the manifest.json of a previous run'
    )
    parser.add_argument(
        '--seed',
        type=int,
        default=None,
        help='base seed, overrides the config'
    )
    parser.add_argument(
        '--out',
        type=str,
        default=None,
        help='output directory, overrides the config'
    )
    parser.add_argument(
        '--threads',
        type=int,
        default=None,
        help='worker processes, overrides the config (results do not depend on it)'
    )
    return parser.parse_args(argv)


def main(argv=None):
    opt = parse_args(argv)
    logger = create_logger(None)
    try:
        config = load_config(opt.config, experiment=opt.experiment, seed=opt.seed, out=opt.out, threads=opt.threads)
    except ConfigError as error:
        logger.error("Invalid configuration: %s" % error)
        return EXIT_CONFIG

    out_dir = ensure_dir(config.out)
    logger = create_logger(os.path.join(out_dir, "log.txt"))
    logger.info("Config:\n%s" % "\n".join("%s: %r" % item for item in sorted(config.to_dict().items())))
    try:
        table = run_experiment(config)
    except ConfigError as error:
        logger.error("Invalid configuration: %s" % error)
        return EXIT_CONFIG
    except (DomainError, NumericError) as error:
        logger.error("%s: %s" % (type(error).__name__, error))
        return EXIT_NUMERIC

    results_path = os.path.join(out_dir, RESULTS_FILE)
    write_csv(table, results_path)
    logger.info("Wrote %i rows to %s" % (len(table), results_path))
    write_manifest(config, table, out_dir)
    logging.shutdown()
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
