import argparse
import dataclasses
import logging
import sys

from dotenv import find_dotenv, load_dotenv

from ..config import EXPERIMENTS, load_config
from ..errors import (
    ConfigError,
    FieldConcentrationError,
    OutputExistsError,
    ResourceCapError,
)
from ..runner import ExperimentRunner
from ..settings import load_settings

EXIT_OK = 0
EXIT_VERDICT = 1
EXIT_CONFIG = 2
EXIT_RESOURCE = 3
EXIT_NUMERIC = 4
EXIT_INTERRUPTED = 130


def build_parser():
    parser = argparse.ArgumentParser(
        prog='field-concentration',
        description="Gaussian random fields conditioned on a large quadratic form",
    )
    commands = parser.add_subparsers(dest='command', required=True)

    run = commands.add_parser('run', help="run the experiment described by a YAML config")
    run.add_argument('config', help="path to the experiment config")
    run.add_argument('--out', help="results root (default: FIELDCONC_OUTPUT_DIR or 'results')")
    run.add_argument('--seed', type=int, help="override the config seed")
    run.add_argument('--workers', type=int, help="worker threads (default: FIELDCONC_WORKERS or all cores)")
    run.add_argument('--force', action='store_true', help="overwrite an existing results directory")
    run.add_argument('--verbose', '-v', action='store_true', help="debug logging")

    validate = commands.add_parser('validate', help="check a config against the schema")
    validate.add_argument('config', help="path to the experiment config")

    commands.add_parser('list-experiments', help="list the available experiments")
    return parser


def _configure_logging(level):
    logging.basicConfig(level=level, format='%(levelname)s %(name)s: %(message)s')


def _run(args, settings):
    config = load_config(args.config)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError('seed', f"must be >= 0, got {args.seed}")
        config = dataclasses.replace(config, seed=args.seed)
    if args.workers is not None and args.workers < 1:
        raise ConfigError('workers', f"must be >= 1, got {args.workers}")

    runner = ExperimentRunner(config, settings=settings, out=args.out, force=args.force, workers=args.workers)
    manifest = runner.run()
    print(f"\nResults written to {manifest.directory}")
    if manifest.passed:
        print("All verdicts passed.")
        return EXIT_OK
    print(f"Failed verdicts: {', '.join(manifest.failures)}")
    return EXIT_VERDICT


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        # Load environment variables
        load_dotenv(find_dotenv(usecwd=True))
        settings = load_settings(dotenv=False)
        verbose = getattr(args, 'verbose', False)
        _configure_logging(logging.DEBUG if verbose else settings.log_level)

        if args.command == 'list-experiments':
            for name, description in EXPERIMENTS.items():
                print(f"{name:<14} {description}")
            return EXIT_OK

        if args.command == 'validate':
            config = load_config(args.config)
            print(f"{args.config}: valid {config.experiment} config")
            return EXIT_OK

        return _run(args, settings)

    except KeyboardInterrupt:
        print("\nRun interrupted by user.")
        return EXIT_INTERRUPTED
    except (ConfigError, OutputExistsError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceCapError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_RESOURCE
    except FieldConcentrationError as e:
        print(f"Error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
