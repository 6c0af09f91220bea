"""
CLI for the steti_forecast package.
"""
import argparse
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

from pydantic import ValidationError

from .config import Phase, RunConfig, Stage, TrainConfig, load_config
from .exceptions import ConfigurationError, DatasetError, FeatureError, StetiError
from .toolkit import StetiToolkit

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

PHASE_CHOICES = [str(p) for p in Phase] + ["both"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='steti-forecast', description='Forecast spacecraft lifetimes from launch and failure dates.'
    )
    parser.add_argument('--config', '-c', type=Path, default=None, help='YAML run configuration.')
    parser.add_argument('--seed', type=int, default=None, help='Root seed for every random subsystem.')
    parser.add_argument('--jobs', '-j', type=int, default=None, help='Parallel workers for grid sweeps.')
    parser.add_argument('--out', '-o', type=Path, default=None, help='Output directory.')
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('--verbose', '-v', action='store_true', help='Debug logging.')
    verbosity.add_argument('--quiet', '-q', action='store_true', help='Warnings and errors only.')

    # --out is accepted after the subcommand too
    output = argparse.ArgumentParser(add_help=False)
    output.add_argument('--out', '-o', type=Path, default=argparse.SUPPRESS, help='Output directory.')

    commands = parser.add_subparsers(dest='command', required=True)
    commands.add_parser('ingest', parents=[output], help='Validate inputs and summarize the dataset.')
    commands.add_parser('steti-fit', parents=[output], help='Fit the closed-form lifetime trend.')

    train = commands.add_parser('train', parents=[output], help='Run the two-stage LSTM workflow.')
    train.add_argument('--phase', choices=PHASE_CHOICES, default='both')
    train.add_argument('--epochs', type=int, default=None, help='Maximum epochs per training run.')
    train.add_argument('--no-tune', action='store_true', help='Train the default hyperparameters only.')

    tune = commands.add_parser('tune', parents=[output], help='Search hyperparameters for one stage.')
    tune.add_argument('--phase', choices=[str(p) for p in Phase], default=str(Phase.time_only))
    tune.add_argument('--stage', choices=[str(s) for s in Stage], default=str(Stage.failure))
    tune.add_argument('--max-trials', type=int, default=None)

    benchmark = commands.add_parser('benchmark', parents=[output], help='Fit the regression benchmark.')
    benchmark.add_argument('--checkpoint', type=Path, default=None, help='Launch-time checkpoint to compare against.')

    scenario = commands.add_parser('scenario', parents=[output], help='Run the configured what-if sweeps.')
    scenario.add_argument('--checkpoint', type=Path, required=True)

    synth = commands.add_parser('synth', parents=[output], help='Write a synthetic censored cohort.')
    synth.add_argument('--n', type=int, default=150, help='Number of spacecraft.')
    return parser


def configure_logging(args: argparse.Namespace) -> None:
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format='%(levelname)s %(name)s: %(message)s', stream=sys.stderr)


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Loads the config file and applies every flag given on the command line."""
    config = load_config(args.config)
    update: dict = {}
    train = config.train.model_dump()
    if args.seed is not None:
        update['seed'] = args.seed
        train['seed'] = args.seed
    if args.jobs is not None:
        update['jobs'] = args.jobs
    if args.out is not None:
        update['paths'] = config.paths.model_copy(update={'output_dir': args.out})
    if getattr(args, 'epochs', None) is not None:
        train['max_epochs'] = args.epochs
        if config.tune.max_epochs is not None:
            update['tune'] = config.tune.model_copy(update={'max_epochs': min(config.tune.max_epochs, args.epochs)})
    if getattr(args, 'no_tune', False):
        update['phases'] = [p.model_copy(update={'tune': False}) for p in config.phases]
    update['train'] = TrainConfig(**train)
    return RunConfig.model_validate({**config.model_dump(), **update})


def run(args: argparse.Namespace) -> None:
    toolkit = StetiToolkit(resolve_config(args))
    if args.command == 'ingest':
        summary = toolkit.ingest()
        print(summary.to_string(index=False))
    elif args.command == 'steti-fit':
        params = toolkit.steti_fit()
        print(f'l_1959={params.l_1959!r} d={params.d!r}')
    elif args.command == 'train':
        phases = list(Phase) if args.phase == 'both' else [Phase(args.phase)]
        for report in toolkit.train(phases):
            best = report.best.best
            print(f'{report.phase}: launch-stage test rmse {best.test_rmse!r} ({best.setting}, split {best.split_ratio})')
    elif args.command == 'tune':
        best = toolkit.tune(Phase(args.phase), Stage(args.stage), args.max_trials)
        print(f'best trial {best.trial_id}: objective {best.objective!r}')
        print(best.params.model_dump_json(indent=2))
    elif args.command == 'benchmark':
        result, comparison = toolkit.benchmark(args.checkpoint)
        print(f'selected {"+".join(result.selected_variables)} at window {result.selected_window}')
        if comparison is not None:
            for label, score in comparison.rmse.items():
                print(f'{label}: rmse {score!r}')
    elif args.command == 'scenario':
        for result in toolkit.scenario(args.checkpoint):
            print(f'{result.name}: {len(result.rows)} rows')
    elif args.command == 'synth':
        directory = toolkit.synth(args.n, args.out)
        print(f'wrote {directory}')


def _message(error: StetiError) -> str:
    return str(error.args[0]) if error.args else type(error).__name__


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args)
    try:
        run(args)
    except (ConfigurationError, DatasetError, FeatureError) as e:
        print(f'error[{e.module}]: {_message(e)}', file=sys.stderr)
        return EXIT_VALIDATION
    except ValidationError as e:
        print(f'error[config]: {e}', file=sys.stderr)
        return EXIT_VALIDATION
    except StetiError as e:
        print(f'error[{e.module}]: {_message(e)}', file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as e:
        logger.debug('unhandled failure', exc_info=True)
        print(f'error[runtime]: {e}', file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
