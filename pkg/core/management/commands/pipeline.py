import logging

from django.core.management.base import BaseCommand, CommandError

from core.config import parse_config
from core.exceptions import ConfigError, exit_code_for
from core.pipeline import SUBCOMMANDS, run_pipeline
from diagnostics.exceptions import DiagnosticsError
from evolver.exceptions import EvolverError
from profiles.exceptions import ContinuationStalled, SolverError
from caloric.exceptions import CaloricError
from stokes.exceptions import StokesError

logger = logging.getLogger(__name__)

DOMAIN_ERRORS = (ConfigError, SolverError, CaloricError, StokesError, EvolverError, DiagnosticsError)


class Command(BaseCommand):
    help = 'Run a self-similar solution pipeline: caloric, solve-profile, evolve, verify or sweep-sigma'

    def add_arguments(self, parser):
        parser.add_argument('subcommand', choices=SUBCOMMANDS)
        parser.add_argument(
            '--config',
            type=str,
            required=True,
            help='Path to the YAML run config'
        )
        parser.add_argument(
            '--out',
            type=str,
            help='Output directory (overrides output.directory)'
        )
        parser.add_argument(
            '--workers',
            type=int,
            help='Cap on FFT worker threads (overrides output.workers)'
        )
        parser.add_argument(
            '--seed',
            type=int,
            help='Seed for randomized trial fields (overrides output.seed)'
        )

    def handle(self, *args, **options):
        subcommand = options['subcommand']
        try:
            cfg = parse_config(options['config'])
            self.stdout.write(f"Running {subcommand} on n={cfg.grid.n}, L={cfg.grid.half_width}...")
            outcome = run_pipeline(cfg, subcommand, options.get('out'), options.get('workers'), options.get('seed'))
        except ContinuationStalled as e:
            self.stdout.write(self.style.WARNING(f'Last good sigma: {e.last_good_sigma}'))
            raise CommandError(str(e), returncode=exit_code_for(e))
        except DOMAIN_ERRORS as e:
            self.stdout.write(self.style.ERROR(f'{subcommand} failed: {e}'))
            raise CommandError(str(e), returncode=exit_code_for(e))
        except Exception as e:
            logger.exception(f'{subcommand} failed')
            raise CommandError(f'{subcommand} failed: {e}')

        for path in outcome.artifacts:
            self.stdout.write(f'  {path}')
        self.stdout.write(self.style.SUCCESS(
            f'{subcommand} finished in {outcome.wall_time:.2f}s, manifest {outcome.manifest}'
        ))
