"""
Shared base of the experiment management commands.

Common flags: --config, --seed, --workers, --out, --set section.key=value
(repeatable) and --no-cache. Toolkit errors become CommandError with exit
code 2 (configuration) or 3 (budget/feasibility).
"""

import json
import logging

from django.core.management.base import BaseCommand, CommandError

from simulation.conf import get_simulation_setting
from simulation.exceptions import ToolkitError

from experiments.experiment_config import load_experiment_config
from experiments.pipeline_orchestrator import ExperimentPipeline
from experiments.results_storage import dumps_json

logger = logging.getLogger(__name__)


def small_jump_note() -> str:
    """Help-text line on the small-jump cut of the truncated sampler"""
    cut = get_simulation_setting('SMALL_JUMP_CUT')
    return (
        f"Truncated paths replace jumps of τ below ε={cut:g} by their mean drift "
        "(SIMULATION['SMALL_JUMP_CUT'] in settings; 1e-8 gives finer paths at about 100x the jump count)."
    )


class ExperimentCommand(BaseCommand):
    experiment = None
    title = ''

    def add_arguments(self, parser):
        parser.add_argument(
            '--config',
            type=str,
            default=None,
            help='INI experiment config'
        )
        parser.add_argument(
            '--seed',
            type=int,
            default=None,
            help='Master seed (overrides [run] seed)'
        )
        parser.add_argument(
            '--workers',
            type=int,
            default=None,
            help='Worker processes'
        )
        parser.add_argument(
            '--out',
            type=str,
            default=None,
            help='Output root directory'
        )
        parser.add_argument(
            '--set',
            action='append',
            default=[],
            dest='overrides',
            metavar='SECTION.KEY=VALUE',
            help='Override one config value (repeatable)'
        )
        parser.add_argument(
            '--no-cache',
            action='store_true',
            help='Recompute even when a cached result exists'
        )

    def load_config(self, options):
        return load_experiment_config(
            self.experiment,
            path=options['config'],
            overrides=options['overrides'],
            seed=options['seed'],
            workers=options['workers'],
            out=options['out'],
            cache=False if options['no_cache'] else None,
        )

    def handle(self, *args, **options):
        try:
            config = self.load_config(options)
            self.stderr.write(f'{self.title} [{config.config_hash[:12]}]')
            result = ExperimentPipeline(config).run()
        except ToolkitError as e:
            message = f'{e}'
            if e.hint:
                message += f' (hint: {e.hint})'
            raise CommandError(message, returncode=e.exit_code)

        self.report(result)
        return None

    def report(self, result):
        state = 'cached' if result.cached else f'{result.wall_clock_seconds:.1f}s'
        self.stdout.write(dumps_json(result.summary), ending='')
        self.stderr.write(self.style.SUCCESS(
            f'✓ {len(result.files)} files in {result.output_dir} ({state})'
        ))
