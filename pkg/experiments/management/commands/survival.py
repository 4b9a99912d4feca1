"""
Django management command to estimate the survival curve φ(t) = P(O_t) and Φ(t).
Run with: python manage.py survival --config configs/survival.ini --t-grid 1,2,5,10
"""

from ._base import ExperimentCommand, small_jump_note


class Command(ExperimentCommand):
    help = 'Estimate the survival curve φ(t) = P(O_t) and its integral Φ(t). ' + small_jump_note()
    experiment = 'survival'
    title = 'SURVIVAL CURVE'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument(
            '--t-grid',
            type=str,
            default=None,
            help='Comma-separated local-time horizons'
        )
        parser.add_argument(
            '--paths',
            type=int,
            default=None,
            help='Number of simulated paths'
        )

    def load_config(self, options):
        if options['t_grid']:
            options['overrides'] = [*options['overrides'], f"survival.t_grid={options['t_grid']}"]
        if options['paths']:
            options['overrides'] = [*options['overrides'], f"survival.n_paths={options['paths']}"]
        return super().load_config(options)
