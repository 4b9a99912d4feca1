"""
Django management command to estimate the Q-marginal of τ_h (recurrent boundaries).
Run with: python manage.py q_marginal --config configs/q_marginal.ini --h 4
"""

from ._base import ExperimentCommand, small_jump_note


class Command(ExperimentCommand):
    help = (
        'Estimate the density of τ_h under the conditioned law Q. '
        'This is the q-marginal experiment; Django command names use underscores. '
        + small_jump_note()
    )
    experiment = 'q_marginal'
    title = 'Q-MARGINAL'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument(
            '--h',
            type=float,
            default=None,
            help='Local time of the marginal'
        )

    def load_config(self, options):
        if options['h'] is not None:
            options['overrides'] = [*options['overrides'], f"q_marginal.h={options['h']!r}"]
        return super().load_config(options)
