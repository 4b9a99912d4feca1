"""
Django management command to sample paths of the transient limit process.
Run with: python manage.py sample_path --config configs/sample_path.ini --samples 4
"""

from ._base import ExperimentCommand, small_jump_note


class Command(ExperimentCommand):
    help = (
        'Sample paths of the transient limit process (clock, skeleton, excursions, Bessel(3) tail). '
        'This is the sample-path experiment; Django command names use underscores. '
        + small_jump_note()
    )
    experiment = 'sample_path'
    title = 'TRANSIENT LIMIT PATHS'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument(
            '--samples',
            type=int,
            default=None,
            help='Number of limit paths'
        )
        parser.add_argument(
            '--dump-skeletons',
            action='store_true',
            help='Also write each skeleton τ path as a binary skeleton_NNN.bin'
        )

    def load_config(self, options):
        if options['samples']:
            options['overrides'] = [*options['overrides'], f"sample_path.n_samples={options['samples']}"]
        if options.get('dump_skeletons'):
            options['overrides'] = [*options['overrides'], 'sample_path.dump_skeletons=true']
        return super().load_config(options)
