import json
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
import pandas as pd
from django.conf import settings
from django.core.management import call_command, load_command_class
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase

from simulation.stable_subordinator import read_path_dump

from experiments.models import ExperimentRun

SMALL_SURVIVAL_INI = """
[boundary]
family = sqrt_log
parameter = 1.5
f0 = 0.5

[run]
seed = 11

[survival]
t_grid = 0.5, 1, 2
n_paths = 5000
grid_points = 64
rare_event_policy = false
"""

SAMPLE_PATH_INI = """
[boundary]
family = sqrt_log
parameter = {gamma}
f0 = 0.5

[run]
seed = 3

[sample_path]
curve_horizon = 2
curve_points = 4
n_paths = 1000
"""


class ExperimentCommandTests(TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.root = Path(self.tmp.name)

    def write_config(self, name, text):
        path = self.root / name
        path.write_text(text, encoding='utf-8')
        return str(path)

    def run_command(self, name, *args, **options):
        out, err = StringIO(), StringIO()
        options.setdefault('out', str(self.root / 'results'))
        call_command(name, *args, stdout=out, stderr=err, **options)
        return json.loads(out.getvalue()), err.getvalue()

    def test_classify(self):
        config = str(Path(settings.BASE_DIR) / 'configs' / 'classify.ini')
        summary, err = self.run_command('classify', config=config)
        self.assertEqual(summary, {'classification': 'Recurrent', 'heuristic': False})
        self.assertIn('✓', err)

        summary, _ = self.run_command('classify', config=config, overrides=['boundary.parameter=1.5'])
        self.assertEqual(summary['classification'], 'Transient')

        runs = ExperimentRun.objects.filter(command='classify')
        self.assertEqual(runs.count(), 2)
        self.assertTrue(all(run.status == 'COMPLETED' for run in runs))
        run_dir = Path(runs.first().output_dir)
        self.assertTrue((run_dir / 'integral_test.csv').is_file())
        self.assertTrue((run_dir / 'manifest.json').is_file())

    def test_malformed_config_exit_code(self):
        config = self.write_config('survival.ini', SMALL_SURVIVAL_INI)
        with self.assertRaises(CommandError) as cm:
            self.run_command('survival', config=config, overrides=['survival.t_grid=2, 1'])
        self.assertEqual(cm.exception.returncode, 2)
        self.assertIn('t_grid', str(cm.exception))

    def test_survival_cache(self):
        config = self.write_config('survival.ini', SMALL_SURVIVAL_INI)
        first, _ = self.run_command('survival', config=config)
        second, err = self.run_command('survival', config=config)
        self.assertEqual(first, second)
        self.assertIn('cached', err)
        self.run_command('survival', config=config, no_cache=True)
        statuses = list(ExperimentRun.objects.order_by('id').values_list('status', flat=True))
        self.assertEqual(statuses, ['COMPLETED', 'CACHED', 'COMPLETED'])
        self.assertTrue(first['Phi_floor_ok'])

    def test_worker_count_does_not_change_outputs(self):
        config = self.write_config('survival.ini', SMALL_SURVIVAL_INI)
        outputs = []
        for workers in (1, 2):
            out = self.root / f'workers_{workers}'
            self.run_command('survival', config=config, workers=workers, out=str(out))
            run = ExperimentRun.objects.filter(output_dir__startswith=str(out)).get()
            outputs.append((Path(run.output_dir).name, (Path(run.output_dir) / 'survival.csv').read_bytes()))
        self.assertEqual(outputs[0], outputs[1])

    def test_t_grid_flag(self):
        config = self.write_config('survival.ini', SMALL_SURVIVAL_INI)
        self.run_command('survival', config=config, t_grid='0.5, 1')
        run = ExperimentRun.objects.get()
        self.assertEqual(run.config['survival']['t_grid'], [0.5, 1.0])

    def test_envelope(self):
        config = self.write_config('envelope.ini', """
[boundary]
family = sqrt_log
parameter = 1.0

[envelope]
w_kind = log_power
w_parameter = 1
log_h_points = 8
""")
        summary, _ = self.run_command('envelope', config=config)
        self.assertEqual(summary['verdict'], 'InEnvelope')
        self.assertTrue(summary['agrees'])

    def test_sample_path_recurrent_is_config_error(self):
        config = self.write_config('sample_path.ini', SAMPLE_PATH_INI.format(gamma=1.0))
        with self.assertRaises(CommandError) as cm:
            self.run_command('sample_path', config=config)
        self.assertEqual(cm.exception.returncode, 2)
        self.assertEqual(ExperimentRun.objects.get().status, 'FAILED')

    def test_short_limit_curve_is_feasibility_error(self):
        config = self.write_config('sample_path.ini', SAMPLE_PATH_INI.format(gamma=1.5))
        with self.assertRaises(CommandError) as cm:
            self.run_command('sample_path', config=config)
        self.assertEqual(cm.exception.returncode, 3)
        self.assertIn('hint', str(cm.exception))

    def manifest_of(self, command):
        run = ExperimentRun.objects.get(command=command)
        run_dir = Path(run.output_dir)
        manifest = json.loads((run_dir / 'manifest.json').read_text(encoding='utf-8'))
        return run_dir, manifest

    def test_asymptotics(self):
        config = self.write_config('asymptotics.ini', """
[boundary]
family = sqrt_log
parameter = 1.0
f0 = 0.5

[run]
seed = 13

[asymptotics]
t_grid = 5, 20
t0 = 2
n_paths = 4000
grid_points = 64
residual = true
residual_nodes = 16
""")
        summary, _ = self.run_command('asymptotics', config=config)
        self.assertEqual(summary['t0'], 2.0)
        self.assertEqual(summary['last_t'], 20.0)

        run_dir, manifest = self.manifest_of('asymptotics')
        self.assertEqual([f['path'] for f in manifest['files']], ['asymptotics.csv', 'renewal.csv'])
        self.assertGreater(manifest['path_count'], 0)
        frame = pd.read_csv(run_dir / 'asymptotics.csv')
        self.assertEqual(list(frame['t']), [2.0, 5.0, 20.0])
        self.assertIn('identity_gap', frame.columns)
        # log Φ grows like ∫ 2K/sqrt(g) for a recurrent boundary
        self.assertTrue((frame['log_growth_error'].iloc[1:] <= 0.35).all())

    def test_q_marginal(self):
        config = self.write_config('q_marginal.ini', """
[boundary]
family = sqrt_log
parameter = 1.0
f0 = 0.5

[run]
seed = 21

[q_marginal]
h = 1
bins = 8
n_paths = 4000
t_prelimit = 4
max_doublings = 0
""")
        summary, _ = self.run_command('q_marginal', config=config)
        self.assertEqual(summary['t_prelimit'], 4.0)
        self.assertGreater(summary['survivors'], 0)

        run_dir, manifest = self.manifest_of('q_marginal')
        self.assertEqual([f['path'] for f in manifest['files']], ['q_marginal.csv', 'q_marginal.json'])
        frame = pd.read_csv(run_dir / 'q_marginal.csv')
        report = json.loads((run_dir / 'q_marginal.json').read_text(encoding='utf-8'))
        self.assertEqual(len(frame), 8)
        total = frame['mass'].sum() + report['mass_below'] + report['mass_above']
        self.assertAlmostEqual(total, 1.0, places=6)
        q_hat = frame['q_hat'].dropna().to_numpy()
        self.assertTrue((np.diff(q_hat) >= -1e-9).all())

    def test_sample_path_with_skeleton_dumps(self):
        config = self.write_config('sample_path.ini', """
[boundary]
family = power
parameter = 0.1
f0 = 0.5

[run]
seed = 8

[sample_path]
n_samples = 2
clock_horizon = 2
curve_horizon = 8
curve_points = 4
n_paths = 5000
dt = 0.05
tail_duration = 1
""")
        summary, _ = self.run_command('sample_path', config=config, dump_skeletons=True)
        self.assertTrue(summary['all_constraints_satisfied'])

        run_dir, manifest = self.manifest_of('sample_path')
        names = [f['path'] for f in manifest['files']]
        self.assertIn('skeleton_000.bin', names)
        self.assertIn('skeleton_001.bin', names)
        skeleton, seed = read_path_dump(run_dir / 'skeleton_000.bin')
        self.assertEqual(seed, 8)
        self.assertEqual(skeleton.values[0], 0.0)

        samples = pd.read_csv(run_dir / 'samples.csv')
        self.assertEqual(len(samples), 2)
        self.assertTrue((samples['points'] > 2).all())
        self.assertTrue((samples['max_abs_value'] > 0).all())


class CommandHelpTests(SimpleTestCase):

    def test_help_names_experiment_and_small_jump_cut(self):
        cut = f"ε={settings.SIMULATION['SMALL_JUMP_CUT']:g}"
        for name, experiment in (('sample_path', 'sample-path'), ('q_marginal', 'q-marginal')):
            with self.subTest(command=name):
                help_text = load_command_class('experiments', name).help
                self.assertIn(experiment, help_text)
                self.assertIn(cut, help_text)
        self.assertIn(cut, load_command_class('experiments', 'survival').help)
