import json
import tempfile
from pathlib import Path

import pandas as pd
from django.test import SimpleTestCase

from experiments.results_storage import MANIFEST_NAME, ExperimentResultsStorage, file_checksum


class ResultsStorageTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.storage = ExperimentResultsStorage(self.tmp.name, 'ab' * 32, toolkit_version='1.0.0')
        self.storage.reset()

    def write_run(self):
        self.storage.save_frame(pd.DataFrame({'t': [1.0, 2.0], 'phi': [0.5, 1.0 / 3.0]}), 'survival.csv')
        self.storage.save_json({'classification': 'Recurrent'}, 'report.json')
        return self.storage.write_manifest({'command': 'survival'}, 1.23456, 2000, summary={'x': 1})

    def test_csv_format(self):
        self.write_run()
        raw = (self.storage.run_dir / 'survival.csv').read_bytes()
        self.assertEqual(raw, b't,phi\n1,0.5\n2,0.333333333333\n')

    def test_manifest_contents(self):
        manifest = self.write_run()
        on_disk = json.loads((self.storage.run_dir / MANIFEST_NAME).read_text(encoding='utf-8'))
        self.assertEqual(on_disk['config_hash'], 'ab' * 32)
        self.assertEqual(on_disk['path_count'], 2000)
        self.assertEqual(on_disk['wall_clock_seconds'], 1.235)
        self.assertEqual([f['path'] for f in on_disk['files']], ['report.json', 'survival.csv'])
        self.assertEqual(
            on_disk['files'][1]['sha256'], file_checksum(self.storage.run_dir / 'survival.csv')
        )
        self.assertEqual(manifest['summary'], {'x': 1})

    def test_cache_hit_and_misses(self):
        self.write_run()
        self.assertIsNotNone(self.storage.cached_manifest())

        other_version = ExperimentResultsStorage(self.tmp.name, 'ab' * 32, toolkit_version='2.0.0')
        self.assertIsNone(other_version.cached_manifest())

        (self.storage.run_dir / 'survival.csv').write_text('t,phi\n', encoding='utf-8')
        self.assertIsNone(self.storage.cached_manifest())

    def test_missing_or_broken_manifest(self):
        self.assertIsNone(self.storage.cached_manifest())
        (self.storage.run_dir / MANIFEST_NAME).write_text('{not json', encoding='utf-8')
        self.assertIsNone(self.storage.cached_manifest())

    def test_reset_removes_old_outputs(self):
        self.write_run()
        self.storage.reset()
        self.assertEqual(list(Path(self.storage.run_dir).iterdir()), [])

    def test_duplicate_output_name(self):
        self.storage.save_json({}, 'report.json')
        with self.assertRaises(ValueError):
            self.storage.save_json({}, 'report.json')

    def test_registered_binary_file_in_manifest(self):
        target = self.storage.register_file('skeleton_000.bin')
        target.write_bytes(b'\x00\x01')
        manifest = self.storage.write_manifest({'command': 'sample_path'}, 0.5, 10)
        self.assertEqual([f['path'] for f in manifest['files']], ['skeleton_000.bin'])
        self.assertEqual(manifest['files'][0]['sha256'], file_checksum(target))
        with self.assertRaises(ValueError):
            self.storage.register_file('skeleton_000.bin')
