import numpy as np
from django.test import SimpleTestCase

from simulation.random_streams import StreamFactory, block_partition, run_blocks


def _draw_block(rng, n):
    return rng.random(n)


class StreamFactoryTests(SimpleTestCase):

    def test_same_key_same_numbers(self):
        a = StreamFactory(seed=7, stream='survival').generator(3).random(5)
        b = StreamFactory(seed=7, stream='survival').generator(3).random(5)
        np.testing.assert_array_equal(a, b)

    def test_streams_and_blocks_are_distinct(self):
        base = StreamFactory(seed=7, stream='survival')
        first = base.generator(0).random(5)
        self.assertFalse(np.array_equal(first, base.generator(1).random(5)))
        self.assertFalse(np.array_equal(first, base.child('curve').generator(0).random(5)))
        self.assertFalse(np.array_equal(first, StreamFactory(seed=8, stream='survival').generator(0).random(5)))

    def test_child_names(self):
        child = StreamFactory(seed=1, stream='q').child('stage_one')
        self.assertEqual(child.stream, 'q/stage_one')
        self.assertEqual(child.seed, 1)


class BlockTests(SimpleTestCase):

    def test_partition(self):
        self.assertEqual(block_partition(5000, 2048), [(0, 2048), (1, 2048), (2, 904)])
        self.assertEqual(block_partition(0, 2048), [])

    def test_worker_count_does_not_change_results(self):
        factory = StreamFactory(seed=11, stream='test')
        serial = run_blocks(_draw_block, 5000, factory, workers=1, block_size=1000)
        parallel = run_blocks(_draw_block, 5000, factory, workers=3, block_size=1000)
        self.assertEqual(len(serial), 5)
        np.testing.assert_array_equal(np.concatenate(serial), np.concatenate(parallel))
