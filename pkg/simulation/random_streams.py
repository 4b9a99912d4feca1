"""
Counter-Based Random Streams

Every simulation draws its randomness from named streams keyed by
(master seed, stream name, block index). Paths are processed in fixed-size
blocks; each block owns a Philox generator, and block results are merged in
block order. Outputs therefore do not depend on the number of workers.
"""

import logging
import zlib
from dataclasses import dataclass
from multiprocessing import Pool
from typing import Callable, List, Tuple

import numpy as np

from .conf import get_simulation_setting

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StreamFactory:
    """Hands out independent generators for one named stream"""
    seed: int
    stream: str

    @property
    def stream_key(self) -> int:
        return zlib.crc32(self.stream.encode("utf-8"))

    def generator(self, block_index: int = 0) -> np.random.Generator:
        """Philox generator for one block of this stream"""
        seq = np.random.SeedSequence(
            entropy=[int(self.seed), self.stream_key],
            spawn_key=(int(block_index),),
        )
        return np.random.Generator(np.random.Philox(seq))

    def child(self, name: str) -> "StreamFactory":
        """Independent sub-stream, e.g. 'survival' -> 'survival/one_jump'"""
        return StreamFactory(seed=self.seed, stream=f"{self.stream}/{name}")


def block_partition(n_paths: int, block_size: int = None) -> List[Tuple[int, int]]:
    """
    Split n_paths into fixed-size blocks.

    Returns:
        List of (block_index, block_size); only the last block may be short
    """
    block_size = block_size or get_simulation_setting('PATH_BLOCK_SIZE')
    blocks = []
    index = 0
    remaining = int(n_paths)
    while remaining > 0:
        size = min(block_size, remaining)
        blocks.append((index, size))
        remaining -= size
        index += 1
    return blocks


def _run_block(args):
    worker_fn, factory, block_index, block_size = args
    return worker_fn(factory.generator(block_index), block_size)


def run_blocks(
    worker_fn: Callable[[np.random.Generator, int], object],
    n_paths: int,
    factory: StreamFactory,
    workers: int = 1,
    block_size: int = None,
) -> List[object]:
    """
    Run worker_fn(rng, n) over all path blocks, possibly in a process pool.

    Args:
        worker_fn: Picklable callable simulating one block
        n_paths: Total number of paths
        factory: Stream factory of this computation
        workers: Pool size (1 runs in-process)
        block_size: Paths per block (settings default)

    Returns:
        Block results in block order
    """
    blocks = block_partition(n_paths, block_size)
    tasks = [(worker_fn, factory, index, size) for index, size in blocks]
    workers = max(1, int(workers))

    if workers == 1 or len(tasks) == 1:
        return [_run_block(task) for task in tasks]

    logger.debug(f"Running {len(tasks)} blocks of stream '{factory.stream}' on {workers} workers")
    with Pool(processes=min(workers, len(tasks))) as pool:
        return pool.map(_run_block, tasks)
