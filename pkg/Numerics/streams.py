"""
Random Stream Module
Splittable, reproducible random streams built on numpy's SeedSequence and the
counter-based Philox bit generator.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RandomStream:
    """
    A root seed plus the path of split indices leading to this stream.

    Two streams with the same (seed, path) produce identical draws; distinct
    paths give independent streams.
    """
    seed: int
    path: tuple = ()

    def __post_init__(self):
        if int(self.seed) < 0:
            raise ValueError(f"Stream seed must be nonnegative, got {self.seed}")
        object.__setattr__(self, 'path', tuple(int(i) for i in self.path))

    def seed_sequence(self):
        return np.random.SeedSequence(entropy=int(self.seed), spawn_key=self.path)

    def generator(self):
        """Fresh numpy Generator positioned at the start of this stream."""
        return np.random.Generator(np.random.Philox(self.seed_sequence()))

    def split(self, index):
        return stream_split(self, index)


def stream_split(stream, index):
    """
    Deterministic child stream.

    Args:
        stream (RandomStream): Parent stream
        index (int): Nonnegative child index

    Returns:
        RandomStream: Child with path extended by index
    """
    if int(index) < 0:
        raise ValueError(f"Split index must be nonnegative, got {index}")
    return RandomStream(stream.seed, stream.path + (int(index),))


def replica_stream(seed, replica, *labels):
    """Stream for replica r of a run seeded with `seed` (labels separate sub-experiments)."""
    return RandomStream(seed, tuple(labels) + (int(replica),))
