"""Named, independent random streams derived from one run seed.

Movement, traffic and the random-control draw each get their own stream so
that changing one consumer never shifts the numbers seen by another.
"""
import zlib

import numpy as np

MOBILITY = "mobility"
TRAFFIC = "traffic"
CONTROL = "control"
LABELS = "labels"
SPLIT = "split"
FOREST = "forest"


def stream(seed: int, name: str, *index: int) -> np.random.Generator:
    key = (zlib.crc32(name.encode("ascii")),) + tuple(int(i) for i in index)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=key)))
