"""Named random streams derived from a single integer seed.

Each consumer asks for its own stream by name (plus optional integer
keys such as a round or fold number), so results never depend on the
order in which parallel workers draw numbers.
"""

import zlib

import numpy as np


def derived_rng(seed: int, name: str, *keys: int) -> np.random.Generator:
    tag = zlib.crc32(name.encode("utf-8"))
    ss = np.random.SeedSequence(entropy=int(seed) & (2**128 - 1), spawn_key=(tag, *map(int, keys)))
    return np.random.default_rng(ss)
