"""
Reproducible random streams.

A master seed and a tuple of integer labels are hashed by SeedSequence into a
128-bit Philox key. Trial i then runs on the counter-based stream whose top
counter word is i, so every trial owns a disjoint block of the Philox
sequence and its draws do not depend on which worker runs it or in what order.
"""
from typing import Tuple

import numpy as np


def derive_key(master_seed: int, *labels: int) -> np.ndarray:
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(v) for v in labels))
    return seq.generate_state(2, dtype=np.uint64)


def trial_generator(key: np.ndarray, trial_index: int) -> np.random.Generator:
    counter = np.array([0, 0, 0, trial_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def block_ranges(trials: int, block_size: int) -> Tuple[Tuple[int, int], ...]:
    """Fixed [start, stop) trial-index blocks; the unit of parallel work."""
    return tuple((start, min(start + block_size, trials)) for start in range(0, trials, block_size))
