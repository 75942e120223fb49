"""Counter-based random streams for reproducible, parallel Monte Carlo.

Every trial draws from its own Philox stream keyed by (master seed, trial
index), so results never depend on scheduling or worker count.
"""

import numpy as np

_MASK64 = (1 << 64) - 1


def trial_rng(master_seed: int, trial_index: int = 0) -> np.random.Generator:
    """Independent generator for one trial of one experiment.

    The Philox key packs the 64-bit master seed and the trial index, so
    streams for distinct (seed, index) pairs never collide.
    """
    if trial_index < 0:
        raise ValueError("trial_index must be nonnegative")
    key = ((master_seed & _MASK64) << 64) | (trial_index & _MASK64)
    return np.random.Generator(np.random.Philox(key=key))
