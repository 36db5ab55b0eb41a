"""Counter-based random streams.

Every generator is Philox4x64-10 (numpy's ``Philox``) with a 128-bit key
``(stream << 64) | seed``.  Streams separate independent uses of one seed:

* ``SIM_STREAM`` - arrivals and hidden processing times of a run
* ``POLICY_STREAM`` - randomness consumed by randomised policies
* ``IDLE_STREAM`` - Monte Carlo idle-time estimates
* ``SPLIT_STREAM`` - seed splitting

``split(seed, i)`` is the first 64-bit word of the Philox block at counter
``i`` under key ``(SPLIT_STREAM << 64) | seed``.  Any Philox4x64-10
implementation reproduces it.
"""

import numpy as np

MASK64 = (1 << 64) - 1

SIM_STREAM = 0
POLICY_STREAM = 1
IDLE_STREAM = 2
SPLIT_STREAM = 0x5EED


def make_rng(seed: int, stream: int = SIM_STREAM) -> np.random.Generator:
    key = ((stream & MASK64) << 64) | (int(seed) & MASK64)
    return np.random.Generator(np.random.Philox(key=key))


def split(seed: int, index: int) -> int:
    """Derive the seed of child ``index``; deterministic and order free."""
    bitgen = np.random.Philox(key=(SPLIT_STREAM << 64) | (int(seed) & MASK64), counter=int(index))
    return int(bitgen.random_raw())
