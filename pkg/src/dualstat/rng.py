"""Deterministic random-number streams keyed by integer tuples.

Every stochastic routine in the package derives its generator from an
explicit key sequence (seed, index, ...) rather than from a shared
stateful generator.  Two consequences the rest of the code relies on:

* results are bit-identical for identical keys, independent of
  evaluation order or worker count;
* nested loops (Monte Carlo repeat -> permutation -> ...) can hand each
  level an independent stream without coordinating draw counts.

Key hashing is ``numpy.random.SeedSequence``, whose spawning/entropy
algorithm is documented as stable across platforms and versions.
"""

from __future__ import annotations

import numpy as np


def stream(*keys: int) -> np.random.Generator:
    """Return a fresh ``Generator`` for the given key tuple.

    Parameters
    ----------
    *keys : int
        Non-negative integers identifying the stream, e.g.
        ``stream(seed, permutation_index)``.
    """
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in keys]))


def derive_seed(*keys: int) -> int:
    """Collapse a key tuple into a single integer seed.

    Used where an API accepts one seed but the caller manages a family
    of streams (one per voxel, per repeat, ...).
    """
    ss = np.random.SeedSequence([int(k) for k in keys])
    return int(ss.generate_state(1, np.uint64)[0])
