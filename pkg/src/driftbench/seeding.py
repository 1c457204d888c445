"""Seed derivation. Every stochastic step draws from a seed derived here, never from wall-clock entropy."""

import numpy as np


def derive_seed(base, *keys):
    """Deterministically derive a 63-bit seed from ``base`` and a path of integer keys."""
    ss = np.random.SeedSequence(entropy=int(base), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def rng_for(base, *keys):
    return np.random.default_rng(derive_seed(base, *keys))
