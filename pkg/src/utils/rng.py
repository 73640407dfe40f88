""" Counter-based random streams keyed by (seed, replica, ...) so that parallel scheduling never changes results """
import numpy as np


def generator(seed, *keys):
    """Independent numpy Generator for the key tuple (seed, *keys).

    Philox takes a 128-bit key; the first word is the master seed, the second
    folds the remaining keys together.
    """
    words = [int(k) & 0xFFFFFFFFFFFFFFFF for k in keys]
    sub = np.random.SeedSequence(words).generate_state(2, dtype=np.uint64)[0] if words else 0
    key = np.array([int(seed) & 0xFFFFFFFFFFFFFFFF, sub], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def spins(rng, shape):
    """Symmetric +-1 array."""
    return (2 * rng.integers(0, 2, size=shape, dtype=np.int8) - 1).astype(np.int8)
