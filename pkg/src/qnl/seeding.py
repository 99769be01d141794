"""Deterministic seed derivation.

All randomness in the package flows from one master seed.  Child seeds are
derived from (master, domain, *indices) tuples via numpy's SeedSequence
hashing, which is stable across platforms and processes, so any task can be
re-run in isolation or farmed out to a worker pool without changing results.
"""

from __future__ import annotations

import numpy as np

# Domain tags keep independent random consumers out of each other's streams.
DOMAIN_SEQUENCE = 1   # Clifford index draws
DOMAIN_NOISE = 2      # additive drive-noise realizations
DOMAIN_SHOTS = 3      # binomial readout sampling
DOMAIN_DRIFT = 4      # frequency-drift synthesis
DOMAIN_FIT = 5        # synthetic/Monte-Carlo studies


def child_seed(master_seed: int, domain: int, *indices: int) -> int:
    """Derive a 64-bit child seed for one task.

    The same (master, domain, indices) always yields the same child, and
    distinct tuples yield statistically independent streams.
    """
    ss = np.random.SeedSequence((int(master_seed), int(domain), *map(int, indices)))
    return int(ss.generate_state(2, np.uint32).view(np.uint64)[0])


def rng_for(master_seed: int, domain: int, *indices: int) -> np.random.Generator:
    """Generator seeded by child_seed of the same tuple."""
    return np.random.default_rng(child_seed(master_seed, domain, *indices))
