"""Named, independent RNG streams.

Every source of randomness in the project (data generation, parameter init,
batch order, negative sampling, probes) draws from its own stream derived
from (seed, role). Streams with different roles are statistically independent
and consuming one never shifts another.
"""

import zlib

import numpy as np
import torch


def seed_sequence(seed: int, role: str) -> np.random.SeedSequence:
    """SeedSequence for a (seed, role) pair. Stable across runs and platforms."""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return np.random.SeedSequence([int(seed), zlib.crc32(role.encode("utf-8"))])


def numpy_rng(seed: int, role: str) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(seed, role))


def torch_generator(seed: int, role: str) -> torch.Generator:
    gen = torch.Generator()
    gen.manual_seed(int(seed_sequence(seed, role).generate_state(1, np.uint64)[0]))
    return gen
