"""Seeded random streams.

Every stochastic step draws from a Philox-4x64 counter-based generator whose
128-bit key is ``(seed, stream)``.  Philox is fully specified by its round
constants (Salmon et al., 2011), so the stream for a given key can be
regenerated outside numpy.  Only ``Generator.random`` (53-bit doubles taken
from the top bits of each 64-bit word) is used on top of the raw stream;
Gaussians come from Box-Muller below rather than numpy's ziggurat.
"""

from __future__ import annotations

import numpy as np

# Stream identifiers: second word of the Philox key.
GRAPH = 1
FEATURES = 2
SPLIT = 3
INIT = 4
DROPOUT = 5
EVAL = 6

_MASK64 = (1 << 64) - 1


def make_rng(seed: int, stream: int) -> np.random.Generator:
    """Return the generator for ``(seed, stream)``."""
    key = np.array([int(seed) & _MASK64, int(stream) & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def uniform(rng: np.random.Generator, size) -> np.ndarray:
    """Uniform doubles on [0, 1)."""
    return rng.random(size)


def normal(rng: np.random.Generator, size, loc=0.0, scale=1.0) -> np.ndarray:
    """Gaussian samples via the Box-Muller transform.

    Pairs ``(u1, u2)`` are consumed in order; the cosine branch fills even
    positions and the sine branch odd positions of the flattened output.
    """
    shape = (size,) if np.isscalar(size) else tuple(size)
    count = int(np.prod(shape))
    pairs = (count + 1) // 2
    u = rng.random(2 * pairs).reshape(pairs, 2)
    radius = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
    angle = 2.0 * np.pi * u[:, 1]
    z = np.empty(2 * pairs)
    z[0::2] = radius * np.cos(angle)
    z[1::2] = radius * np.sin(angle)
    return loc + scale * z[:count].reshape(shape)


def child_seed(rng: np.random.Generator) -> int:
    """Draw a 63-bit seed for a nested stream."""
    return int(rng.integers(0, 2**63 - 1))
