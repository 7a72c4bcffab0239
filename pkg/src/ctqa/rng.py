"""Portable deterministic random values.

Everything seeded in this codebase (synthetic volumes, default weights, the
mock embedder) draws from the Philox 4x64-10 counter-based bit generator,
keyed directly by the seed. numpy guarantees the Philox bit stream across
versions and platforms; the float conversions are spelled out here instead
of using numpy's distribution methods, whose algorithms are not covered by
that guarantee:

  uniform u in (0, 1]:   ((bits >> 11) + 1) * 2**-53
  standard normals:      Box-Muller over consecutive uniform pairs
"""
from __future__ import annotations

import math

import numpy as np


def bit_generator(seed: int) -> np.random.Philox:
    return np.random.Philox(key=seed)


def uniforms(bit_gen: np.random.Philox, n: int) -> np.ndarray:
    """n doubles in (0, 1]."""
    bits = bit_gen.random_raw(n)
    return ((bits >> np.uint64(11)) + np.uint64(1)) * (2.0 ** -53)


def normals(bit_gen: np.random.Philox, n: int) -> np.ndarray:
    """n standard-normal doubles via Box-Muller."""
    pairs = (n + 1) // 2
    u = uniforms(bit_gen, 2 * pairs)
    radius = np.sqrt(-2.0 * np.log(u[0::2]))
    angle = 2.0 * math.pi * u[1::2]
    out = np.empty(2 * pairs)
    out[0::2] = radius * np.cos(angle)
    out[1::2] = radius * np.sin(angle)
    return out[:n]
