"""Seeded random streams.

Every stochastic draw is taken from a counter-based generator keyed by the
run seed plus a fixed label, so a draw never depends on how many other draws
happened before it.
"""
from __future__ import annotations

import zlib

import numpy as np

_MASK = (1 << 32) - 1


def _words(item) -> list[int]:
    if isinstance(item, str):
        return [zlib.crc32(item.encode("utf-8"))]
    if isinstance(item, (tuple, list)):
        out: list[int] = []
        for sub in item:
            out.extend(_words(sub))
        return out
    value = int(item)
    # split into 32-bit words so negative and large seeds are accepted
    value &= (1 << 64) - 1
    return [value & _MASK, value >> 32]


def stream(seed, *labels) -> np.random.Generator:
    """Return an independent Philox generator for ``(seed, *labels)``."""
    key = _words(seed) + _words(labels)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))
