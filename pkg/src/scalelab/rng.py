"""Keyed random streams.

Every Monte Carlo trial draws from its own counter-based generator keyed
by ``(seed, tag, index)``, so the outcome of trial ``i`` never depends on
which worker ran it or in which order.
"""

from __future__ import annotations

import zlib

import numpy as np


def _tag_key(tag: str) -> int:
    return zlib.crc32(tag.encode("utf-8"))


def stream(seed: int, tag: str = "", index: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, _tag_key(tag), int(index)])
    return np.random.Generator(np.random.Philox(ss))
