"""Counter-based random substreams and block-parallel Monte Carlo helpers.

Paths are processed in fixed-size blocks. Every block draws from its own
Philox stream keyed by ``(seed, purpose, block)``, so the numbers a path sees
do not depend on how many workers run or in which order blocks finish.
"""

from __future__ import annotations

import os
import zlib
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import ConfigError

BLOCK = 2048

_threads = None


def set_threads(n: int | None) -> None:
    """Cap worker threads for block-parallel loops (``None`` = env/default)."""
    global _threads
    if n is not None and n < 1:
        raise ValueError("threads must be >= 1")
    _threads = n


def threads() -> int:
    if _threads is not None:
        return _threads
    env = os.environ.get("AMMFG_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"AMMFG_THREADS must be a positive integer, got {env!r}") from None
        return max(1, n)
    return 1


def _tag(purpose: str) -> int:
    return zlib.crc32(purpose.encode())


def block_rng(seed: int, purpose: str, block: int, *extra: int) -> np.random.Generator:
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, int(seed) >> 32, _tag(purpose), block, *extra])
    return np.random.Generator(np.random.Philox(ss))


def blocks(n: int, size: int = BLOCK) -> list[slice]:
    return [slice(s, min(s + size, n)) for s in range(0, n, size)]


def map_blocks(fn, n: int, size: int = BLOCK) -> list:
    """Apply ``fn(block_index, slice)`` to each block; results come back in block order."""
    parts = blocks(n, size)
    w = min(threads(), len(parts))
    if w <= 1:
        return [fn(b, sl) for b, sl in enumerate(parts)]
    with ThreadPoolExecutor(max_workers=w) as ex:
        return list(ex.map(lambda args: fn(*args), enumerate(parts)))


def derive_seed(seed: int, *keys: int) -> int:
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, int(seed) >> 32, *keys])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> 1)


def mean_se(x: np.ndarray) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    n = x.size
    m = float(np.mean(x))
    if n < 2:
        return m, 0.0
    return m, float(np.std(x, ddof=1) / np.sqrt(n))
