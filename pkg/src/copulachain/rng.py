"""Threefry-2x32 counter-based random numbers (20 rounds).

The generator is a keyed bijection of a 64-bit counter, so draw k of a
stream is a pure function of (seed, stream, k): no state is carried and
results are identical across platforms.  Constants follow the Random123
reference; see ``tests/test_rng.py`` for its known-answer vectors.

Uniform draws combine the two output words into 53 bits::

    u = ((x0 >> 5) * 2**26 + (x1 >> 6) + 0.5) * 2**-53

which lies strictly inside (0, 1).
"""

import numpy as np

GENERATOR_ID = "threefry2x32-20/u53-open"

_ROTATIONS = (13, 15, 26, 6, 17, 29, 16, 24)
_PARITY = np.uint32(0x1BD11BDA)
_MASK32 = 0xFFFFFFFF


def _rotl(x: np.ndarray, r: int) -> np.ndarray:
    return (x << np.uint32(r)) | (x >> np.uint32(32 - r))


def threefry2x32(key: tuple[int, int], counter0, counter1, rounds: int = 20) -> tuple[np.ndarray, np.ndarray]:
    """Encrypt counter words (vectorized) under a two-word key."""
    k0, k1 = np.uint32(key[0] & _MASK32), np.uint32(key[1] & _MASK32)
    ks = (k0, k1, k0 ^ k1 ^ _PARITY)
    x0 = np.asarray(counter0, dtype=np.uint32).copy()
    x1 = np.asarray(counter1, dtype=np.uint32).copy()
    with np.errstate(over="ignore"):
        x0 += ks[0]
        x1 += ks[1]
        for r in range(rounds):
            x0 += x1
            x1 = _rotl(x1, _ROTATIONS[r % 8])
            x1 ^= x0
            if r % 4 == 3:
                s = (r + 1) // 4
                x0 += ks[s % 3]
                x1 += ks[(s + 1) % 3] + np.uint32(s)
    return x0, x1


def seed_key(seed: int) -> tuple[int, int]:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed & _MASK32, seed >> 32


def uniforms(seed: int, stream: int, start: int, count: int) -> np.ndarray:
    """Draws ``start .. start+count-1`` of a stream, each in the open interval (0, 1)."""
    if start < 0 or count < 0 or start + count > 2**32:
        raise ValueError("draw indices must fit in 32 bits")
    idx = np.arange(start, start + count, dtype=np.uint64).astype(np.uint32)
    stream_word = np.full(count, stream & _MASK32, dtype=np.uint32)
    x0, x1 = threefry2x32(seed_key(seed), idx, stream_word)
    hi = (x0 >> np.uint32(5)).astype(np.float64)
    lo = (x1 >> np.uint32(6)).astype(np.float64)
    return (hi * 67108864.0 + lo + 0.5) * (1.0 / 9007199254740992.0)
