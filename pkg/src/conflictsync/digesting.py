"""64-bit hashing primitives shared by filters, buckets, and coded symbols.

Two hash families live here: a keyed byte-string hash (blake2b truncated to
8 bytes) used to digest decompositions and bucket contents, and a seeded
integer mix (splitmix64 finalizer) used wherever the input is already a
64-bit word and vectorization matters.  The scalar and numpy mixes agree
bit-for-bit; a test pins that.
"""

from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1

# splitmix64 constants
GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

#: Default global hashing seed; benchmark runs may override it via the CLI.
DEFAULT_SEED = 0x00C0FFEE5EED

# Fixed domain seeds.  Both replicas of a session share them implicitly, so
# coded symbols, bucket digests, and filter bits agree across the wire.
CHECK_SEED = 0x5F3C0DE5EEDC0DE5
BUCKET_SEED = 0x00B0CCE76B0CCE76
ELEM_SEED = 0x7E1E37B17B17B17B


def keyed_hash(data: bytes, seed: int) -> int:
    """Deterministic 64-bit hash of a byte string under the given seed."""
    key = (seed & MASK64).to_bytes(8, "little")
    return int.from_bytes(
        hashlib.blake2b(data, digest_size=8, key=key).digest(), "little"
    )


def digest_bytes(data: bytes, seed: int = DEFAULT_SEED) -> int:
    """Digest64 of a decomposition's canonical byte serialization."""
    return keyed_hash(data, seed)


def digest(decomposition, seed: int = DEFAULT_SEED) -> int:
    """Digest64 of a decomposition; a pure function of its canonical bytes."""
    return keyed_hash(decomposition.canonical_bytes, seed)


def finalize64(z: int) -> int:
    """splitmix64 output mix; scalar twin of :func:`finalize64_np`."""
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def finalize64_np(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def mix64(value: int, seed: int) -> int:
    """Seeded 64-bit integer hash; distinct seeds act as independent functions."""
    return finalize64((value + GAMMA * (seed + 1)) & MASK64)


def mix64_np(values: np.ndarray, seed: int) -> np.ndarray:
    """Vectorized :func:`mix64` over a uint64 array."""
    offset = np.uint64((GAMMA * (seed + 1)) & MASK64)
    return finalize64_np(values + offset)
