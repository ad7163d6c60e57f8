"""Classic Bloom filter sized from (n, epsilon), queried by decomposition digest.

Sizing follows m = ceil(-n ln eps / (ln 2)^2) and k = round((m/n) ln 2).
Bit positions are derived from an item's 64-bit digest through k seeded
integer mixes reduced mod m, which keeps inserts and queries vectorizable
over whole digest arrays.  Filters never produce false negatives.
"""

from __future__ import annotations

import math
import struct
from typing import Iterable

import numpy as np

from .digesting import DEFAULT_SEED, digest, mix64, mix64_np
from .lattice import Decomposition, LatticeState, join_decompositions

_POS_SEED_BASE = 0x00B100FB100FB100

_HEADER = struct.Struct("<QI")  # m as u64, k as u32: the fixed 12-byte header
HEADER_BYTES = _HEADER.size


def optimal_bits(n: int, epsilon: float) -> int:
    """Bit-array length for n items at design false-positive rate epsilon."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must be in (0, 1)")
    if n <= 0:
        return 8
    return max(8, math.ceil(-n * math.log(epsilon) / math.log(2) ** 2))


def optimal_hashes(m: int, n: int) -> int:
    if n <= 0:
        return 1
    return max(1, round((m / n) * math.log(2)))


class BloomFilter:
    """Bit-array membership sketch over Digest64 values."""

    __slots__ = ("m", "k", "n_target", "epsilon", "bits")

    def __init__(self, m: int, k: int, n_target: int = 0, epsilon: float | None = None):
        if m < 1 or k < 1:
            raise ValueError("need m >= 1 bits and k >= 1 hash functions")
        self.m = int(m)
        self.k = int(k)
        self.n_target = int(n_target)
        self.epsilon = epsilon
        self.bits = np.zeros(self.m, dtype=bool)

    @property
    def wire_bytes(self) -> int:
        """Accounted size: packed bit array plus the 12-byte (m, k) header."""
        return -(-self.m // 8) + HEADER_BYTES

    def add_digests(self, digs: np.ndarray) -> None:
        digs = np.asarray(digs, dtype=np.uint64)
        m = np.uint64(self.m)
        for j in range(self.k):
            self.bits[(mix64_np(digs, _POS_SEED_BASE + j) % m).astype(np.int64)] = True

    def query_digests(self, digs: np.ndarray) -> np.ndarray:
        digs = np.asarray(digs, dtype=np.uint64)
        m = np.uint64(self.m)
        member = np.ones(len(digs), dtype=bool)
        for j in range(self.k):
            member &= self.bits[(mix64_np(digs, _POS_SEED_BASE + j) % m).astype(np.int64)]
        return member

    def add_digest(self, dig: int) -> None:
        for j in range(self.k):
            self.bits[mix64(dig, _POS_SEED_BASE + j) % self.m] = True

    def query_digest(self, dig: int) -> bool:
        return all(
            self.bits[mix64(dig, _POS_SEED_BASE + j) % self.m] for j in range(self.k)
        )

    def to_bytes(self) -> bytes:
        """Wire layout: (m, k) header then the bit array packed LSB-first."""
        return _HEADER.pack(self.m, self.k) + np.packbits(
            self.bits, bitorder="little"
        ).tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "BloomFilter":
        m, k = _HEADER.unpack_from(data)
        f = cls(m, k)
        packed = np.frombuffer(data, dtype=np.uint8, offset=HEADER_BYTES)
        f.bits = np.unpackbits(packed, count=m, bitorder="little").astype(bool)
        return f


def build_filter_from_digests(
    digs: np.ndarray, epsilon: float, n: int | None = None
) -> BloomFilter:
    n = len(digs) if n is None else n
    m = optimal_bits(n, epsilon)
    f = BloomFilter(m, optimal_hashes(m, n), n_target=n, epsilon=epsilon)
    if len(digs):
        f.add_digests(digs)
    return f


def build_filter(
    items: Iterable[Decomposition], epsilon: float, seed: int = DEFAULT_SEED
) -> BloomFilter:
    """Filter over a collection of decompositions at the given design rate."""
    digs = np.fromiter((digest(d, seed) for d in items), dtype=np.uint64)
    return build_filter_from_digests(digs, epsilon)


def query(f: BloomFilter, d: Decomposition, seed: int = DEFAULT_SEED) -> bool:
    """True for every inserted item; true for others with probability ~epsilon."""
    return f.query_digest(digest(d, seed))


def partition(
    x: LatticeState, f: BloomFilter, seed: int = DEFAULT_SEED
) -> tuple[LatticeState, LatticeState]:
    """Split x into (matching the filter, definitely not in the filter's set)."""
    decomps = x.decompose()
    bottom = x.bottom()
    if not decomps:
        return bottom, bottom
    digs = np.fromiter((digest(d, seed) for d in decomps), dtype=np.uint64)
    member = f.query_digests(digs)
    com = join_decompositions(
        (d for d, hit in zip(decomps, member.tolist()) if hit), bottom
    )
    excl = join_decompositions(
        (d for d, hit in zip(decomps, member.tolist()) if not hit), bottom
    )
    return com, excl
