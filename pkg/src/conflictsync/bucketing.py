"""Hash-partitioned bucket tables with order-independent digests.

A decomposition with digest h lives in bucket h mod B.  Every bucket,
including the empty ones, carries a digest: the keyed hash of its members'
digests sorted ascending and concatenated, so any two replicas holding the
same content agree on the digest regardless of insertion order.

digest_elements() folds each (index, bucket digest) pair into one 64-bit
reconcilable element whose top 32 bits are the bucket index, making the
differing buckets directly readable from a decoded symmetric difference.
"""

from __future__ import annotations

import math

import numpy as np

from .digesting import BUCKET_SEED, DEFAULT_SEED, ELEM_SEED, digest, keyed_hash, mix64_np
from .lattice import Decomposition, LatticeState, join_decompositions

_MAX_BUCKETS = 1 << 32


def bucket_count(n_decompositions: int, f_ld: float) -> int:
    """Number of buckets for a state of the given cardinality: max(1, floor(n*f_ld))."""
    if f_ld <= 0:
        raise ValueError("load factor f_ld must be positive")
    return max(1, math.floor(n_decompositions * f_ld))


class BucketTable:
    """Immutable bucket partition of a state's decompositions."""

    __slots__ = ("bucket_count", "_decomps", "_order", "_starts", "_digests", "_elements")

    def __init__(self, bucket_count: int, decomps: list[Decomposition], digs: np.ndarray):
        if bucket_count < 1:
            raise ValueError("bucket_count must be at least 1")
        self.bucket_count = int(bucket_count)
        self._decomps = decomps
        b = np.uint64(self.bucket_count)
        bucket_ids = (digs % b).astype(np.int64) if len(digs) else np.zeros(0, np.int64)
        order = np.lexsort((digs, bucket_ids))
        sorted_digs = digs[order]
        counts = np.bincount(bucket_ids, minlength=self.bucket_count)
        starts = np.zeros(self.bucket_count + 1, dtype=np.int64)
        np.cumsum(counts, out=starts[1:])
        self._order = order
        self._starts = starts

        empty = keyed_hash(b"", BUCKET_SEED)
        vec = np.full(self.bucket_count, empty, dtype=np.uint64)
        buf = sorted_digs.astype("<u8").tobytes()
        view = memoryview(buf)
        st = starts.tolist()
        for j in np.nonzero(counts)[0].tolist():
            vec[j] = keyed_hash(bytes(view[st[j] * 8 : st[j + 1] * 8]), BUCKET_SEED)
        self._digests = vec
        self._elements = None

    def __len__(self):
        return len(self._decomps)

    @property
    def digest_vector(self) -> np.ndarray:
        """One Digest64 per bucket, empty buckets included."""
        return self._digests

    def bucket_decomps(self, j: int) -> list[Decomposition]:
        idx = self._order[self._starts[j] : self._starts[j + 1]]
        return [self._decomps[i] for i in idx.tolist()]

    def bucket_state(self, j: int, bottom: LatticeState) -> LatticeState:
        return join_decompositions(self.bucket_decomps(j), bottom)

    def digest_elements(self) -> np.ndarray:
        """Reconcilable 64-bit elements: bucket index in the top 32 bits,
        truncated content digest in the bottom 32."""
        if self.bucket_count > _MAX_BUCKETS:
            raise ValueError("bucket index does not fit in 32 bits")
        if self._elements is None:
            idx = np.arange(self.bucket_count, dtype=np.uint64)
            content = mix64_np(self._digests ^ mix64_np(idx, ELEM_SEED), ELEM_SEED)
            self._elements = (idx << np.uint64(32)) | (content & np.uint64(0xFFFFFFFF))
        return self._elements


def build_table(
    x: LatticeState, n_buckets: int, seed: int = DEFAULT_SEED
) -> BucketTable:
    decomps = x.decompose()
    digs = np.fromiter((digest(d, seed) for d in decomps), dtype=np.uint64)
    return BucketTable(n_buckets, decomps, digs)


def mismatched_buckets(a: BucketTable, b: BucketTable) -> list[int]:
    """Indices whose content digests differ; both tables must share a count."""
    if a.bucket_count != b.bucket_count:
        raise ValueError("tables were built with different bucket counts")
    return np.nonzero(a.digest_vector != b.digest_vector)[0].tolist()
