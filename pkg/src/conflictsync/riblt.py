"""Rateless IBLT codec over 64-bit digests.

Each element set owns an infinite, prefix-stable sequence of coded symbols.
A symbol is one cell {idSum, hashSum, count}; combining two streams cell-wise
yields the stream of the symmetric difference, which a peeling decoder can
invert once enough symbols arrived.

An element participates in coded symbol 0 always and in later indices with
density about 2/(i+2).  The gap from index i to the next participation is
sampled as i + max(1, ceil((i+1.5)*(1/sqrt(u)-1))) with u drawn from a
per-element splitmix64 stream seeded by the element's digest, which realizes
survival Pr[next > j | at i] = ((i+1.5)/(j+1.5))^2.  The scalar walk and the
vectorized stream generator follow the identical float path, so both replicas
and the decoder agree on every mapping bit-for-bit.
"""

from __future__ import annotations

import heapq
import math
import struct
from typing import Iterator, NamedTuple

import numpy as np

from .digesting import (
    _MIX1,
    _MIX2,
    CHECK_SEED,
    GAMMA,
    MASK64,
    finalize64,
    finalize64_np,
    mix64,
    mix64_np,
)

_CHECK_OFFSET = (GAMMA * (CHECK_SEED + 1)) & MASK64

SYMBOL_WIRE_BYTES = 24  # idSum, hashSum, count: three 64-bit words

_U53 = 2.0**-53


class CodedSymbol(NamedTuple):
    id_sum: int
    hash_sum: int
    count: int


ZERO_SYMBOL = CodedSymbol(0, 0, 0)


def check_hash(digest: int) -> int:
    """Membership proof stored in hashSum; independent of the digest function."""
    return mix64(digest, CHECK_SEED)


def combine(local: CodedSymbol, remote: CodedSymbol) -> CodedSymbol:
    """Cell-wise combination: XOR sums, count = local minus remote."""
    return CodedSymbol(
        local.id_sum ^ remote.id_sum,
        local.hash_sum ^ remote.hash_sum,
        local.count - remote.count,
    )


def symbol_to_bytes(sym: CodedSymbol) -> bytes:
    """24-byte wire form: idSum, hashSum unsigned, count signed, little-endian."""
    return struct.pack("<QQq", sym.id_sum, sym.hash_sum, sym.count)


def symbol_from_bytes(data: bytes) -> CodedSymbol:
    return CodedSymbol(*struct.unpack("<QQq", data))


def _next_gap(i: int, out: int) -> int:
    u = ((out >> 11) + 1) * _U53  # uniform in (0, 1]
    return max(1, math.ceil((i + 1.5) * (1.0 / math.sqrt(u) - 1.0)))


def _advance(i: int, state: int) -> tuple[int, int]:
    """One mapping step: returns (next index, next PRNG state)."""
    state = (state + GAMMA) & MASK64
    return i + _next_gap(i, finalize64(state)), state


def mapping_indices(digest: int) -> Iterator[int]:
    """Infinite increasing sequence of symbol indices for one digest."""
    i, state = 0, digest & MASK64
    while True:
        yield i
        i, state = _advance(i, state)


class SymbolStream:
    """Prefix-stable infinite coded-symbol sequence for a fixed digest set.

    Symbols are generated in vectorized chunks; symbol(i) is a pure function
    of (digest set, i) regardless of how far the stream was extended.
    """

    def __init__(self, digests):
        digs = np.ascontiguousarray(digests, dtype=np.uint64)
        self._digs = digs
        self._chk = mix64_np(digs, CHECK_SEED)
        self._state = digs.copy()
        self._cur = np.zeros(len(digs), dtype=np.int64)
        self._ids: list[int] = []
        self._hs: list[int] = []
        self._cnt: list[int] = []

    def __len__(self):
        return len(self._digs)

    def symbol(self, i: int) -> CodedSymbol:
        if i < 0:
            raise IndexError("symbol index must be non-negative")
        if i >= len(self._ids):
            self._extend(i + 1)
        return CodedSymbol(self._ids[i], self._hs[i], self._cnt[i])

    def _extend(self, need: int) -> None:
        lo = len(self._ids)
        hi = max(need, 2 * lo, 64)
        size = hi - lo
        if len(self._digs) == 0:
            zeros = [0] * size
            self._ids.extend(zeros)
            self._hs.extend(zeros)
            self._cnt.extend(zeros)
            return

        cur, state = self._cur, self._state
        idx_parts, dig_parts, chk_parts = [], [], []
        sel = np.nonzero(cur < hi)[0]
        while sel.size:
            c = cur[sel]
            idx_parts.append(c)
            dig_parts.append(self._digs[sel])
            chk_parts.append(self._chk[sel])
            st = state[sel] + np.uint64(GAMMA)
            out = finalize64_np(st)
            u = ((out >> np.uint64(11)).astype(np.float64) + 1.0) * _U53
            gap = np.ceil((c.astype(np.float64) + 1.5) * (1.0 / np.sqrt(u) - 1.0))
            nxt = c + np.maximum(np.int64(1), gap.astype(np.int64))
            state[sel] = st
            cur[sel] = nxt
            sel = sel[nxt < hi]

        ids_chunk = np.zeros(size, dtype=np.uint64)
        hs_chunk = np.zeros(size, dtype=np.uint64)
        cnt_chunk = np.zeros(size, dtype=np.int64)
        if idx_parts:
            idx = np.concatenate(idx_parts)
            dig = np.concatenate(dig_parts)
            chk = np.concatenate(chk_parts)
            order = np.argsort(idx, kind="stable")
            si, sd, sc = idx[order], dig[order], chk[order]
            starts = np.nonzero(np.r_[True, si[1:] != si[:-1]])[0]
            gpos = si[starts] - lo
            ids_chunk[gpos] = np.bitwise_xor.reduceat(sd, starts)
            hs_chunk[gpos] = np.bitwise_xor.reduceat(sc, starts)
            cnt_chunk = np.bincount(idx - lo, minlength=size)
        self._ids.extend(ids_chunk.tolist())
        self._hs.extend(hs_chunk.tolist())
        self._cnt.extend(cnt_chunk.tolist())


class DifferenceDecoder:
    """Incremental peeling decoder over combined (local ⊕ remote) cells.

    Cells must arrive in contiguous index order from 0.  A pure cell (count
    ±1 with a matching check hash) reveals one digest; its contribution is
    subtracted from every received index of its mapping, and a schedule keeps
    subtracting it from future indices as they arrive.  Decoding is complete
    exactly when every received cell has returned to (0, 0, 0): count +1
    recoveries are digests only present locally, -1 only remotely.
    """

    def __init__(self):
        self._ids: list[int] = []
        self._hs: list[int] = []
        self._cnt: list[int] = []
        self._nonzero = 0
        self._pending: list[int] = []
        self._local: set[int] = set()
        self._remote: set[int] = set()
        self._sched: list[tuple[int, int, int, int, int]] = []  # (idx, d, chk, sign, prng)

    @property
    def symbols_received(self) -> int:
        return len(self._ids)

    @property
    def decoded(self) -> bool:
        return self._nonzero == 0 and len(self._ids) > 0

    @property
    def recovered_local(self) -> frozenset[int]:
        return frozenset(self._local)

    @property
    def recovered_remote(self) -> frozenset[int]:
        return frozenset(self._remote)

    def difference(self) -> tuple[frozenset[int], frozenset[int]] | None:
        """(remote-only, local-only) digests once decoded, else None."""
        if not self.decoded:
            return None
        return frozenset(self._remote), frozenset(self._local)

    def add_symbol(self, sym: CodedSymbol) -> bool:
        """Append the next combined cell; True once the difference is decoded."""
        i = len(self._ids)
        self._ids.append(sym.id_sum)
        self._hs.append(sym.hash_sum)
        self._cnt.append(sym.count)
        if sym.id_sum or sym.hash_sum or sym.count:
            self._nonzero += 1
        sched = self._sched
        while sched and sched[0][0] == i:
            _, d, chk, sign, state = heapq.heappop(sched)
            self._apply(d, chk, sign, i)
            nxt, state = _advance(i, state)
            heapq.heappush(sched, (nxt, d, chk, sign, state))
        self._check_pure(i)
        self._peel()
        return self._nonzero == 0

    def _apply(self, d: int, chk: int, sign: int, i: int) -> None:
        ids, hs, cnt = self._ids, self._hs, self._cnt
        was_zero = not (ids[i] or hs[i] or cnt[i])
        ids[i] ^= d
        hs[i] ^= chk
        cnt[i] -= sign
        if ids[i] or hs[i] or cnt[i]:
            if was_zero:
                self._nonzero += 1
            self._check_pure(i)
        elif not was_zero:
            self._nonzero -= 1

    def _check_pure(self, i: int) -> None:
        c = self._cnt[i]
        if c == 1 or c == -1:
            self._pending.append(i)

    def _peel(self) -> None:
        # Hot loop: the mapping walk and cell updates are inlined (they match
        # _advance/_apply exactly; the parity test pins the mapping).
        ids, hs, cnt = self._ids, self._hs, self._cnt
        pending = self._pending
        local, remote = self._local, self._remote
        m = len(ids)
        nonzero = self._nonzero
        mask, gamma, mix1, mix2 = MASK64, GAMMA, _MIX1, _MIX2
        ceil, sqrt, push = math.ceil, math.sqrt, heapq.heappush
        while pending:
            i = pending.pop()
            sign = cnt[i]
            if sign != 1 and sign != -1:
                continue
            d = ids[i]
            chk = hs[i]
            z = (d + _CHECK_OFFSET) & mask
            z = ((z ^ (z >> 30)) * mix1) & mask
            z = ((z ^ (z >> 27)) * mix2) & mask
            if chk != z ^ (z >> 31):
                continue  # alias of several elements; keep waiting
            if d in local or d in remote:
                continue
            (local if sign == 1 else remote).add(d)
            idx = 0
            state = d & mask
            while idx < m:
                a = ids[idx] ^ d
                b = hs[idx] ^ chk
                c = cnt[idx] - sign
                was_zero = not (ids[idx] or hs[idx] or cnt[idx])
                ids[idx] = a
                hs[idx] = b
                cnt[idx] = c
                if a or b or c:
                    if was_zero:
                        nonzero += 1
                    if c == 1 or c == -1:
                        pending.append(idx)
                elif not was_zero:
                    nonzero -= 1
                state = (state + gamma) & mask
                z = state
                z = ((z ^ (z >> 30)) * mix1) & mask
                z = ((z ^ (z >> 27)) * mix2) & mask
                u = (((z ^ (z >> 31)) >> 11) + 1) * _U53
                g = ceil((idx + 1.5) * (1.0 / sqrt(u) - 1.0))
                idx += g if g > 1 else 1
            push(self._sched, (idx, d, chk, sign, state))
        self._nonzero = nonzero


def try_decode(dec: DifferenceDecoder):
    """Peeling status: None while more symbols are needed, else the pair
    (recovered_remote, recovered_local)."""
    return dec.difference()
