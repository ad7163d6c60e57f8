"""The seven convergent synchronization protocols as two-party state machines.

Every algorithm is a deterministic, message-driven machine pair sharing one
message vocabulary.  Replica A initiates; streaming algorithms emit one coded
symbol at a time through produce(), and the responder evaluates decodability
after every symbol, so a session records exactly the symbol count at first
success.

Wire accounting counts semantic content only: digests and bucket indices are
8 bytes each, a coded symbol 24 bytes, a Bloom filter its packed bits plus a
12-byte header, a transmitted bucket count 8 bytes, and state payloads their
raw decomposition bytes.  Message tags and list length framing are not
charged to the byte totals.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import compress

import numpy as np

from . import lattice, riblt
from .bloom import BloomFilter, build_filter_from_digests
from .bucketing import BucketTable, bucket_count, mismatched_buckets
from .digesting import DEFAULT_SEED, digest
from .lattice import LatticeState, join_decompositions, join_many
from .riblt import CodedSymbol, DifferenceDecoder, SymbolStream

ALGO_KINDS = ("baseline", "bu", "ra", "bura", "blbu", "blra", "blbura")

_NEEDS_EPSILON = frozenset({"blbu", "blra", "blbura"})
_NEEDS_LOAD_FACTOR = frozenset({"bu", "bura", "blbu", "blbura"})


class ProtocolError(RuntimeError):
    """Out-of-phase or malformed protocol input; the session aborts on it."""


@dataclass(frozen=True)
class AlgoConfig:
    """One benchmarked algorithm with its parameters."""

    kind: str
    epsilon: float | None = None
    f_ld: float | None = None

    def __post_init__(self):
        if self.kind not in ALGO_KINDS:
            raise ValueError(f"unknown algorithm {self.kind!r}")
        if self.kind in _NEEDS_EPSILON:
            if self.epsilon is None or not 0.0 < self.epsilon < 1.0:
                raise ValueError(f"{self.kind} needs epsilon in (0, 1)")
        elif self.epsilon is not None:
            raise ValueError(f"{self.kind} takes no epsilon")
        if self.kind in _NEEDS_LOAD_FACTOR:
            if self.f_ld is None or self.f_ld <= 0:
                raise ValueError(f"{self.kind} needs a positive load factor")
        elif self.f_ld is not None:
            raise ValueError(f"{self.kind} takes no load factor")

    def label(self) -> str:
        base = {
            "baseline": "Baseline",
            "bu": "Bu",
            "ra": "Rateless",
            "bura": "BuRa",
            "blbu": "BlBu",
            "blra": "BlRa",
            "blbura": "BlBuRa",
        }[self.kind]
        params = []
        if self.epsilon is not None:
            params.append(f"eps={self.epsilon * 100:g}%")
        if self.f_ld is not None:
            params.append(f"f_ld={self.f_ld:g}")
        return f"{base}[{', '.join(params)}]" if params else base

    def params_key(self) -> str:
        parts = []
        if self.epsilon is not None:
            parts.append(f"eps={self.epsilon:g}")
        if self.f_ld is not None:
            parts.append(f"f_ld={self.f_ld:g}")
        return ";".join(parts)


def messages_latency(config: AlgoConfig) -> tuple[int, float]:
    """(non-stream message count, round trips); streamed symbols ride between
    the fixed messages of ra and bura, whose latency is therefore a floor."""
    return {
        "baseline": (2, 1.0),
        "bu": (3, 1.5),
        "ra": (2, 1.5),
        "bura": (2, 1.5),
        "blbu": (4, 2.0),
        "blra": (4, 2.0),
        "blbura": (4, 2.0),
    }[config.kind]


# --------------------------------------------------------------------------
# messages

class Message:
    __slots__ = ()

    def metadata_bytes(self) -> int:
        return 0

    def state_fields(self) -> tuple[LatticeState, ...]:
        return ()

    def payload_bytes(self) -> int:
        return sum(s.payload_bytes() for s in self.state_fields())

    def total_bytes(self) -> int:
        return self.metadata_bytes() + self.payload_bytes()


class Sync(Message):
    __slots__ = ("state",)

    def __init__(self, state):
        self.state = state

    def state_fields(self):
        return (self.state,)


class MissingState(Message):
    __slots__ = ("state",)

    def __init__(self, state):
        self.state = state

    def state_fields(self):
        return (self.state,)


class Digests(Message):
    __slots__ = ("bucket_count", "vector")

    def __init__(self, bucket_count, vector):
        self.bucket_count = bucket_count
        self.vector = vector

    def metadata_bytes(self):
        return 8 + 8 * len(self.vector)


class MismatchUpload(Message):
    """Full contents of the named differing buckets, plus an optional
    exclusive-state payload in the Bloom-combined flows."""

    __slots__ = ("indices", "bucket_states", "excl_state")

    def __init__(self, indices, bucket_states, excl_state=None):
        self.indices = indices
        self.bucket_states = bucket_states
        self.excl_state = excl_state

    def metadata_bytes(self):
        return 8 * len(self.indices)

    def state_fields(self):
        if self.excl_state is None:
            return tuple(self.bucket_states)
        return tuple(self.bucket_states) + (self.excl_state,)


class MismatchDeltas(Message):
    """Per-bucket minimal deltas, aligned with the upload's index order."""

    __slots__ = ("bucket_states",)

    def __init__(self, bucket_states):
        self.bucket_states = bucket_states

    def state_fields(self):
        return tuple(self.bucket_states)


class Bloom(Message):
    __slots__ = ("filter",)

    def __init__(self, filter: BloomFilter):
        self.filter = filter

    def metadata_bytes(self):
        return self.filter.wire_bytes


class InitStream(Message):
    __slots__ = ("filter", "excl_state", "bucket_count", "digests")

    def __init__(self, filter, excl_state, bucket_count=None, digests=None):
        self.filter = filter
        self.excl_state = excl_state
        self.bucket_count = bucket_count
        self.digests = digests

    def metadata_bytes(self):
        n = self.filter.wire_bytes
        if self.bucket_count is not None:
            n += 8
        if self.digests is not None:
            n += 8 * len(self.digests)
        return n

    def state_fields(self):
        return (self.excl_state,)


class SymStream(Message):
    __slots__ = ("index", "symbol", "bucket_count")

    def __init__(self, index, symbol, bucket_count=None):
        self.index = index
        self.symbol = symbol
        self.bucket_count = bucket_count

    def metadata_bytes(self):
        return riblt.SYMBOL_WIRE_BYTES + (8 if self.bucket_count is not None else 0)


class EOS(Message):
    __slots__ = ("digests", "state", "state2")

    def __init__(self, digests, state, state2=None):
        self.digests = digests
        self.state = state
        self.state2 = state2

    def metadata_bytes(self):
        return 8 * len(self.digests)

    def state_fields(self):
        if self.state2 is None:
            return (self.state,)
        return (self.state, self.state2)


class MissingFP(Message):
    __slots__ = ("state",)

    def __init__(self, state):
        self.state = state

    def state_fields(self):
        return (self.state,)


# --------------------------------------------------------------------------
# machines

class _StateView:
    """Digest-side view of a frozen state's decompositions."""

    __slots__ = ("decomps", "digests", "_by_digest")

    def __init__(self, state: LatticeState, seed: int):
        self.decomps = state.decompose()
        self.digests = np.fromiter(
            (digest(d, seed) for d in self.decomps),
            dtype=np.uint64,
            count=len(self.decomps),
        )
        self._by_digest = None

    def by_digest(self) -> dict:
        if self._by_digest is None:
            self._by_digest = dict(zip(self.digests.tolist(), self.decomps))
        return self._by_digest

    def split(self, mask: np.ndarray):
        """(decomps, digests) pairs for the mask and its complement."""
        hits = mask.tolist()
        com = list(compress(self.decomps, hits))
        excl = list(compress(self.decomps, (not h for h in hits)))
        return (com, self.digests[mask]), (excl, self.digests[~mask])


class ProtocolMachine:
    """One replica half of a synchronization session.

    Deterministic given (config, state, seed, message history).  start() is
    only valid on the initiator; produce() yields the next coded symbol while
    the machine is in a streaming phase.
    """

    def __init__(self, config: AlgoConfig, role: str, state: LatticeState,
                 seed: int = DEFAULT_SEED):
        if role not in ("A", "B"):
            raise ValueError("role must be 'A' or 'B'")
        self.config = config
        self.role = role
        self.X = state
        self.seed = seed
        self.done = False
        self.streaming = False
        self._phase = "start" if role == "A" else "await_first"
        self._view: _StateView | None = None
        # streaming / decoding scratch
        self._stream_out: SymbolStream | None = None
        self._next_out = 0
        self._announce_count: int | None = None
        self._stream_local: SymbolStream | None = None
        self._decoder: DifferenceDecoder | None = None
        self._expect_index = 0
        # bloom / bucket scratch
        self._table: BucketTable | None = None
        self._com_view: tuple[list, np.ndarray] | None = None
        self._excl_state: LatticeState | None = None

    # -- helpers ------------------------------------------------------------

    def _require(self, condition: bool, why: str) -> None:
        if not condition:
            raise ProtocolError(f"{self.config.kind} {self.role}: {why}")

    def view(self) -> _StateView:
        # Built before any merge in every flow, so it reflects the frozen
        # session-start state.
        if self._view is None:
            self._view = _StateView(self.X, self.seed)
        return self._view

    def _merge(self, *states: LatticeState) -> None:
        self.X = join_many(states, self.X.bottom()).join(self.X)

    def _emit_symbol(self) -> SymStream:
        i = self._next_out
        self._next_out += 1
        msg = SymStream(i, self._stream_out.symbol(i), self._announce_count)
        self._announce_count = None
        return msg

    def _feed_symbol(self, msg: SymStream) -> bool:
        self._require(msg.index == self._expect_index, "symbol out of order")
        self._expect_index += 1
        local = self._stream_local.symbol(msg.index)
        return self._decoder.add_symbol(riblt.combine(local, msg.symbol))

    def _build_table(self, decomps, digs, count: int) -> BucketTable:
        return BucketTable(count, decomps, digs)

    def _bucket_states(self, table: BucketTable, indices) -> list[LatticeState]:
        bottom = self.X.bottom()
        return [table.bucket_state(j, bottom) for j in indices]

    def _bucket_deltas(self, table: BucketTable, indices, uploaded) -> list[LatticeState]:
        bottom = self.X.bottom()
        return [
            lattice.delta(table.bucket_state(j, bottom), up)
            for j, up in zip(indices, uploaded)
        ]

    def _decoded_bucket_indices(self) -> list[int]:
        dec = self._decoder
        idxs = {int(e) >> 32 for e in dec.recovered_local}
        idxs.update(int(e) >> 32 for e in dec.recovered_remote)
        return sorted(idxs)

    def _lookup_state(self, digs, by_digest) -> LatticeState:
        # Unknown digests (hash collisions, negligible by design) are skipped.
        found = (by_digest.get(d) for d in sorted(digs))
        return join_decompositions(
            (d for d in found if d is not None), self.X.bottom()
        )

    # -- public api ----------------------------------------------------------

    def start(self) -> list[Message]:
        self._require(self.role == "A", "start() called on the responder")
        self._require(self._phase == "start", "start() called twice")
        kind = self.config.kind
        if kind == "baseline":
            self._phase = "await_missing"
            return [Sync(self.X)]
        if kind == "bu":
            view = self.view()
            count = bucket_count(len(view.decomps), self.config.f_ld)
            self._table = self._build_table(view.decomps, view.digests, count)
            self._phase = "await_upload"
            return [Digests(count, self._table.digest_vector)]
        if kind == "ra":
            self._stream_out = SymbolStream(self.view().digests)
            self.streaming = True
            self._phase = "await_eos"
            return [self._emit_symbol()]
        if kind == "bura":
            view = self.view()
            count = bucket_count(len(view.decomps), self.config.f_ld)
            self._table = self._build_table(view.decomps, view.digests, count)
            self._stream_out = SymbolStream(self._table.digest_elements())
            self._announce_count = count
            self.streaming = True
            self._phase = "await_upload"
            return [self._emit_symbol()]
        # blbu / blra / blbura all open with the initiator's filter
        view = self.view()
        bf = build_filter_from_digests(view.digests, self.config.epsilon)
        self._phase = "await_init"
        return [Bloom(bf)]

    def produce(self) -> list[Message]:
        self._require(self.streaming, "produce() called while not streaming")
        return [self._emit_symbol()]

    def step(self, msg: Message) -> tuple[list[Message], bool]:
        handler = _HANDLERS.get((self.config.kind, self.role, self._phase))
        if handler is None:
            raise ProtocolError(
                f"{self.config.kind} {self.role}: no transition from {self._phase}"
            )
        out = handler(self, msg)
        return out, self.done

    # -- baseline -------------------------------------------------------------

    def _baseline_b_sync(self, msg: Message) -> list[Message]:
        self._require(isinstance(msg, Sync), "expected Sync")
        d = lattice.delta(self.X, msg.state)
        self._merge(msg.state)
        self.done = True
        return [MissingState(d)]

    def _baseline_a_missing(self, msg: Message) -> list[Message]:
        self._require(isinstance(msg, MissingState), "expected MissingState")
        self._merge(msg.state)
        self.done = True
        return []

    # -- bucketing ------------------------------------------------------------

    def _bu_b_digests(self, msg: Message) -> list[Message]:
        self._require(isinstance(msg, Digests), "expected Digests")
        view = self.view()
        self._table = self._build_table(view.decomps, view.digests, msg.bucket_count)
        diff = np.nonzero(self._table.digest_vector != msg.vector)[0].tolist()
        self._phase = "await_deltas"
        return [MismatchUpload(diff, self._bucket_states(self._table, diff))]

    def _upload_to_deltas(self, msg: Message) -> list[Message]:
        """Shared by bu and bura initiators: answer an upload with deltas."""
        self._require(isinstance(msg, MismatchUpload), "expected MismatchUpload")
        self.streaming = False
        deltas = self._bucket_deltas(self._table, msg.indices, msg.bucket_states)
        self._merge(*msg.bucket_states)
        self.done = True
        return [MismatchDeltas(deltas)]

    def _merge_deltas(self, msg: Message) -> list[Message]:
        self._require(isinstance(msg, MismatchDeltas), "expected MismatchDeltas")
        self._merge(*msg.bucket_states)
        self.done = True
        return []

    # -- rateless ---------------------------------------------------------------

    def _ra_b_symbol(self, msg: Message) -> list[Message]:
        self._require(isinstance(msg, SymStream), "expected SymStream")
        if self._decoder is None:
            view = self.view()
            self._stream_local = SymbolStream(view.digests)
            self._decoder = DifferenceDecoder()
        if not self._feed_symbol(msg):
            return []
        local_only = self._decoder.recovered_local  # H_B \ H_A
        remote_only = self._decoder.recovered_remote  # H_A \ H_B
        missing_here = self._lookup_state(local_only, self.view().by_digest())
        self._phase = "await_missing"
        return [EOS(sorted(remote_only), missing_here)]

    def _ra_a_eos(self, msg: Message) -> list[Message]:
        self._require(isinstance(msg, EOS), "expected EOS")
        self.streaming = False
        mine_only = self._lookup_state(msg.digests, self.view().by_digest())
        self._merge(msg.state)
        self.done = True
        return [MissingState(mine_only)]

    def _ra_b_missing(self, msg: Message) -> list[Message]:
        self._require(isinstance(msg, MissingState), "expected MissingState")
        self._merge(msg.state)
        self.done = True
        return []

    # -- bucketing + rateless -----------------------------------------------------

    def _bura_b_symbol(self, msg: Message) -> list[Message]:
        self._require(isinstance(msg, SymStream), "expected SymStream")
        if self._decoder is None:
            self._require(msg.bucket_count is not None, "missing bucket count")
            view = self.view()
            self._table = self._build_table(view.decomps, view.digests, msg.bucket_count)
            self._stream_local = SymbolStream(self._table.digest_elements())
            self._decoder = DifferenceDecoder()
        if not self._feed_symbol(msg):
            return []
        diff = self._decoded_bucket_indices()
        self._phase = "await_deltas"
        return [MismatchUpload(diff, self._bucket_states(self._table, diff))]

    # -- bloom + rateless -----------------------------------------------------------

    def _bl_partition(self, bf: BloomFilter):
        """Partition this replica by the peer's filter; stashes the exclusive
        state and returns the potentially-common (decomps, digests)."""
        view = self.view()
        mask = bf.query_digests(view.digests)
        (com, com_digs), (excl, _) = view.split(mask)
        self._excl_state = join_decompositions(excl, self.X.bottom())
        self._com_view = (com, com_digs)
        return com, com_digs

    def _blra_b_bloom(self, msg: Message) -> list[Message]:
        self._require(isinstance(msg, Bloom), "expected Bloom")
        com, com_digs = self._bl_partition(msg.filter)
        bf_b = build_filter_from_digests(com_digs, self.config.epsilon)
        self._stream_out = SymbolStream(com_digs)
        self.streaming = True
        self._phase = "await_eos"
        return [InitStream(bf_b, self._excl_state)]

    def _blra_a_init(self, msg: Message) -> list[Message]:
        self._require(isinstance(msg, InitStream), "expected InitStream")
        com, com_digs = self._bl_partition(msg.filter)
        self._stream_local = SymbolStream(com_digs)
        self._decoder = DifferenceDecoder()
        self._merge(msg.excl_state)
        self._phase = "decode"
        return []

    def _blra_a_symbol(self, msg: Message) -> list[Message]:
        self._require(isinstance(msg, SymStream), "expected SymStream")
        if not self._feed_symbol(msg):
            return []
        com, com_digs = self._com_view
        by_digest = dict(zip(com_digs.tolist(), com))
        fp_here = self._lookup_state(self._decoder.recovered_local, by_digest)
        self._phase = "await_fp"
        return [EOS(sorted(self._decoder.recovered_remote), fp_here, self._excl_state)]

    def _blra_b_eos(self, msg: Message) -> list[Message]:
        self._require(isinstance(msg, EOS), "expected EOS")
        self.streaming = False
        com, com_digs = self._com_view
        by_digest = dict(zip(com_digs.tolist(), com))
        fp_here = self._lookup_state(msg.digests, by_digest)
        self._merge(msg.state, msg.state2)
        self.done = True
        return [MissingFP(fp_here)]

    def _blra_a_fp(self, msg: Message) -> list[Message]:
        self._require(isinstance(msg, MissingFP), "expected MissingFP")
        self._merge(msg.state)
        self.done = True
        return []

    # -- bloom + bucketing -------------------------------------------------------

    def _blbu_b_bloom(self, msg: Message) -> list[Message]:
        self._require(isinstance(msg, Bloom), "expected Bloom")
        view = self.view()
        com, com_digs = self._bl_partition(msg.filter)
        bf_b = build_filter_from_digests(com_digs, self.config.epsilon)
        count = bucket_count(len(view.decomps), self.config.f_ld)
        self._table = self._build_table(com, com_digs, count)
        self._phase = "await_upload"
        return [
            InitStream(bf_b, self._excl_state, bucket_count=count,
                       digests=self._table.digest_vector)
        ]

    def _blbu_a_init(self, msg: Message) -> list[Message]:
        self._require(isinstance(msg, InitStream), "expected InitStream")
        com, com_digs = self._bl_partition(msg.filter)
        table = self._build_table(com, com_digs, msg.bucket_count)
        diff = np.nonzero(table.digest_vector != msg.digests)[0].tolist()
        uploads = self._bucket_states(table, diff)
        self._merge(msg.excl_state)
        self._phase = "await_deltas"
        return [MismatchUpload(diff, uploads, excl_state=self._excl_state)]

    def _blbu_b_upload(self, msg: Message) -> list[Message]:
        self._require(isinstance(msg, MismatchUpload), "expected MismatchUpload")
        self.streaming = False
        deltas = self._bucket_deltas(self._table, msg.indices, msg.bucket_states)
        self._merge(*msg.state_fields())
        self.done = True
        return [MismatchDeltas(deltas)]

    # -- bloom + bucketing + rateless ------------------------------------------------

    def _blbura_b_bloom(self, msg: Message) -> list[Message]:
        self._require(isinstance(msg, Bloom), "expected Bloom")
        view = self.view()
        com, com_digs = self._bl_partition(msg.filter)
        bf_b = build_filter_from_digests(com_digs, self.config.epsilon)
        count = bucket_count(len(view.decomps), self.config.f_ld)
        self._table = self._build_table(com, com_digs, count)
        self._stream_out = SymbolStream(self._table.digest_elements())
        self.streaming = True
        self._phase = "await_upload"
        return [InitStream(bf_b, self._excl_state, bucket_count=count)]

    def _blbura_a_init(self, msg: Message) -> list[Message]:
        self._require(isinstance(msg, InitStream), "expected InitStream")
        com, com_digs = self._bl_partition(msg.filter)
        self._table = self._build_table(com, com_digs, msg.bucket_count)
        self._stream_local = SymbolStream(self._table.digest_elements())
        self._decoder = DifferenceDecoder()
        self._merge(msg.excl_state)
        self._phase = "decode"
        return []

    def _blbura_a_symbol(self, msg: Message) -> list[Message]:
        self._require(isinstance(msg, SymStream), "expected SymStream")
        if not self._feed_symbol(msg):
            return []
        diff = self._decoded_bucket_indices()
        uploads = self._bucket_states(self._table, diff)
        self._phase = "await_deltas"
        return [MismatchUpload(diff, uploads, excl_state=self._excl_state)]


_HANDLERS = {
    ("baseline", "B", "await_first"): ProtocolMachine._baseline_b_sync,
    ("baseline", "A", "await_missing"): ProtocolMachine._baseline_a_missing,
    ("bu", "B", "await_first"): ProtocolMachine._bu_b_digests,
    ("bu", "A", "await_upload"): ProtocolMachine._upload_to_deltas,
    ("bu", "B", "await_deltas"): ProtocolMachine._merge_deltas,
    ("ra", "B", "await_first"): ProtocolMachine._ra_b_symbol,
    ("ra", "A", "await_eos"): ProtocolMachine._ra_a_eos,
    ("ra", "B", "await_missing"): ProtocolMachine._ra_b_missing,
    ("bura", "B", "await_first"): ProtocolMachine._bura_b_symbol,
    ("bura", "A", "await_upload"): ProtocolMachine._upload_to_deltas,
    ("bura", "B", "await_deltas"): ProtocolMachine._merge_deltas,
    ("blra", "B", "await_first"): ProtocolMachine._blra_b_bloom,
    ("blra", "A", "await_init"): ProtocolMachine._blra_a_init,
    ("blra", "A", "decode"): ProtocolMachine._blra_a_symbol,
    ("blra", "B", "await_eos"): ProtocolMachine._blra_b_eos,
    ("blra", "A", "await_fp"): ProtocolMachine._blra_a_fp,
    ("blbu", "B", "await_first"): ProtocolMachine._blbu_b_bloom,
    ("blbu", "A", "await_init"): ProtocolMachine._blbu_a_init,
    ("blbu", "B", "await_upload"): ProtocolMachine._blbu_b_upload,
    ("blbu", "A", "await_deltas"): ProtocolMachine._merge_deltas,
    ("blbura", "B", "await_first"): ProtocolMachine._blbura_b_bloom,
    ("blbura", "A", "await_init"): ProtocolMachine._blbura_a_init,
    ("blbura", "A", "decode"): ProtocolMachine._blbura_a_symbol,
    ("blbura", "B", "await_upload"): ProtocolMachine._blbu_b_upload,
    ("blbura", "A", "await_deltas"): ProtocolMachine._merge_deltas,
}
