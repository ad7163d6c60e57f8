"""ConflictSync: digest-driven synchronization of state-based CRDTs.

Synchronization is reduced to set reconciliation over the irredundant join
decomposition of a lattice state; seven protocols combine Bloom filter
prefiltering, bucket digests, and rateless IBLT streams, and an in-memory
simulator accounts every transmitted byte.
"""

from .bloom import BloomFilter, build_filter, partition, query
from .bucketing import BucketTable, bucket_count, build_table
from .digesting import DEFAULT_SEED, digest, keyed_hash
from .lattice import (
    Decomposition,
    GSetState,
    LatticeState,
    contains,
    decompose,
    delta,
    join,
    join_many,
)
from .protocols import AlgoConfig, ProtocolError, ProtocolMachine, messages_latency
from .riblt import CodedSymbol, DifferenceDecoder, SymbolStream, combine, mapping_indices
from .simnet import SessionReport, SimulationError, classify, run_session
from .workload import PairSpec, generate_pair, jaccard

__all__ = [
    "AlgoConfig",
    "BloomFilter",
    "BucketTable",
    "CodedSymbol",
    "Decomposition",
    "DifferenceDecoder",
    "DEFAULT_SEED",
    "GSetState",
    "LatticeState",
    "PairSpec",
    "ProtocolError",
    "ProtocolMachine",
    "SessionReport",
    "SimulationError",
    "SymbolStream",
    "bucket_count",
    "build_filter",
    "build_table",
    "classify",
    "combine",
    "contains",
    "decompose",
    "delta",
    "digest",
    "generate_pair",
    "jaccard",
    "join",
    "join_many",
    "keyed_hash",
    "mapping_indices",
    "messages_latency",
    "partition",
    "query",
    "run_session",
]
