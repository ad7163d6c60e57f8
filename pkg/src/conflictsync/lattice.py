"""Join-semilattice contract and the grow-only set instantiation.

States are immutable after construction.  The reconciliation machinery only
relies on the operations declared on :class:`LatticeState`, so any lattice
with an irredundant decomposition can plug in; the shipped instance is the
grow-only set, whose decompositions are singletons and whose canonical
serialization is the raw element bytes with no framing.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from itertools import chain
from typing import Iterable


class Decomposition:
    """A join-irreducible state plus its canonical byte serialization.

    Equality and hashing follow the canonical bytes, which makes digests and
    membership tests deterministic across replicas.
    """

    __slots__ = ("state", "canonical_bytes")

    def __init__(self, state: "LatticeState", canonical_bytes: bytes):
        self.state = state
        self.canonical_bytes = canonical_bytes

    def __eq__(self, other):
        return (
            isinstance(other, Decomposition)
            and self.canonical_bytes == other.canonical_bytes
        )

    def __hash__(self):
        return hash(self.canonical_bytes)

    def __repr__(self):
        return f"Decomposition({self.canonical_bytes!r})"


class LatticeState(ABC):
    """Element of a join-semilattice with an irredundant join decomposition."""

    __slots__ = ()

    @abstractmethod
    def join(self, other: "LatticeState") -> "LatticeState":
        """Least upper bound of self and other."""

    @abstractmethod
    def leq(self, other: "LatticeState") -> bool:
        """Order test: self ⊑ other, i.e. join(self, other) == other."""

    @abstractmethod
    def bottom(self) -> "LatticeState":
        """The lattice's neutral element."""

    @abstractmethod
    def is_bottom(self) -> bool: ...

    @abstractmethod
    def decompose(self) -> list[Decomposition]:
        """Irredundant join decomposition, in no particular order."""

    def contains_decomposition(self, d: Decomposition) -> bool:
        return d.state.leq(self)

    def cardinality(self) -> int:
        """Number of decompositions, |⇓self|."""
        return len(self.decompose())

    def delta(self, other: "LatticeState") -> "LatticeState":
        """Smallest state whose join with other equals join(self, other)."""
        parts = [d for d in self.decompose() if not other.contains_decomposition(d)]
        return join_decompositions(parts, self.bottom())

    def payload_bytes(self) -> int:
        """Raw wire size of this state: sum of canonical bytes over ⇓self."""
        return sum(len(d.canonical_bytes) for d in self.decompose())


class GSetState(LatticeState):
    """Grow-only set of distinct byte strings; join is set union."""

    __slots__ = ("elements", "_decomps")

    def __init__(self, elements: Iterable[bytes] = ()):
        self.elements = frozenset(elements)
        self._decomps = None

    def add(self, element: bytes) -> "GSetState":
        """Inflationary mutator: returns the state with one more element."""
        if not isinstance(element, bytes) or not element:
            raise ValueError("GSet elements are non-empty byte strings")
        return GSetState(self.elements | {element})

    def join(self, other: "GSetState") -> "GSetState":
        if not other.elements:
            return self
        if not self.elements:
            return other
        return GSetState(self.elements | other.elements)

    def leq(self, other: "GSetState") -> bool:
        return self.elements <= other.elements

    def bottom(self) -> "GSetState":
        return _EMPTY_GSET

    def is_bottom(self) -> bool:
        return not self.elements

    def decompose(self) -> list[Decomposition]:
        if self._decomps is None:
            self._decomps = [Decomposition(GSetState((e,)), e) for e in self.elements]
        return self._decomps

    def contains_decomposition(self, d: Decomposition) -> bool:
        return d.canonical_bytes in self.elements

    def cardinality(self) -> int:
        return len(self.elements)

    def delta(self, other: "LatticeState") -> "GSetState":
        if isinstance(other, GSetState):
            missing = self.elements - other.elements
            return GSetState(missing) if missing else _EMPTY_GSET
        return super().delta(other)

    def payload_bytes(self) -> int:
        return sum(len(e) for e in self.elements)

    def __eq__(self, other):
        return isinstance(other, GSetState) and self.elements == other.elements

    def __hash__(self):
        return hash(self.elements)

    def __len__(self):
        return len(self.elements)

    def __repr__(self):
        return f"GSetState({len(self.elements)} elements)"


_EMPTY_GSET = GSetState()


def join(a: LatticeState, b: LatticeState) -> LatticeState:
    return a.join(b)


def decompose(s: LatticeState) -> list[Decomposition]:
    return s.decompose()


def delta(a: LatticeState, b: LatticeState) -> LatticeState:
    return a.delta(b)


def contains(s: LatticeState, d: Decomposition) -> bool:
    return s.contains_decomposition(d)


def join_many(states: Iterable[LatticeState], bottom: LatticeState) -> LatticeState:
    """Join an iterable of states; linear-time for GSets instead of n unions."""
    if isinstance(bottom, GSetState):
        elems = frozenset(chain.from_iterable(s.elements for s in states))
        return GSetState(elems) if elems else bottom
    out = bottom
    for s in states:
        out = out.join(s)
    return out


def join_decompositions(
    decomps: Iterable[Decomposition], bottom: LatticeState
) -> LatticeState:
    """Join decompositions back into a state.

    For GSets the canonical bytes are the elements themselves, so the joined
    state is assembled without materializing intermediate singletons.
    """
    if isinstance(bottom, GSetState):
        elems = frozenset(d.canonical_bytes for d in decomps)
        return GSetState(elems) if elems else bottom
    out = bottom
    for d in decomps:
        out = out.join(d.state)
    return out
