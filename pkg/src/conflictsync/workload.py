"""Synthetic GSet replica pairs at a target Jaccard similarity.

For cardinality c and similarity s the pair shares sims = round(2*s*c/(1+s))
items and each side additionally holds c - sims unique ones, which makes the
achieved Jaccard index sims/(sims + 2*diffs), within integer rounding of s.
Items are random alphanumeric byte strings with lengths uniform over the
configured interval.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import GSetState, LatticeState

_ALPHABET = np.frombuffer(
    b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789", dtype=np.uint8
)

DEFAULT_CARDINALITY = 100_000
DEFAULT_LENGTH_BOUNDS = (5, 80)


@dataclass(frozen=True)
class PairSpec:
    cardinality: int = DEFAULT_CARDINALITY
    similarity: float = 0.5
    length_lo: int = DEFAULT_LENGTH_BOUNDS[0]
    length_hi: int = DEFAULT_LENGTH_BOUNDS[1]
    seed: int = 0

    def __post_init__(self):
        if self.cardinality < 1:
            raise ValueError("cardinality must be at least 1")
        if not 0.0 <= self.similarity <= 1.0:
            raise ValueError("similarity must lie in [0, 1]")
        if not 1 <= self.length_lo <= self.length_hi:
            raise ValueError("need 1 <= length_lo <= length_hi")


def shared_unique_counts(cardinality: int, similarity: float) -> tuple[int, int]:
    """(shared items, unique items per replica) hitting the target similarity."""
    sims = round(2.0 * similarity * cardinality / (1.0 + similarity))
    return sims, cardinality - sims


def _random_items(rng: np.random.Generator, count: int, lo: int, hi: int) -> list[bytes]:
    lengths = rng.integers(lo, hi + 1, size=count)
    chars = _ALPHABET[rng.integers(0, len(_ALPHABET), size=int(lengths.sum()))]
    buf = chars.tobytes()
    items: list[bytes] = []
    seen: set[bytes] = set()
    pos = 0
    for n in lengths.tolist():
        item = buf[pos : pos + n]
        pos += n
        k = 0
        while item in seen:  # uniqueness suffix on the rare collision
            item = buf[pos - n : pos] + b"~%d" % k
            k += 1
        seen.add(item)
        items.append(item)
    return items


def generate_pair(spec: PairSpec) -> tuple[GSetState, GSetState]:
    """Two GSet replicas with |A| = |B| = cardinality at the requested similarity."""
    sims, diffs = shared_unique_counts(spec.cardinality, spec.similarity)
    rng = np.random.default_rng(spec.seed)
    items = _random_items(rng, sims + 2 * diffs, spec.length_lo, spec.length_hi)
    shared = items[:sims]
    a_only = items[sims : sims + diffs]
    b_only = items[sims + diffs :]
    return GSetState(shared + a_only), GSetState(shared + b_only)


def jaccard(x_a: LatticeState, x_b: LatticeState) -> float:
    """Jaccard index of the two decomposition sets; 1.0 when both are empty."""
    if isinstance(x_a, GSetState) and isinstance(x_b, GSetState):
        sa, sb = x_a.elements, x_b.elements
    else:
        sa = {d.canonical_bytes for d in x_a.decompose()}
        sb = {d.canonical_bytes for d in x_b.decompose()}
    union = len(sa | sb)
    if union == 0:
        return 1.0
    return len(sa & sb) / union
