"""In-memory duplex FIFO channel driving two machines to completion.

Every transmitted byte is classified on delivery: sketch/digest/symbol bytes
are metadata, and each state-carried decomposition is redundant when the
receiver's state already contained it at receipt time, necessary otherwise.
The channel never drops or reorders; a symbol budget guards against decoder
bugs producing unbounded streams.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from . import lattice
from .digesting import DEFAULT_SEED
from .protocols import AlgoConfig, Message, ProtocolMachine, SymStream
from .workload import jaccard


class SimulationError(RuntimeError):
    """The session aborted: stalled machines or a tripped symbol budget."""


@dataclass
class SessionReport:
    algo: str
    params: str
    similarity_requested: float | None
    similarity_measured: float
    cardinality: int
    bytes_metadata: int
    bytes_redundant_state: int
    bytes_necessary_state: int
    bytes_total: int
    message_count: int
    symbol_count: int
    converged: bool


def classify(receiver_state: lattice.LatticeState, payload_states) -> tuple[int, int]:
    """(redundant bytes, necessary bytes) of payload decompositions, judged
    against the receiver's state before the payload is merged."""
    redundant = necessary = 0
    for state in payload_states:
        for d in state.decompose():
            size = len(d.canonical_bytes)
            if receiver_state.contains_decomposition(d):
                redundant += size
            else:
                necessary += size
    return redundant, necessary


def run_session(
    config: AlgoConfig,
    x_a: lattice.LatticeState,
    x_b: lattice.LatticeState,
    seed: int = DEFAULT_SEED,
    similarity_requested: float | None = None,
    cardinality: int | None = None,
    transcript: list | None = None,
) -> SessionReport:
    """Synchronize two frozen states and account every byte.

    Pass a list as `transcript` to additionally record (direction, message)
    pairs in delivery order.
    """
    machine_a = ProtocolMachine(config, "A", x_a, seed)
    machine_b = ProtocolMachine(config, "B", x_b, seed)
    target = lattice.join(x_a, x_b)
    budget = 100 * target.cardinality() + 1000

    queue: deque[tuple[str, Message]] = deque()
    for msg in machine_a.start():
        queue.append(("B", msg))

    meta = redundant = necessary = messages = symbols = 0
    while not (machine_a.done and machine_b.done):
        if not queue:
            if machine_a.streaming:
                source, direction = machine_a, "B"
            elif machine_b.streaming:
                source, direction = machine_b, "A"
            else:
                raise SimulationError(
                    f"{config.label()}: machines stalled with no pending messages"
                )
            for msg in source.produce():
                queue.append((direction, msg))
            continue

        direction, msg = queue.popleft()
        receiver = machine_b if direction == "B" else machine_a
        meta += msg.metadata_bytes()
        red, nec = classify(receiver.X, msg.state_fields())
        redundant += red
        necessary += nec
        messages += 1
        if isinstance(msg, SymStream):
            symbols += 1
            if symbols > budget:
                raise SimulationError(
                    f"{config.label()}: symbol budget {budget} exceeded; "
                    "the decoder is not converging"
                )
        if transcript is not None:
            transcript.append((direction, msg))
        outs, _ = receiver.step(msg)
        back = "A" if direction == "B" else "B"
        for out in outs:
            queue.append((back, out))

    if queue:
        raise SimulationError(f"{config.label()}: messages left after completion")

    converged = machine_a.X == machine_b.X == target
    if cardinality is None:
        cardinality = x_a.cardinality()
    return SessionReport(
        algo=config.kind,
        params=config.params_key(),
        similarity_requested=similarity_requested,
        similarity_measured=jaccard(x_a, x_b),
        cardinality=cardinality,
        bytes_metadata=meta,
        bytes_redundant_state=redundant,
        bytes_necessary_state=necessary,
        bytes_total=meta + redundant + necessary,
        message_count=messages,
        symbol_count=symbols,
        converged=converged,
    )
