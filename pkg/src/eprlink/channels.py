"""Quantum and classical channels between the protocol parties.

The wiring mirrors the deployment this simulator targets: two relay nodes
(TP1, TP2) each share a quantum channel and an authenticated classical channel
with every end party, while the end parties share no direct link with each
other.  Classical traffic is public but tamper-proof; quantum traffic can be
tapped by registered interceptors while in flight.  Every send is appended to
a replayable transcript.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .qcore import Basis, QuantumRegister, QubitRef


class TopologyError(RuntimeError):
    """Raised when a send is attempted on a channel that does not exist."""


class ChannelContractError(RuntimeError):
    """Raised when code violates a channel guarantee (e.g. classical tampering)."""


@dataclass(frozen=True, order=True)
class PartyId:
    """Stable identity of a protocol participant or adversary."""

    name: str

    def __str__(self) -> str:
        return self.name


ALICE = PartyId("Alice")
BOB = PartyId("Bob")
TP1 = PartyId("TP1")
TP2 = PartyId("TP2")
EVE = PartyId("Eve")


def participant(k: int) -> PartyId:
    """End party number k of a multi-party run (1 is Alice, 2 is Bob)."""
    if k < 1:
        raise ValueError("participant index starts at 1")
    if k == 1:
        return ALICE
    if k == 2:
        return BOB
    return PartyId(f"P{k}")


def end_parties(k: int) -> List[PartyId]:
    """The k end parties of a run, in fixed order."""
    if k < 2:
        raise ValueError("a run needs at least two end parties")
    return [participant(i + 1) for i in range(k)]


class TrojanKind(Enum):
    INVISIBLE_PHOTON = "invisible_photon"
    DELAY_PHOTON = "delay_photon"


@dataclass(frozen=True)
class TrojanTag:
    """Marker for a probe hidden in a transmission slot."""

    kind: TrojanKind
    planted_by: PartyId


@dataclass(frozen=True)
class QuantumMessage:
    sender: PartyId
    receiver: PartyId
    qubits: Tuple[QubitRef, ...]


# --- classical payloads -----------------------------------------------------
#
# The payload vocabulary is deliberately tiny; a transcript audit checks that
# honest runs never send anything outside it.  Stage labels say which
# discussion a positions/results message belongs to.

STAGE_DECOY = "decoy_check"  # sender-chosen decoys verified after distribution
STAGE_PAIR_CHECK = "pair_check"  # correlation spot check on payload pairs
STAGE_RELAY_IN = "relay_in_check"  # decoy discussion on the Alice -> TP2 leg
STAGE_RELAY_OUT = "relay_out_check"  # decoy discussion on the TP2 -> Bob leg


@dataclass(frozen=True)
class Ack:
    KIND = "ack"
    note: str = ""

    def summary(self) -> str:
        return "ack" if not self.note else f"ack ({self.note})"


@dataclass(frozen=True)
class PositionsBases:
    """Announcement of which slots to measure and in which bases."""

    KIND = "positions_bases"
    stage: str
    positions: Tuple[int, ...]
    bases: Tuple[Basis, ...]

    def summary(self) -> str:
        return f"{self.stage}: {len(self.positions)} positions+bases"


@dataclass(frozen=True)
class MeasurementResults:
    KIND = "measurement_results"
    stage: str
    bits: Tuple[int, ...]

    def summary(self) -> str:
        return f"{self.stage}: {len(self.bits)} result bits"


@dataclass(frozen=True)
class AbortNotice:
    KIND = "abort"
    stage: str
    reason: str

    def summary(self) -> str:
        return f"abort at {self.stage}: {self.reason}"


@dataclass(frozen=True)
class MacTag:
    KIND = "mac_tag"
    digest: str

    def summary(self) -> str:
        return "mac tag"


@dataclass(frozen=True)
class ClassicalMessage:
    sender: PartyId
    receiver: PartyId
    payload: object


# --- transcript --------------------------------------------------------------


@dataclass(frozen=True)
class Event:
    step: int
    kind: str
    frm: str
    to: str
    payload_summary: str


class Transcript:
    """Append-only event log; replaying a seed reproduces it exactly."""

    def __init__(self) -> None:
        self.events: List[Event] = []

    def log(self, kind: str, frm: PartyId, to: PartyId, payload_summary: str) -> int:
        step = len(self.events)
        self.events.append(Event(step, kind, str(frm), str(to), payload_summary))
        return step

    def __iter__(self) -> Iterator[Event]:
        return iter(self.events)

    def __len__(self) -> int:
        return len(self.events)

    def to_jsonl(self) -> str:
        lines = []
        for e in self.events:
            lines.append(
                json.dumps(
                    {
                        "step": e.step,
                        "kind": e.kind,
                        "from": e.frm,
                        "to": e.to,
                        "payload_summary": e.payload_summary,
                    }
                )
            )
        return "\n".join(lines)


# --- topology ----------------------------------------------------------------


@dataclass(frozen=True)
class Topology:
    """Which undirected quantum/classical links exist."""

    quantum_edges: frozenset
    classical_edges: frozenset

    def has_quantum(self, a: PartyId, b: PartyId) -> bool:
        return frozenset((a, b)) in self.quantum_edges

    def has_classical(self, a: PartyId, b: PartyId) -> bool:
        return frozenset((a, b)) in self.classical_edges

    @classmethod
    def for_parties(cls, parties: Sequence[PartyId]) -> "Topology":
        """Star topology: each relay node linked to every end party, both media."""
        edges = frozenset(frozenset((tp, p)) for tp in (TP1, TP2) for p in parties)
        return cls(quantum_edges=edges, classical_edges=edges)

    @classmethod
    def two_party(cls) -> "Topology":
        return _TWO_PARTY


_TWO_PARTY = Topology.for_parties([ALICE, BOB])


# --- network -----------------------------------------------------------------


class Network:
    """Message fabric for one run: channels, transcript, interceptors, tags."""

    def __init__(
        self,
        topology: Topology,
        register: Optional[QuantumRegister] = None,
        rng: Optional[np.random.Generator] = None,
    ) -> None:
        self.topology = topology
        self.register = register if register is not None else QuantumRegister()
        self.rng = rng if rng is not None else np.random.default_rng()
        self.transcript = Transcript()
        self.interceptors: List[object] = []
        # Parties equipped with ideal probe filters (photon-number split and
        # wavelength); scanning without a filter sees nothing.
        self.filtered_parties: set = {p for edge in topology.quantum_edges for p in edge}
        self._tags: Dict[QubitRef, TrojanTag] = {}

    def add_interceptor(self, adversary: object) -> None:
        """Register an in-flight tap; invocation follows registration order."""
        self.interceptors.append(adversary)

    # -- trojan bookkeeping -------------------------------------------------

    def plant_tag(self, qubit: QubitRef, tag: TrojanTag) -> None:
        self._tags[qubit] = tag

    def tags_on(self, qubits: Sequence[QubitRef]) -> List[TrojanTag]:
        return [self._tags[q] for q in qubits if q in self._tags]

    def scan_trojan(self, receiver: PartyId, msg: QuantumMessage) -> List[TrojanTag]:
        """Ideal probe detector; returns every tag riding on the message."""
        if receiver not in self.filtered_parties:
            return []
        found = self.tags_on(msg.qubits)
        if found:
            self.transcript.log("trojan_detected", receiver, receiver, f"{len(found)} probe tag(s)")
        return found

    # -- sends ----------------------------------------------------------------

    def send_quantum(
        self, sender: PartyId, receiver: PartyId, qubits: Sequence[QubitRef]
    ) -> QuantumMessage:
        """Ship a whole qubit sequence across one quantum link.

        Registered interceptors see (and may transform) the in-flight message
        in registration order; whatever comes out the far end is delivered.
        """
        if not self.topology.has_quantum(sender, receiver):
            raise TopologyError(f"no quantum channel between {sender} and {receiver}")
        msg = QuantumMessage(sender, receiver, tuple(qubits))
        self.transcript.log("quantum_send", sender, receiver, f"{len(msg.qubits)} qubits")
        for adv in self.interceptors:
            taps = getattr(adv, "quantum_taps", None)
            if taps is not None and (sender, receiver) not in taps():
                continue
            out = adv.on_quantum_in_flight(self, (sender, receiver), msg)
            if out is not None:
                msg = out
        self.transcript.log("quantum_deliver", sender, receiver, f"{len(msg.qubits)} qubits")
        return msg

    def send_classical(self, sender: PartyId, receiver: PartyId, payload: object) -> ClassicalMessage:
        """Deliver an authenticated classical payload verbatim.

        The content is public: every registered interceptor observes it, but
        none can alter it (payloads are immutable values).
        """
        if not self.topology.has_classical(sender, receiver):
            raise TopologyError(f"no classical channel between {sender} and {receiver}")
        kind = getattr(payload, "KIND", None)
        if kind is None:
            raise ChannelContractError("classical payload outside the protocol vocabulary")
        msg = ClassicalMessage(sender, receiver, payload)
        self.transcript.log(kind, sender, receiver, payload.summary())
        for adv in self.interceptors:
            adv.on_classical_observed(self, msg)
        return msg
