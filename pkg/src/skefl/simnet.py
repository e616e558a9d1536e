"""In-process message fabric for protocol simulation.

Party 0 is the server; clients are 1..n.  Messages are queued by ``send`` and
moved to mailboxes by ``deliver_all`` in a deterministic (sender, seq) order —
or a seeded shuffle, to demonstrate order-independence of the aggregate.  The
fabric also hosts the digest bulletin board (a broadcast register, not
point-to-point traffic) and keeps a transcript per round for export and for
adversary views.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from enum import Enum
from hashlib import sha256
from typing import Dict, List, Optional

from .atss import ShareDigest
from .errors import ProtocolOrderError, RoutingError


class MessageKind(str, Enum):
    SHARE = "Share"
    GARBLED = "Garbled"
    GLOBAL_MODEL = "GlobalModel"
    DIGEST = "Digest"
    VERIFY_REQUEST = "VerifyRequest"
    VERIFY_RESPONSE = "VerifyResponse"


@dataclass(frozen=True)
class Message:
    seq: int
    round_no: int
    sender: int
    receiver: int
    kind: MessageKind
    payload: bytes


@dataclass
class RoundTranscript:
    """Everything delivered in one round, in delivery order."""

    round_no: int
    messages: List[Message] = field(default_factory=list)

    def count(self, kind: Optional[MessageKind] = None) -> int:
        if kind is None:
            return len(self.messages)
        return sum(1 for m in self.messages if m.kind is kind)

    def count_client_to_client(self) -> int:
        return sum(1 for m in self.messages if m.sender != 0 and m.receiver != 0)

    def count_client_to_server(self) -> int:
        return sum(1 for m in self.messages if m.sender != 0 and m.receiver == 0)

    def count_server_to_client(self) -> int:
        return sum(1 for m in self.messages if m.sender == 0 and m.receiver != 0)

    def total_bytes(self) -> int:
        return sum(len(m.payload) for m in self.messages)


class Fabric:
    """Deterministic star+mesh network between one server and n clients."""

    def __init__(self, *, delivery: str = "fixed", rng=None) -> None:
        if delivery not in ("fixed", "shuffled"):
            raise ValueError(f"unknown delivery mode {delivery!r}")
        if delivery == "shuffled" and rng is None:
            raise ValueError("shuffled delivery needs an rng")
        self.delivery = delivery
        self.rng = rng
        self.parties: set = set()
        self.mailboxes: Dict[int, List[Message]] = {}
        self._pending: List[Message] = []
        self._transcripts: Dict[int, RoundTranscript] = {}
        self._board: Dict[tuple, ShareDigest] = {}
        self._seq = 0
        self._round: Optional[int] = None

    # -- membership / rounds -------------------------------------------------

    def register(self, party_id: int) -> None:
        self.parties.add(party_id)
        self.mailboxes.setdefault(party_id, [])

    def begin_round(self, round_no: int) -> None:
        self._round = round_no
        self._transcripts.setdefault(round_no, RoundTranscript(round_no))

    # -- traffic ---------------------------------------------------------------

    def send(self, sender: int, receiver: int, kind: MessageKind, payload: bytes) -> Message:
        if self._round is None:
            raise ProtocolOrderError("send before begin_round")
        if sender not in self.parties:
            raise RoutingError(f"unknown sender {sender}")
        if receiver not in self.parties:
            raise RoutingError(f"unknown receiver {receiver}")
        msg = Message(
            seq=self._seq,
            round_no=self._round,
            sender=sender,
            receiver=receiver,
            kind=kind,
            payload=payload,
        )
        self._seq += 1
        self._pending.append(msg)
        return msg

    def deliver_all(self) -> List[Message]:
        """Flush pending messages to mailboxes; returns them in delivery order."""
        batch = sorted(self._pending, key=lambda m: (m.sender, m.seq))
        if self.delivery == "shuffled":
            self.rng.shuffle(batch)
        self._pending.clear()
        for msg in batch:
            self.mailboxes[msg.receiver].append(msg)
            self._transcripts[msg.round_no].messages.append(msg)
        return batch

    def drain(self, party_id: int) -> List[Message]:
        """Remove and return everything in a party's mailbox."""
        if party_id not in self.parties:
            raise RoutingError(f"unknown party {party_id}")
        box = self.mailboxes[party_id]
        self.mailboxes[party_id] = []
        return box

    # -- digest bulletin board --------------------------------------------------

    def publish_digest(self, digest: ShareDigest) -> None:
        self._board[(digest.owner, digest.round_no)] = digest

    def digest_for(self, owner: int, round_no: int) -> Optional[ShareDigest]:
        return self._board.get((owner, round_no))

    def board_entries(self, round_no: Optional[int] = None) -> List[ShareDigest]:
        entries = [
            d for d in self._board.values() if round_no is None or d.round_no == round_no
        ]
        return sorted(entries, key=lambda d: (d.round_no, d.owner))

    # -- transcripts ----------------------------------------------------------

    def transcript(self, round_no: int) -> RoundTranscript:
        if round_no not in self._transcripts:
            raise ProtocolOrderError(f"no transcript for round {round_no}")
        return self._transcripts[round_no]

    def rounds(self) -> List[int]:
        return sorted(self._transcripts)

    def export_csv(self, round_no: Optional[int] = None) -> str:
        """Transcript as CSV: seq,round,sender,receiver,kind,bytes."""
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["seq", "round", "sender", "receiver", "kind", "bytes"])
        for rn in self.rounds():
            if round_no is not None and rn != round_no:
                continue
            for m in self._transcripts[rn].messages:
                writer.writerow([m.seq, m.round_no, m.sender, m.receiver, m.kind.value, len(m.payload)])
        return out.getvalue()

    def export_json(self, round_no: Optional[int] = None) -> str:
        """Transcript as JSON; payloads are carried as SHA-256 hex digests."""
        rows = []
        for rn in self.rounds():
            if round_no is not None and rn != round_no:
                continue
            for m in self._transcripts[rn].messages:
                rows.append(
                    {
                        "seq": m.seq,
                        "round": m.round_no,
                        "sender": m.sender,
                        "receiver": m.receiver,
                        "kind": m.kind.value,
                        "bytes": len(m.payload),
                        "payload_sha256": sha256(m.payload).hexdigest(),
                    }
                )
        return json.dumps(rows, sort_keys=True, indent=2) + "\n"
