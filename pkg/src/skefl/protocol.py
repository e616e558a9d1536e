"""The aggregation protocol: distribute, garble, aggregate.

One round proceeds in three phases over the fabric (server = party 0):

1. **Distribute** — each client encrypts its model, scales it by its encoded
   FedAvg weight, splits the result into f+1 shares, sends f of them to
   distinct peers, keeps the last, and publishes a digest of the intact
   weighted vector to the bulletin board.
2. **Garble** — each client homomorphically sums every share it holds for the
   round (received + kept) and uploads the single blended vector.
3. **Aggregate** — the server homomorphically sums the n garbled vectors and
   broadcasts the global ciphertext, which decrypts to the weighted model sum
   at fixed-point scale squared.

Share randomness cancels inside the aggregate, so the result equals the sum
of weighted models exactly (in the ring), while no single upload reveals any
client's model.  ``garbled=False`` switches to a deliberately broken control
mode (all shares go straight to the server) used to sanity-check the attack
harness.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

from . import crypto
from .atss import ShareSet, atss_publish, atss_split, atss_verify
from .crypto import CiphertextVector, FixedPointCodec, KeyPair
from .errors import (
    ConfigurationError,
    DuplicateShareError,
    IncompleteRoundError,
    ProtocolOrderError,
)
from .rng import derive_rng, derive_seed
from .simnet import Fabric, Message, MessageKind
from .workload import ModelVector, SyntheticTask, TrainParams, accuracy, local_train

SERVER_ID = 0


# ---------------------------------------------------------------------------
# Configuration and state
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RoundConfig:
    """Static parameters of a round.

    ``participants`` restricts a round to a subset of clients (client
    subsampling); ``None`` means everyone takes part.
    """

    n: int
    f: int
    m: int
    sample_counts: tuple
    codec: FixedPointCodec
    seed: int
    participants: Optional[tuple] = None

    def __post_init__(self) -> None:
        if self.n < 1 or self.m < 1:
            raise ConfigurationError("need at least one client and one element")
        if self.f < 0:
            raise ConfigurationError("f must be non-negative")
        if 2 * self.f + 1 > self.n:
            raise ConfigurationError(f"threshold violated: 2*{self.f}+1 > {self.n}")
        if len(self.sample_counts) != self.n:
            raise ConfigurationError("one sample count per client required")
        if any(c <= 0 for c in self.sample_counts):
            raise ConfigurationError("sample counts must be positive")
        # Ring capacity check against the aggregate's worst case.
        if self.codec.modulus <= 2 * self.codec.scale * self.codec.v_max * self.n:
            raise ConfigurationError("ring too small for n clients at this scale")
        if self.participants is not None:
            active = tuple(sorted(self.participants))
            if len(set(active)) != len(active) or not active:
                raise ConfigurationError("participants must be distinct and non-empty")
            if any(not 1 <= i <= self.n for i in active):
                raise ConfigurationError("participants outside 1..n")
            if 2 * self.f + 1 > len(active):
                raise ConfigurationError("threshold violated for the active subset")
            object.__setattr__(self, "participants", active)

    @property
    def active(self) -> tuple:
        return self.participants if self.participants is not None else tuple(range(1, self.n + 1))

    @property
    def total_samples(self) -> int:
        return sum(self.sample_counts)

    def active_samples(self) -> int:
        return sum(self.sample_counts[i - 1] for i in self.active)


def fedavg_weight(index: int, cfg: RoundConfig) -> int:
    """Encoded FedAvg coefficient N_i / N for the round's active set."""
    if index not in cfg.active:
        raise ConfigurationError(f"client {index} not active this round")
    return cfg.codec.encode(cfg.sample_counts[index - 1] / cfg.active_samples())


@dataclass
class ClientState:
    index: int
    sample_count: int
    keys: KeyPair
    local_model: Optional[ModelVector] = None
    inbox_shares: Dict[tuple, CiphertextVector] = field(default_factory=dict)
    own_shareset: Optional[ShareSet] = None
    weighted_vector: Optional[CiphertextVector] = None
    global_ciphertext: Optional[CiphertextVector] = None


@dataclass
class ServerState:
    n_clients: int
    public_key: object
    received: Dict[int, CiphertextVector] = field(default_factory=dict)
    aggregate: Optional[CiphertextVector] = None


# ---------------------------------------------------------------------------
# Wire payloads
# ---------------------------------------------------------------------------


def _u32(v: int) -> bytes:
    return int(v).to_bytes(4, "big")


def share_payload(owner: int, round_no: int, vector: CiphertextVector) -> bytes:
    return _u32(owner) + _u32(round_no) + crypto.serialize_vector(vector)


def parse_share_payload(data: bytes, key) -> Tuple[int, int, CiphertextVector]:
    owner = int.from_bytes(data[:4], "big")
    round_no = int.from_bytes(data[4:8], "big")
    return owner, round_no, crypto.deserialize_vector(data[8:], key)


def vector_payload(round_no: int, vector: CiphertextVector) -> bytes:
    return _u32(round_no) + crypto.serialize_vector(vector)


def parse_vector_payload(data: bytes, key) -> Tuple[int, CiphertextVector]:
    return int.from_bytes(data[:4], "big"), crypto.deserialize_vector(data[4:], key)


def verify_request_payload(owner: int, round_no: int) -> bytes:
    return _u32(owner) + _u32(round_no)


def verify_response_payload(owner: int, round_no: int, vector: Optional[CiphertextVector]) -> bytes:
    head = _u32(owner) + _u32(round_no)
    if vector is None:
        return head + b"\x00"
    return head + b"\x01" + crypto.serialize_vector(vector)


def parse_verify_response(data: bytes, key) -> Tuple[int, int, Optional[CiphertextVector]]:
    owner = int.from_bytes(data[:4], "big")
    round_no = int.from_bytes(data[4:8], "big")
    if data[8] == 0:
        return owner, round_no, None
    return owner, round_no, crypto.deserialize_vector(data[9:], key)


# ---------------------------------------------------------------------------
# Phases
# ---------------------------------------------------------------------------


def skefl_dist(
    client: ClientState,
    cfg: RoundConfig,
    net: Fabric,
    round_no: int,
    *,
    garbled: bool = True,
) -> ShareSet:
    """Distribution phase for one client: encrypt, weight, split, scatter.

    In the control mode (``garbled=False``) every share goes to the server
    instead of being scattered to peers.
    """
    if client.local_model is None:
        raise ProtocolOrderError(f"client {client.index} has no local model")
    if len(client.local_model) != cfg.m:
        raise ConfigurationError(
            f"model length {len(client.local_model)} != configured m={cfg.m}"
        )
    rng = derive_rng(cfg.seed, "dist", round_no, client.index)
    plain = cfg.codec.encode_vector(client.local_model.values)
    encrypted = crypto.encrypt_vector(client.keys, plain, rng)
    weighted = crypto.vec_scalar_mul(encrypted, fedavg_weight(client.index, cfg))
    peers = [i for i in cfg.active if i != client.index]
    shareset = atss_split(
        weighted,
        cfg.f,
        client.keys,
        rng,
        owner=client.index,
        round_no=round_no,
        peers=peers,
    )
    client.weighted_vector = weighted
    client.own_shareset = shareset
    net.publish_digest(atss_publish(weighted, client.index, round_no))
    if garbled:
        for recipient, share in shareset.outgoing():
            net.send(
                client.index,
                recipient,
                MessageKind.SHARE,
                share_payload(client.index, round_no, share),
            )
        _store_share(client, client.index, round_no, shareset.kept_share)
    else:
        for share in shareset.shares:
            net.send(
                client.index,
                SERVER_ID,
                MessageKind.SHARE,
                share_payload(client.index, round_no, share),
            )
    return shareset


def _store_share(client: ClientState, owner: int, round_no: int, vector: CiphertextVector) -> None:
    key = (owner, round_no)
    if key in client.inbox_shares:
        raise DuplicateShareError(f"client {client.index} already holds a share for {key}")
    client.inbox_shares[key] = vector


def ingest_shares(client: ClientState, messages: Sequence[Message], key) -> None:
    """File incoming share messages into the client's inbox."""
    for msg in messages:
        if msg.kind is not MessageKind.SHARE:
            continue
        owner, round_no, vector = parse_share_payload(msg.payload, key)
        _store_share(client, owner, round_no, vector)


def skefl_garble(client: ClientState, cfg: RoundConfig, round_no: int) -> CiphertextVector:
    """Blend every share held for the round into one vector."""
    entries = sorted(
        (owner, vec)
        for (owner, rn), vec in client.inbox_shares.items()
        if rn == round_no
    )
    if not entries:
        raise ProtocolOrderError(f"client {client.index} holds no shares for round {round_no}")
    blended = entries[0][1]
    for _, vec in entries[1:]:
        blended = crypto.vec_add(blended, vec)
    return blended


def skefl_aggr(server: ServerState, cfg: RoundConfig) -> CiphertextVector:
    """Sum the garbled uploads of every active client."""
    expected = set(cfg.active)
    got = set(server.received)
    if got != expected:
        missing = sorted(expected - got)
        raise IncompleteRoundError(f"missing garbled uploads from {missing}")
    ordered = [server.received[i] for i in sorted(server.received)]
    agg = ordered[0]
    for vec in ordered[1:]:
        agg = crypto.vec_add(agg, vec)
    server.aggregate = agg
    return agg


# ---------------------------------------------------------------------------
# Round orchestration
# ---------------------------------------------------------------------------


@dataclass
class RoundResult:
    round_no: int
    global_model: List[float]
    msg_counts: Dict[str, int]
    bytes_total: int
    phase_timings_ms: Dict[str, float]
    op_counts: Dict[str, int]
    global_ring: List[int]

    def to_json(self) -> dict:
        return {
            "round": self.round_no,
            "global_model": self.global_model,
            "msg_counts": self.msg_counts,
            "bytes_total": self.bytes_total,
            "phase_timings_ms": self.phase_timings_ms,
        }


def run_round(
    clients: Sequence[ClientState],
    server: ServerState,
    cfg: RoundConfig,
    net: Fabric,
    round_no: int,
    *,
    garbled: bool = True,
) -> RoundResult:
    """Execute one full round and decode the resulting global model."""
    by_id = {c.index: c for c in clients}
    active = [by_id[i] for i in cfg.active]
    ops_before = crypto.TALLY.snapshot()
    net.begin_round(round_no)
    server.received = {}
    server.aggregate = None

    t0 = time.perf_counter()
    for client in active:
        skefl_dist(client, cfg, net, round_no, garbled=garbled)
    net.deliver_all()
    if garbled:
        for client in active:
            ingest_shares(client, net.drain(client.index), client.keys.public)
    t1 = time.perf_counter()

    if garbled:
        for client in active:
            blended = skefl_garble(client, cfg, round_no)
            net.send(client.index, SERVER_ID, MessageKind.GARBLED, vector_payload(round_no, blended))
        net.deliver_all()
        for msg in net.drain(SERVER_ID):
            if msg.kind is not MessageKind.GARBLED:
                continue
            rn, vector = parse_vector_payload(msg.payload, server.public_key)
            if rn != round_no:
                raise ProtocolOrderError(f"garbled vector for round {rn} in round {round_no}")
            server.received[msg.sender] = vector
    else:
        # Control mode: the server holds every share, so it can merge each
        # owner's full set itself (this is exactly the leak the real protocol
        # prevents).
        for msg in net.drain(SERVER_ID):
            if msg.kind is not MessageKind.SHARE:
                continue
            owner, rn, vector = parse_share_payload(msg.payload, server.public_key)
            if owner in server.received:
                server.received[owner] = crypto.vec_add(server.received[owner], vector)
            else:
                server.received[owner] = vector
    t2 = time.perf_counter()

    aggregate = skefl_aggr(server, cfg)
    for client in active:
        net.send(SERVER_ID, client.index, MessageKind.GLOBAL_MODEL, vector_payload(round_no, aggregate))
    net.deliver_all()
    for client in active:
        for msg in net.drain(client.index):
            if msg.kind is MessageKind.GLOBAL_MODEL:
                _, client.global_ciphertext = parse_vector_payload(msg.payload, client.keys.public)
    t3 = time.perf_counter()

    # Any client can decode; they all received the same ciphertext.
    reader = active[0]
    ring = crypto.decrypt_vector(reader.keys, reader.global_ciphertext)
    decoded = cfg.codec.decode_vector(ring, cfg.codec.scale_squared)
    t4 = time.perf_counter()

    transcript = net.transcript(round_no)
    return RoundResult(
        round_no=round_no,
        global_model=decoded,
        msg_counts={
            "c2c": transcript.count_client_to_client(),
            "c2s": transcript.count_client_to_server(),
            "s2c": transcript.count_server_to_client(),
        },
        bytes_total=transcript.total_bytes(),
        phase_timings_ms={
            "dist": (t1 - t0) * 1e3,
            "garble": (t2 - t1) * 1e3,
            "aggr": (t3 - t2) * 1e3,
            "decode": (t4 - t3) * 1e3,
        },
        op_counts=crypto.TALLY.since(ops_before),
        global_ring=ring,
    )


# ---------------------------------------------------------------------------
# Share verification flow
# ---------------------------------------------------------------------------


def verify_model(
    owner: ClientState,
    clients: Sequence[ClientState],
    net: Fabric,
    round_no: int,
) -> int:
    """Owner-driven share audit: f requests, f responses, one digest check.

    Returns 1 when every recipient still holds an intact share (the re-merge
    matches the published digest), 0 otherwise.
    """
    shareset = owner.own_shareset
    if shareset is None or shareset.round_no != round_no:
        raise ProtocolOrderError(f"client {owner.index} has no share set for round {round_no}")
    digest = net.digest_for(owner.index, round_no)
    if digest is None:
        raise ProtocolOrderError(f"no published digest for owner {owner.index}, round {round_no}")
    by_id = {c.index: c for c in clients}
    holders = [rid for rid, _ in shareset.outgoing()]

    for rid in holders:
        net.send(owner.index, rid, MessageKind.VERIFY_REQUEST, verify_request_payload(owner.index, round_no))
    net.deliver_all()
    for rid in holders:
        for msg in net.drain(rid):
            if msg.kind is not MessageKind.VERIFY_REQUEST:
                continue
            req_owner = int.from_bytes(msg.payload[:4], "big")
            req_round = int.from_bytes(msg.payload[4:8], "big")
            held = by_id[rid].inbox_shares.get((req_owner, req_round))
            net.send(
                rid,
                msg.sender,
                MessageKind.VERIFY_RESPONSE,
                verify_response_payload(req_owner, req_round, held),
            )
    net.deliver_all()

    shares = []
    for msg in net.drain(owner.index):
        if msg.kind is not MessageKind.VERIFY_RESPONSE:
            continue
        _, _, vector = parse_verify_response(msg.payload, owner.keys.public)
        if vector is not None:
            shares.append(vector)
    shares.append(shareset.kept_share)
    if len(shares) != shareset.threshold + 1:
        return 0
    return atss_verify(digest, shares)


# ---------------------------------------------------------------------------
# Multi-round federated run
# ---------------------------------------------------------------------------

# Subsampling only engages beyond this many clients; smaller federations
# always run with everyone.
SUBSAMPLE_THRESHOLD = 10


@dataclass
class FederatedRun:
    round_results: List[RoundResult]
    trajectory: List[ModelVector]
    holdout_accuracy: List[float]
    net: Fabric


def build_parties(cfg: RoundConfig, keys: KeyPair, net: Fabric):
    """Register server + clients on the fabric and return their states."""
    net.register(SERVER_ID)
    clients = [
        ClientState(index=i, sample_count=cfg.sample_counts[i - 1], keys=keys)
        for i in range(1, cfg.n + 1)
    ]
    for c in clients:
        net.register(c.index)
    server = ServerState(n_clients=cfg.n, public_key=keys.public)
    return clients, server


def run_federated(
    task: SyntheticTask,
    cfg: RoundConfig,
    keys: KeyPair,
    rounds: int,
    params: TrainParams,
    *,
    garbled: bool = True,
    client_fraction: float = 1.0,
    net: Optional[Fabric] = None,
) -> FederatedRun:
    """Train-and-aggregate loop: local SGD, then one protocol round per epoch
    of communication, starting from the zero model."""
    if task.model_length != cfg.m:
        raise ConfigurationError(f"task model length {task.model_length} != cfg.m {cfg.m}")
    if task.n_clients != cfg.n:
        raise ConfigurationError("task/client count mismatch")
    if not 0.0 < client_fraction <= 1.0:
        raise ConfigurationError("client_fraction must lie in (0, 1]")
    if net is None:
        net = Fabric()
    clients, server = build_parties(cfg, keys, net)
    global_model = ModelVector.zeros(cfg.m)
    results: List[RoundResult] = []
    trajectory: List[ModelVector] = []
    holdout: List[float] = []
    for round_no in range(1, rounds + 1):
        if cfg.n > SUBSAMPLE_THRESHOLD and client_fraction < 1.0:
            k = max(2 * cfg.f + 1, round(client_fraction * cfg.n))
            picker = derive_rng(cfg.seed, "participants", round_no)
            chosen = tuple(sorted(picker.sample(range(1, cfg.n + 1), k)))
            round_cfg = replace(cfg, participants=chosen)
        else:
            round_cfg = cfg
        for i in round_cfg.active:
            client = clients[i - 1]
            client.local_model = local_train(
                global_model,
                task.client_features[i - 1],
                task.client_labels[i - 1],
                params,
                derive_seed(cfg.seed, "train", round_no, i),
            )
        result = run_round(clients, server, round_cfg, net, round_no, garbled=garbled)
        global_model = ModelVector(tuple(result.global_model))
        results.append(result)
        trajectory.append(global_model)
        holdout.append(accuracy(global_model, task.holdout_features, task.holdout_labels))
    return FederatedRun(
        round_results=results,
        trajectory=trajectory,
        holdout_accuracy=holdout,
        net=net,
    )
