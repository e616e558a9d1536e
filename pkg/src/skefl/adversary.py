"""Collusion harness: what the server plus up to f clients can see and do.

The coalition model is honest-but-curious: the server always participates,
joined by at most f colluding clients who pool their mailboxes and the shared
decryption key.  The central reconstruction question is whether the coalition
can recover a victim's weighted model vector; by the sharing design it holds
at most f of the f+1 shares, and any proper subset merges to a uniform ring
vector.

Two guessing strategies are provided for the distinguishing game:

* :func:`merge_strategy` (default) — merge whatever victim shares the
  coalition holds and compare against the candidate targets.  This is the
  optimal test in the share-space abstraction: with fewer than f+1 shares the
  merge is uniform and independent of the victim's model, so the strategy
  falls back to a fair coin.
* :func:`garble_solver_strategy` — additionally solves the victim's garbled
  upload using the coalition's knowledge of its own incoming/outgoing shares.
  When share routing leaves the victim with no honest-peer noise, this
  recovers the victim's vector outright, demonstrating a topology-dependent
  leak of the routed protocol that the share-space analysis misses (see the
  adversary tests for the measured advantage at small n).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from . import crypto
from .atss import ShareDigest, atss_merge
from .crypto import CiphertextVector, KeyPair
from .errors import InvalidGameError
from .protocol import (
    RoundConfig,
    RoundResult,
    build_parties,
    fedavg_weight,
    parse_share_payload,
    parse_vector_payload,
    run_round,
)
from .rng import derive_rng, derive_seed
from .simnet import Fabric, Message, MessageKind, RoundTranscript
from .workload import ModelVector

# ---------------------------------------------------------------------------
# Views
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AdversaryView:
    """Pooled observations of the coalition for one round."""

    colluders: frozenset
    victim: int
    f: int
    server_messages: tuple
    client_messages: dict
    digests: tuple
    public_key: object
    secret_key: Optional[object]


def collect_view(
    transcript: RoundTranscript,
    colluders: Sequence[int],
    victim: int,
    *,
    f: int,
    public_key,
    secret_key=None,
    digests: Sequence[ShareDigest] = (),
) -> AdversaryView:
    """Assemble the coalition's view from a round transcript.

    The server's view (everything it sent or received) is always included;
    each colluding client contributes its own mailbox traffic.  An empty
    coalition is the server-only adversary.
    """
    colluder_set = frozenset(colluders)
    if victim in colluder_set:
        raise InvalidGameError("victim cannot be a colluder")
    if victim < 1:
        raise InvalidGameError("victim must be a client id")
    if len(colluder_set) > f:
        raise InvalidGameError(f"coalition of {len(colluder_set)} exceeds f={f}")
    if any(c < 1 for c in colluder_set):
        raise InvalidGameError("colluders must be client ids")
    server_msgs = tuple(
        m for m in transcript.messages if m.sender == 0 or m.receiver == 0
    )
    client_msgs = {
        c: tuple(m for m in transcript.messages if m.sender == c or m.receiver == c)
        for c in sorted(colluder_set)
    }
    return AdversaryView(
        colluders=colluder_set,
        victim=victim,
        f=f,
        server_messages=server_msgs,
        client_messages=client_msgs,
        digests=tuple(digests),
        public_key=public_key,
        secret_key=secret_key,
    )


def _coalition_messages(view: AdversaryView) -> List[Message]:
    seen = {}
    for msg in view.server_messages:
        seen[msg.seq] = msg
    for msgs in view.client_messages.values():
        for msg in msgs:
            seen[msg.seq] = msg
    return [seen[k] for k in sorted(seen)]


def victim_share_vectors(view: AdversaryView) -> List[CiphertextVector]:
    """Share vectors owned by the victim that reached any coalition party."""
    shares = []
    for msg in _coalition_messages(view):
        if msg.kind is not MessageKind.SHARE:
            continue
        if msg.receiver != 0 and msg.receiver not in view.colluders:
            continue
        owner, _, vector = parse_share_payload(msg.payload, view.public_key)
        if owner == view.victim:
            shares.append(vector)
    return shares


def _ring_values(view: AdversaryView, vector: CiphertextVector) -> Optional[List[int]]:
    """Plaintext ring values of a vector, if the coalition can read them."""
    if view.secret_key is not None:
        return [view.secret_key.raw_decrypt(ct.value) for ct in vector]
    if view.public_key.backend == "mock":
        return [ct.value for ct in vector]
    return None


# ---------------------------------------------------------------------------
# Reconstruction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AttackOutcome:
    """Result of attempting to rebuild a victim's weighted vector."""

    shares_found: int
    shares_needed: int
    recovered: Optional[tuple]
    residual: Optional[tuple]
    exact: bool

    @property
    def complete(self) -> bool:
        return self.shares_found >= self.shares_needed


def reconstruction_attack(
    view: AdversaryView,
    victim: Optional[int] = None,
    *,
    true_ring: Optional[Sequence[int]] = None,
) -> AttackOutcome:
    """Merge every victim share in the coalition's view and try to read it.

    With all f+1 shares the merge is the victim's weighted vector; with any
    fewer it is a uniform ring vector.  ``true_ring`` (the victim's actual
    weighted plaintext, known to the test harness) enables the exactness
    check and residual.
    """
    if victim is not None and victim != view.victim:
        raise InvalidGameError("view was collected for a different victim")
    shares = victim_share_vectors(view)
    needed = view.f + 1
    if not shares:
        return AttackOutcome(0, needed, None, None, False)
    merged = atss_merge(shares)
    values = _ring_values(view, merged)
    if values is None:
        return AttackOutcome(len(shares), needed, None, None, False)
    recovered = tuple(values)
    residual = None
    exact = False
    if true_ring is not None:
        ring = view.public_key.ring_size
        residual = tuple((r - t) % ring for r, t in zip(recovered, true_ring))
        exact = all(v == 0 for v in residual)
    return AttackOutcome(len(shares), needed, recovered, residual, exact)


# ---------------------------------------------------------------------------
# Guessing strategies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GameContext:
    """Public knowledge handed to a strategy: the two candidate targets in
    ring space (victim's weight already applied) and the round geometry."""

    f: int
    victim: int
    colluders: frozenset
    targets: tuple
    ring_size: int


Strategy = Callable[[AdversaryView, GameContext], Optional[int]]


def merge_strategy(view: AdversaryView, ctx: GameContext) -> Optional[int]:
    """Guess by merging victim shares; abstain unless all f+1 are present."""
    shares = victim_share_vectors(view)
    if len(shares) < ctx.f + 1:
        return None
    values = _ring_values(view, atss_merge(shares))
    if values is None:
        return None
    recovered = tuple(values)
    for h, target in enumerate(ctx.targets):
        if recovered == tuple(target):
            return h
    return None


def garble_solver_strategy(view: AdversaryView, ctx: GameContext) -> Optional[int]:
    """Merge strategy plus solving the victim's garbled upload.

    The coalition knows the shares it sent to and received from the victim.
    Subtracting those from the victim's upload leaves the victim's weighted
    vector plus shares from honest peers; whenever routing happened to give
    the victim no honest incoming share and all its outgoing shares went to
    colluders, the correction is exact and the candidate comparison decides
    the game.
    """
    decided = merge_strategy(view, ctx)
    if decided is not None:
        return decided
    garbled = None
    for msg in view.server_messages:
        if msg.kind is MessageKind.GARBLED and msg.sender == view.victim:
            _, garbled = parse_vector_payload(msg.payload, view.public_key)
    if garbled is None:
        return None
    outgoing = victim_share_vectors(view)
    if len(outgoing) < ctx.f:
        return None  # some outgoing share escaped the coalition
    incoming = []
    for colluder, msgs in view.client_messages.items():
        for msg in msgs:
            if (
                msg.kind is MessageKind.SHARE
                and msg.sender == colluder
                and msg.receiver == view.victim
            ):
                _, _, vector = parse_share_payload(msg.payload, view.public_key)
                incoming.append(vector)
    estimate = garbled
    for vec in outgoing:
        estimate = crypto.vec_add(estimate, vec)
    for vec in incoming:
        estimate = crypto.vec_add(estimate, crypto.vec_neg(vec))
    values = _ring_values(view, estimate)
    if values is None:
        return None
    recovered = tuple(values)
    for h, target in enumerate(ctx.targets):
        if recovered == tuple(target):
            return h
    return None


# ---------------------------------------------------------------------------
# Harness: one instrumented round
# ---------------------------------------------------------------------------


def staged_attack_round(
    cfg: RoundConfig,
    keys: KeyPair,
    colluders: Sequence[int],
    victim: int,
    *,
    models: Optional[Dict[int, ModelVector]] = None,
    garbled: bool = True,
    round_no: int = 1,
) -> Tuple[AttackOutcome, AdversaryView, RoundResult]:
    """Run one round and attack it: returns (outcome, view, round result).

    ``models`` maps client index to its local model; unspecified clients get
    models derived from ``cfg.seed``.  The view includes the shared secret
    key whenever at least one client colludes.
    """
    net = Fabric()
    clients, server = build_parties(cfg, keys, net)
    models = dict(models or {})
    for client in clients:
        if client.index in models:
            client.local_model = models[client.index]
        else:
            draw = derive_rng(cfg.seed, "attack-model", client.index)
            client.local_model = ModelVector(
                tuple(draw.uniform(-1.0, 1.0) for _ in range(cfg.m))
            )
            models[client.index] = client.local_model
    result = run_round(clients, server, cfg, net, round_no, garbled=garbled)
    weight = fedavg_weight(victim, cfg)
    ring = keys.public.ring_size
    true_ring = [
        weight * e % ring for e in cfg.codec.encode_vector(models[victim].values)
    ]
    view = collect_view(
        net.transcript(round_no),
        colluders,
        victim,
        f=cfg.f,
        public_key=keys.public,
        secret_key=keys.secret if colluders else None,
        digests=net.board_entries(round_no),
    )
    outcome = reconstruction_attack(view, victim, true_ring=true_ring)
    return outcome, view, result


# ---------------------------------------------------------------------------
# Distinguishing game
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GameResult:
    trials: int
    correct: int
    decided: int

    @property
    def accuracy(self) -> float:
        return self.correct / self.trials

    @property
    def advantage(self) -> float:
        return abs(self.accuracy - 0.5)

    @property
    def bound(self) -> float:
        """Four-sigma band half-width for a fair coin over this many trials."""
        return 2.0 / self.trials**0.5

    @property
    def passed(self) -> bool:
        return self.advantage <= self.bound

    def to_json(self) -> dict:
        return {
            "trials": self.trials,
            "correct": self.correct,
            "decided": self.decided,
            "accuracy": self.accuracy,
            "advantage": self.advantage,
            "bound": self.bound,
            "passed": self.passed,
        }


def default_candidates(m: int, seed: int) -> Tuple[ModelVector, ModelVector]:
    rng = derive_rng(seed, "candidates")
    a = ModelVector(tuple(rng.uniform(-1.0, 1.0) for _ in range(m)))
    b = ModelVector(tuple(rng.uniform(-1.0, 1.0) for _ in range(m)))
    return a, b


def distinguishing_game(
    cfg: RoundConfig,
    keys: KeyPair,
    trials: int,
    seed: int,
    *,
    candidates: Optional[Tuple[ModelVector, ModelVector]] = None,
    colluders: Optional[Sequence[int]] = None,
    victim: int = 1,
    strategy: Optional[Strategy] = None,
    garbled: bool = True,
) -> GameResult:
    """Indistinguishability experiment over ``trials`` fresh rounds.

    Each trial flips a coin to decide which of two public candidate models the
    victim trains with; a counterweight client holds the other candidate with
    an equal sample count, so the aggregate itself is hypothesis-independent
    and only the victim's own traffic could leak the coin.  The strategy
    guesses or abstains; abstentions resolve by a fair coin.  A secure
    protocol keeps the success rate at chance level.
    """
    if trials < 1:
        raise InvalidGameError("need at least one trial")
    if candidates is None:
        candidates = default_candidates(cfg.m, seed)
    if len(candidates[0]) != cfg.m or len(candidates[1]) != cfg.m:
        raise InvalidGameError("candidate models must have length m")
    if tuple(candidates[0].values) == tuple(candidates[1].values):
        raise InvalidGameError("candidate models must differ")
    if colluders is None:
        colluders = tuple(range(cfg.n - cfg.f + 1, cfg.n + 1)) if cfg.f else ()
    colluder_set = frozenset(colluders)
    if victim in colluder_set:
        raise InvalidGameError("victim cannot collude")
    counter = None
    if cfg.n >= 2:
        candidates_pool = [i for i in range(1, cfg.n + 1) if i != victim and i not in colluder_set]
        if not candidates_pool:
            raise InvalidGameError("no honest client available as counterweight")
        counter = candidates_pool[0]
        if cfg.sample_counts[victim - 1] != cfg.sample_counts[counter - 1]:
            raise InvalidGameError("victim and counterweight need equal sample counts")
    strategy = strategy or merge_strategy
    weight = fedavg_weight(victim, cfg)
    ring = keys.public.ring_size
    targets = tuple(
        tuple(weight * e % ring for e in cfg.codec.encode_vector(cand.values))
        for cand in candidates
    )
    ctx = GameContext(
        f=cfg.f,
        victim=victim,
        colluders=colluder_set,
        targets=targets,
        ring_size=ring,
    )
    bystanders = {
        i: ModelVector(
            tuple(derive_rng(seed, "bystander", i).uniform(-1.0, 1.0) for _ in range(cfg.m))
        )
        for i in range(1, cfg.n + 1)
        if i != victim and i != counter
    }
    correct = 0
    decided = 0
    for t in range(trials):
        coin = derive_rng(seed, "coin", t).getrandbits(1)
        trial_cfg = RoundConfig(
            n=cfg.n,
            f=cfg.f,
            m=cfg.m,
            sample_counts=cfg.sample_counts,
            codec=cfg.codec,
            seed=derive_seed(seed, "trial", t),
            participants=cfg.participants,
        )
        net = Fabric()
        clients, server = build_parties(trial_cfg, keys, net)
        for client in clients:
            if client.index == victim:
                client.local_model = candidates[coin]
            elif counter is not None and client.index == counter:
                client.local_model = candidates[1 - coin]
            else:
                client.local_model = bystanders[client.index]
        run_round(clients, server, trial_cfg, net, 1, garbled=garbled)
        view = collect_view(
            net.transcript(1),
            colluder_set,
            victim,
            f=cfg.f,
            public_key=keys.public,
            secret_key=keys.secret if colluder_set else None,
            digests=net.board_entries(1),
        )
        guess = strategy(view, ctx)
        if guess is not None:
            decided += 1
        else:
            guess = derive_rng(seed, "fallback", t).getrandbits(1)
        if guess == coin:
            correct += 1
    return GameResult(trials=trials, correct=correct, decided=decided)
