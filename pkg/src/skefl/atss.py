"""Threshold splitting of ciphertext vectors into f+1 additive shares.

The scheme is asymmetric: the owner keeps one share and hands the other f to
distinct peers, so any coalition holding at most f shares of the f+1 learns
nothing (each proper subset of shares is a uniform vector), while the full set
merges — by homomorphic addition, in any order — back to the original
ciphertext vector bit-for-bit.

A SHA-256 digest of the canonical serialization published at split time lets
the owner later verify that recipients still hold intact shares.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import reduce
from typing import Sequence

from . import crypto
from .crypto import CiphertextVector
from .errors import ConfigurationError, ShareCountError, ShareShapeError

# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ShareSet:
    """The f+1 shares of one vector. ``shares[-1]`` stays with the owner."""

    owner: int
    round_no: int
    shares: tuple
    recipients: tuple

    def __post_init__(self) -> None:
        if len(self.shares) != len(self.recipients):
            raise ShareCountError("one recipient per share required")
        if self.recipients and self.recipients[-1] != self.owner:
            raise ShareCountError("owner must hold the final share")

    @property
    def threshold(self) -> int:
        """f: the number of shares handed to other parties."""
        return len(self.shares) - 1

    @property
    def kept_share(self) -> CiphertextVector:
        return self.shares[-1]

    def outgoing(self):
        """(recipient, share) pairs for the f shares that leave the owner."""
        return list(zip(self.recipients[:-1], self.shares[:-1]))


@dataclass(frozen=True)
class ShareDigest:
    """Commitment to a split vector: SHA-256 of its canonical serialization."""

    owner: int
    round_no: int
    sha256: str

    def to_json(self) -> dict:
        return {"owner": self.owner, "round": self.round_no, "sha256": self.sha256}

    @classmethod
    def from_json(cls, doc: dict) -> "ShareDigest":
        return cls(owner=int(doc["owner"]), round_no=int(doc["round"]), sha256=str(doc["sha256"]))


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def atss_split(
    ctv: CiphertextVector,
    f: int,
    key,
    rng,
    *,
    owner: int,
    round_no: int,
    n_clients: int = 0,
    peers: Sequence[int] = (),
) -> ShareSet:
    """Split ``ctv`` into f+1 shares: f fresh uniform ciphertext vectors plus
    the homomorphic difference that completes the sum.

    Recipients for the f outgoing shares are sampled without replacement from
    ``peers`` (or from 1..n_clients excluding the owner); the owner keeps the
    final share.
    """
    if f < 0:
        raise ConfigurationError("f must be non-negative")
    others = list(peers) if peers else [i for i in range(1, n_clients + 1) if i != owner]
    if owner in others:
        raise ConfigurationError("owner cannot receive an outgoing share")
    if f > len(others):
        raise ConfigurationError(f"f={f} outgoing shares need {f} peers, have {len(others)}")
    m = len(ctv)
    randoms = [crypto.uniform_vector(key, m, rng) for _ in range(f)]
    if randoms:
        total = reduce(crypto.vec_add, randoms)
        last = crypto.vec_add(ctv, crypto.vec_neg(total))
    else:
        last = ctv
    recipients = tuple(rng.sample(others, f)) + (owner,)
    return ShareSet(
        owner=owner,
        round_no=round_no,
        shares=tuple(randoms) + (last,),
        recipients=recipients,
    )


def atss_merge(shares: Sequence[CiphertextVector]) -> CiphertextVector:
    """Homomorphic sum of shares; order-independent at the bit level."""
    if not shares:
        raise ShareCountError("cannot merge zero shares")
    m = len(shares[0])
    for s in shares:
        if len(s) != m:
            raise ShareShapeError(f"share length {len(s)} != {m}")
    return reduce(crypto.vec_add, shares)


def atss_publish(ctv: CiphertextVector, owner: int, round_no: int) -> ShareDigest:
    """Digest of the vector the full share set must merge back to."""
    digest = hashlib.sha256(crypto.serialize_vector(ctv)).hexdigest()
    return ShareDigest(owner=owner, round_no=round_no, sha256=digest)


def atss_verify(digest: ShareDigest, shares: Sequence[CiphertextVector]) -> int:
    """1 if the shares merge to the committed vector, else 0.

    Missing, extra, tampered, or shape-inconsistent shares all yield 0:
    anything that fails to reconstruct the committed serialization is a
    verification failure, not an exception.
    """
    try:
        merged = atss_merge(list(shares))
    except (ShareCountError, ShareShapeError):
        return 0
    actual = hashlib.sha256(crypto.serialize_vector(merged)).hexdigest()
    return 1 if actual == digest.sha256 else 0


def atss_resplit(
    ctv: CiphertextVector,
    f: int,
    key,
    rng,
    *,
    owner: int,
    round_no: int,
    n_clients: int = 0,
    peers: Sequence[int] = (),
) -> ShareSet:
    """Fresh split of the same vector for a later round.

    Only the owner holds the intact vector, so re-sharing is an owner-side
    operation; randomness and recipients are drawn anew, so the new shares are
    independent of the old ones while merging to the same vector.
    """
    return atss_split(
        ctv, f, key, rng, owner=owner, round_no=round_no, n_clients=n_clients, peers=peers
    )
