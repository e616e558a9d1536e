"""Deterministic randomness: one root seed, many independent labeled streams.

All protocol randomness flows through :func:`derive_rng` so that a run is a
pure function of its seed.  Streams are separated by hashing the root seed
together with a label path (e.g. ``("dist", round, client)``), which keeps
per-party randomness independent of scheduling order.
"""

from __future__ import annotations

import hashlib
import random
from typing import Union

Label = Union[str, int, bytes]


def derive_seed(root_seed: int, *labels: Label) -> int:
    """Derive a 256-bit child seed from ``root_seed`` and a label path."""
    h = hashlib.sha256()
    h.update(b"skefl-rng-v1")
    h.update((int(root_seed) % (1 << 256)).to_bytes(32, "big"))
    for label in labels:
        if isinstance(label, bytes):
            data = label
        else:
            data = str(label).encode("utf-8")
        h.update(len(data).to_bytes(4, "big"))
        h.update(data)
    return int.from_bytes(h.digest(), "big")


def derive_rng(root_seed: int, *labels: Label) -> random.Random:
    """Return a ``random.Random`` seeded from the derived child seed."""
    return random.Random(derive_seed(root_seed, *labels))


def random_below(rng: random.Random, bound: int) -> int:
    """Uniform integer in [0, bound) (thin wrapper, kept for call-site clarity)."""
    return rng.randrange(bound)
