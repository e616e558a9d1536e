"""Additively homomorphic encryption layer.

Two interchangeable backends sit behind one ciphertext API:

* ``paillier`` — Paillier with the simplified generator ``g = 1 + n``,
  precomputed-generator obfuscation (``h = -y^2 mod n``, ``h_n = h^n mod n^2``,
  nonce ``h_n^alpha`` for a 256-bit ``alpha``), a fixed-base comb for the
  obfuscation exponentiation, and CRT decryption.
* ``mock`` — the identity "cipher" over ``Z_{2^k}``; plaintext-visible, used
  for fast statistical tests and protocol plumbing checks.

Homomorphic addition is ciphertext multiplication mod ``n^2`` (plain integer
addition mod ``2^k`` for the mock backend), so aggregation is commutative and
associative at the bit level.  A module-level :data:`TALLY` counts primitive
operations so harnesses can assert scaling behavior.

The module also provides the fixed-point codec mapping reals to ring elements
and the canonical byte serialization used for hashing and wire transport.
"""

from __future__ import annotations

import json
import math
import secrets
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

import gmpy2

from .errors import (
    ConfigurationError,
    CryptoError,
    KeyMismatchError,
    RangeError,
    SerializationError,
)

# Bits of the obfuscation exponent alpha.  The nonce h_n^alpha equals the
# textbook Paillier nonce r^n with r = h^alpha mod n, so 256 bits gives a
# >=128-bit security margin while keeping encryption one short powmod.
OBFUSCATION_BITS = 256

PAILLIER_KEY_BITS = (128, 1024, 2048)

BACKEND_TAGS = {"paillier": b"\x01", "mock": b"\x02"}
_TAG_TO_BACKEND = {v[0]: k for k, v in BACKEND_TAGS.items()}


# ---------------------------------------------------------------------------
# Operation tally
# ---------------------------------------------------------------------------


class OpTally:
    """Counts primitive crypto operations (per element, not per vector)."""

    def __init__(self) -> None:
        self.counts: Counter = Counter()

    def bump(self, name: str, k: int = 1) -> None:
        self.counts[name] += k

    def reset(self) -> None:
        self.counts.clear()

    def snapshot(self) -> dict:
        return dict(self.counts)

    def since(self, snap: dict) -> dict:
        """Counts accumulated after ``snap`` was taken."""
        return {
            name: self.counts[name] - snap.get(name, 0)
            for name in self.counts
            if self.counts[name] != snap.get(name, 0)
        }


TALLY = OpTally()


# ---------------------------------------------------------------------------
# Keys
# ---------------------------------------------------------------------------


class PaillierPublicKey:
    """Public key: modulus ``n`` plus the precomputed obfuscation base ``h_n``."""

    backend = "paillier"

    # Fixed-base comb parameters for h_n^alpha: 8-bit windows over the
    # obfuscation exponent.  The table costs ~2 MiB per 1024-bit key, built on
    # first use, and makes obfuscation ~4x faster than a plain powmod.
    _WINDOW = 8

    def __init__(self, n: int, hn: int) -> None:
        self.n = int(n)
        self.hn = int(hn)
        self.nsquare = self.n * self.n
        self.bit_length = self.n.bit_length()
        self._comb: Optional[list] = None

    # -- ring / group parameters -------------------------------------------

    @property
    def ring_size(self) -> int:
        return self.n

    @property
    def group_bound(self) -> int:
        return self.nsquare

    # -- raw operations on integer ciphertext values ------------------------

    def _comb_table(self) -> list:
        if self._comb is None:
            n2 = gmpy2.mpz(self.nsquare)
            base = gmpy2.mpz(self.hn)
            radix = 1 << self._WINDOW
            table = []
            for _ in range(OBFUSCATION_BITS // self._WINDOW):
                row = [gmpy2.mpz(1)]
                for _ in range(radix - 1):
                    row.append(row[-1] * base % n2)
                base = row[1]
                for _ in range(self._WINDOW):
                    base = base * base % n2
                table.append(row)
            self._comb = table
        return self._comb

    def obfuscator(self, alpha: int) -> int:
        """h_n^alpha mod n^2 via the fixed-base comb (identical to powmod)."""
        alpha &= (1 << OBFUSCATION_BITS) - 1
        table = self._comb_table()
        n2 = self.nsquare
        mask = (1 << self._WINDOW) - 1
        acc = gmpy2.mpz(1)
        for row in table:
            digit = alpha & mask
            if digit:
                acc = acc * row[digit] % n2
            alpha >>= self._WINDOW
        return int(acc)

    def raw_encrypt(self, plaintext: int, alpha: int) -> int:
        # (1+n)^m = 1 + n*m (mod n^2); obfuscate with h_n^alpha.
        c = (1 + self.n * plaintext) % self.nsquare
        return c * self.obfuscator(alpha) % self.nsquare

    def raw_add(self, a: int, b: int) -> int:
        return a * b % self.nsquare

    def raw_neg(self, a: int) -> int:
        return int(gmpy2.invert(a, self.nsquare))

    def raw_scalar_mul(self, a: int, k: int) -> int:
        return int(gmpy2.powmod(a, k, self.nsquare))

    def raw_sample_uniform(self, rng) -> int:
        # Uniform unit of Z*_{n^2}: identical in distribution to a fresh
        # encryption of a uniform plaintext under a uniform nonce, because
        # (m, r) -> (1+n)^m * r^n is a bijection onto the units.
        while True:
            c = rng.randrange(1, self.nsquare)
            if math.gcd(c, self.n) == 1:
                return c

    # -- equality / hashing --------------------------------------------------

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, PaillierPublicKey)
            and self.n == other.n
            and self.hn == other.hn
        )

    def __hash__(self) -> int:
        return hash(("paillier", self.n, self.hn))

    def __repr__(self) -> str:
        return f"PaillierPublicKey(bits={self.bit_length})"


class PaillierSecretKey:
    """Secret key: the factorization, with CRT precomputation."""

    backend = "paillier"

    def __init__(self, public: PaillierPublicKey, p: int, q: int) -> None:
        if p * q != public.n:
            raise CryptoError("factors do not match the public modulus")
        self.public = public
        self.p = int(p)
        self.q = int(q)
        n = public.n
        self.psquare = self.p * self.p
        self.qsquare = self.q * self.q
        # Decryption: m_p = L_p(c^(p-1) mod p^2) * hp mod p, likewise mod q,
        # then CRT.  hp inverts L_p(g^(p-1) mod p^2) for g = 1 + n.
        self.hp = int(
            gmpy2.invert(
                self._l_func(int(gmpy2.powmod(1 + n, self.p - 1, self.psquare)), self.p),
                self.p,
            )
        )
        self.hq = int(
            gmpy2.invert(
                self._l_func(int(gmpy2.powmod(1 + n, self.q - 1, self.qsquare)), self.q),
                self.q,
            )
        )
        self.q_inv_p = int(gmpy2.invert(self.q, self.p))

    @staticmethod
    def _l_func(x: int, d: int) -> int:
        return (x - 1) // d

    def raw_decrypt(self, c: int) -> int:
        mp = self._l_func(int(gmpy2.powmod(c, self.p - 1, self.psquare)), self.p) * self.hp % self.p
        mq = self._l_func(int(gmpy2.powmod(c, self.q - 1, self.qsquare)), self.q) * self.hq % self.q
        u = (mp - mq) * self.q_inv_p % self.p
        return (mq + u * self.q) % self.public.n

    def __repr__(self) -> str:
        return f"PaillierSecretKey(bits={self.public.bit_length})"


class MockPublicKey:
    """Identity backend over Z_{2^k}: the ciphertext *is* the plaintext."""

    backend = "mock"

    def __init__(self, modulus: int) -> None:
        self.modulus = int(modulus)
        self.bit_length = self.modulus.bit_length() - 1  # modulus = 2^k

    @property
    def ring_size(self) -> int:
        return self.modulus

    @property
    def group_bound(self) -> int:
        return self.modulus

    def raw_encrypt(self, plaintext: int, alpha: int) -> int:
        return plaintext % self.modulus

    def raw_add(self, a: int, b: int) -> int:
        return (a + b) % self.modulus

    def raw_neg(self, a: int) -> int:
        return (-a) % self.modulus

    def raw_scalar_mul(self, a: int, k: int) -> int:
        return a * k % self.modulus

    def raw_sample_uniform(self, rng) -> int:
        return rng.randrange(self.modulus)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, MockPublicKey) and self.modulus == other.modulus

    def __hash__(self) -> int:
        return hash(("mock", self.modulus))

    def __repr__(self) -> str:
        return f"MockPublicKey(modulus=2^{self.bit_length})"


class MockSecretKey:
    backend = "mock"

    def __init__(self, public: MockPublicKey) -> None:
        self.public = public

    def raw_decrypt(self, c: int) -> int:
        return c % self.public.modulus

    def __repr__(self) -> str:
        return f"MockSecretKey(modulus=2^{self.public.bit_length})"


PublicKey = Union[PaillierPublicKey, MockPublicKey]
SecretKey = Union[PaillierSecretKey, MockSecretKey]


@dataclass(frozen=True)
class KeyPair:
    """A public key together with its decryption key."""

    public: PublicKey
    secret: SecretKey

    @property
    def backend(self) -> str:
        return self.public.backend


def _generate_prime(rng, bits: int) -> int:
    candidate = rng.getrandbits(bits) | (1 << (bits - 1)) | 1
    return int(gmpy2.next_prime(candidate))


def keygen(
    security_bits: int = 1024,
    rng_seed: Optional[int] = None,
    backend: str = "paillier",
) -> KeyPair:
    """Generate a key pair.

    Args:
        security_bits: modulus size.  Paillier supports 1024 and 2048 plus the
            128-bit test size; the mock backend accepts any k >= 8 and uses
            modulus 2^k.
        rng_seed: optional seed for reproducible key generation.  ``None``
            draws from the OS entropy pool.
        backend: ``"paillier"`` or ``"mock"``.
    """
    if backend == "mock":
        if security_bits < 8:
            raise ConfigurationError("mock backend needs at least 8 bits")
        public = MockPublicKey(1 << security_bits)
        return KeyPair(public=public, secret=MockSecretKey(public))
    if backend != "paillier":
        raise ConfigurationError(f"unknown backend {backend!r}")
    if security_bits not in PAILLIER_KEY_BITS:
        raise ConfigurationError(
            f"unsupported key size {security_bits}; expected one of {PAILLIER_KEY_BITS}"
        )
    rng = secrets.SystemRandom() if rng_seed is None else __import__("random").Random(rng_seed)
    half = security_bits // 2
    while True:
        p = _generate_prime(rng, half)
        q = _generate_prime(rng, half)
        if p == q:
            continue
        n = p * q
        if n.bit_length() == security_bits:
            break
    while True:
        y = rng.randrange(2, n)
        if math.gcd(y, n) == 1:
            break
    h = (-(y * y)) % n
    hn = int(gmpy2.powmod(h, n, n * n))
    public = PaillierPublicKey(n, hn)
    return KeyPair(public=public, secret=PaillierSecretKey(public, p, q))


# ---------------------------------------------------------------------------
# Ciphertexts and vector helpers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Ciphertext:
    """One ring element's ciphertext, bound to the key that produced it."""

    value: int
    key: PublicKey


@dataclass(frozen=True)
class CiphertextVector:
    """A non-empty sequence of ciphertexts under one key."""

    elements: tuple

    def __post_init__(self) -> None:
        if not self.elements:
            raise CryptoError("ciphertext vector must be non-empty")
        key = self.elements[0].key
        for ct in self.elements:
            if ct.key != key:
                raise KeyMismatchError("vector elements under different keys")

    @property
    def key(self) -> PublicKey:
        return self.elements[0].key

    def __len__(self) -> int:
        return len(self.elements)

    def __getitem__(self, idx):
        return self.elements[idx]

    def __iter__(self):
        return iter(self.elements)


def _resolve(key: Union[KeyPair, PublicKey, SecretKey]):
    """Return (public, secret-or-None) for any key handle."""
    if isinstance(key, KeyPair):
        return key.public, key.secret
    if isinstance(key, (PaillierSecretKey, MockSecretKey)):
        return key.public, key
    return key, None


def encrypt(key: Union[KeyPair, PublicKey], plaintext: int, rng=None) -> Ciphertext:
    """Encrypt one ring element (randomness from ``rng`` or the OS pool)."""
    public, _ = _resolve(key)
    if not 0 <= plaintext < public.ring_size:
        raise RangeError(f"plaintext {plaintext} outside [0, ring)")
    alpha = (rng.getrandbits(OBFUSCATION_BITS) if rng is not None else secrets.randbits(OBFUSCATION_BITS)) | 1
    TALLY.bump("encrypt")
    return Ciphertext(public.raw_encrypt(plaintext, alpha), public)


def decrypt(key: Union[KeyPair, SecretKey], ct: Ciphertext) -> int:
    public, secret = _resolve(key)
    if secret is None:
        raise CryptoError("decryption requires the secret key")
    if ct.key != public:
        raise KeyMismatchError("ciphertext under a different key")
    TALLY.bump("decrypt")
    return secret.raw_decrypt(ct.value)


def he_add(a: Ciphertext, b: Ciphertext) -> Ciphertext:
    """Homomorphic addition: dec(he_add(enc(x), enc(y))) = x + y mod ring."""
    if a.key != b.key:
        raise KeyMismatchError("operands under different keys")
    TALLY.bump("he_add")
    return Ciphertext(a.key.raw_add(a.value, b.value), a.key)


def he_neg(a: Ciphertext) -> Ciphertext:
    """Homomorphic negation: dec(he_neg(enc(x))) = -x mod ring."""
    TALLY.bump("he_neg")
    return Ciphertext(a.key.raw_neg(a.value), a.key)


def he_scalar_mul(a: Ciphertext, k: int) -> Ciphertext:
    """Homomorphic scalar multiply by a plaintext 0 <= k < ring."""
    if not 0 <= k < a.key.ring_size:
        raise RangeError(f"scalar {k} outside [0, ring)")
    TALLY.bump("he_scalar_mul")
    return Ciphertext(a.key.raw_scalar_mul(a.value, k), a.key)


def encrypt_uniform(key: Union[KeyPair, PublicKey], rng) -> Ciphertext:
    """Fresh encryption of a uniform ring element (sampled directly in the
    ciphertext group, which has the identical distribution)."""
    public, _ = _resolve(key)
    TALLY.bump("sample_uniform")
    return Ciphertext(public.raw_sample_uniform(rng), public)


def encrypt_vector(key, plaintexts: Sequence[int], rng=None) -> CiphertextVector:
    return CiphertextVector(tuple(encrypt(key, pt, rng) for pt in plaintexts))


def decrypt_vector(key, ctv: CiphertextVector) -> list:
    return [decrypt(key, ct) for ct in ctv]


def vec_add(a: CiphertextVector, b: CiphertextVector) -> CiphertextVector:
    if len(a) != len(b):
        raise CryptoError(f"vector length mismatch: {len(a)} != {len(b)}")
    return CiphertextVector(tuple(he_add(x, y) for x, y in zip(a, b)))


def vec_neg(a: CiphertextVector) -> CiphertextVector:
    return CiphertextVector(tuple(he_neg(x) for x in a))


def vec_scalar_mul(a: CiphertextVector, k: int) -> CiphertextVector:
    return CiphertextVector(tuple(he_scalar_mul(x, k) for x in a))


def uniform_vector(key, length: int, rng) -> CiphertextVector:
    return CiphertextVector(tuple(encrypt_uniform(key, rng) for _ in range(length)))


# ---------------------------------------------------------------------------
# Fixed-point codec
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FixedPointCodec:
    """Maps reals to ring elements: x -> round(x * scale) mod modulus.

    Negatives map to the upper half of the ring; decoding uses the signed
    midpoint convention.  Weighted aggregates of encoded values carry scale^2,
    which ``decode(value, scale=codec.scale_squared)`` handles.
    """

    scale: int
    modulus: int
    v_max: float = 1000.0

    def __post_init__(self) -> None:
        if self.scale < 2:
            raise ConfigurationError("scale must be >= 2")
        # Signed headroom for weighted sums: magnitudes reach scale^2 * v_max,
        # and encode/decode needs them clear of the midpoint.
        if self.modulus <= 4 * self.scale * self.scale * self.v_max:
            raise ConfigurationError(
                "modulus too small for scale/v_max (need modulus > 4*scale^2*v_max)"
            )

    @property
    def bit_length(self) -> int:
        return self.modulus.bit_length()

    @property
    def scale_squared(self) -> int:
        return self.scale * self.scale

    def encode(self, x: float) -> int:
        if not math.isfinite(x) or abs(x) > self.v_max:
            raise RangeError(f"value {x} outside [-{self.v_max}, {self.v_max}]")
        return round(x * self.scale) % self.modulus

    def decode(self, value: int, scale: Optional[int] = None) -> float:
        s = self.scale if scale is None else scale
        v = value % self.modulus
        if v > self.modulus // 2:
            v -= self.modulus
        return v / s

    def encode_vector(self, xs: Iterable[float]) -> list:
        return [self.encode(x) for x in xs]

    def decode_vector(self, values: Iterable[int], scale: Optional[int] = None) -> list:
        return [self.decode(v, scale) for v in values]


# ---------------------------------------------------------------------------
# Canonical serialization
# ---------------------------------------------------------------------------


def _magnitude_bytes(value: int) -> bytes:
    if value == 0:
        return b""
    return value.to_bytes((value.bit_length() + 7) // 8, "big")


def serialize_ciphertext(ct: Ciphertext) -> bytes:
    """Backend tag byte || 4-byte BE length || big-endian magnitude."""
    mag = _magnitude_bytes(ct.value)
    return BACKEND_TAGS[ct.key.backend] + len(mag).to_bytes(4, "big") + mag


def _parse_ciphertext(data: bytes, offset: int, key: PublicKey):
    if offset + 5 > len(data):
        raise SerializationError("truncated ciphertext header")
    backend = _TAG_TO_BACKEND.get(data[offset])
    if backend is None:
        raise SerializationError(f"unknown backend tag {data[offset]:#x}")
    if backend != key.backend:
        raise SerializationError(f"backend tag {backend!r} does not match key")
    length = int.from_bytes(data[offset + 1 : offset + 5], "big")
    end = offset + 5 + length
    if end > len(data):
        raise SerializationError("truncated ciphertext body")
    mag = data[offset + 5 : end]
    if length > 0 and mag[0] == 0:
        raise SerializationError("non-canonical magnitude (leading zero)")
    value = int.from_bytes(mag, "big") if length else 0
    if value >= key.group_bound:
        raise SerializationError("ciphertext value outside the group")
    return Ciphertext(value, key), end


def deserialize_ciphertext(data: bytes, key: PublicKey) -> Ciphertext:
    ct, end = _parse_ciphertext(data, 0, key)
    if end != len(data):
        raise SerializationError("trailing bytes after ciphertext")
    return ct


def serialize_vector(ctv: CiphertextVector) -> bytes:
    """4-byte BE element count || canonical elements."""
    parts = [len(ctv).to_bytes(4, "big")]
    parts.extend(serialize_ciphertext(ct) for ct in ctv)
    return b"".join(parts)


def deserialize_vector(data: bytes, key: PublicKey) -> CiphertextVector:
    if len(data) < 4:
        raise SerializationError("truncated vector header")
    count = int.from_bytes(data[:4], "big")
    if count == 0:
        raise SerializationError("vector must be non-empty")
    offset = 4
    elements = []
    for _ in range(count):
        ct, offset = _parse_ciphertext(data, offset, key)
        elements.append(ct)
    if offset != len(data):
        raise SerializationError("trailing bytes after vector")
    return CiphertextVector(tuple(elements))


# ---------------------------------------------------------------------------
# Key files
# ---------------------------------------------------------------------------


def save_keys(keys: KeyPair, path: str, include_secret: bool = True) -> None:
    """Write a key pair as JSON with decimal big-integer strings."""
    public = keys.public
    if keys.backend == "paillier":
        doc = {"backend": "paillier", "n": str(public.n), "hn": str(public.hn)}
        if include_secret:
            doc["p"] = str(keys.secret.p)
            doc["q"] = str(keys.secret.q)
    else:
        doc = {"backend": "mock", "modulus": str(public.modulus)}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_keys(path: str) -> KeyPair:
    """Load a key pair written by :func:`save_keys` (secret parts required
    for the Paillier backend)."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    backend = doc.get("backend")
    if backend == "mock":
        public = MockPublicKey(int(doc["modulus"]))
        return KeyPair(public=public, secret=MockSecretKey(public))
    if backend != "paillier":
        raise SerializationError(f"unknown backend {backend!r} in key file")
    public = PaillierPublicKey(int(doc["n"]), int(doc["hn"]))
    if "p" not in doc or "q" not in doc:
        raise SerializationError("key file lacks secret components")
    return KeyPair(public=public, secret=PaillierSecretKey(public, int(doc["p"]), int(doc["q"])))


def load_public_key(path: str) -> PublicKey:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    backend = doc.get("backend")
    if backend == "mock":
        return MockPublicKey(int(doc["modulus"]))
    if backend != "paillier":
        raise SerializationError(f"unknown backend {backend!r} in key file")
    return PaillierPublicKey(int(doc["n"]), int(doc["hn"]))
