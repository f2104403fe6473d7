"""Hybrid public-key encryption (ephemeral ECDH + AES-GCM).

Realizes every "encrypted to X" arrow in the issuance and reporting flows:
an ephemeral keypair is generated from the caller's deterministic stream,
the shared secret is hashed into a 128-bit AES-GCM key, and the payload is
sealed with a zero nonce (safe because every key is single-use). Tampering
or a wrong private key fails the GCM tag check.

Also provides static channel keys for fixed component pairs (LA -> PCA
application-layer encryption routed opaquely through the RA).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.asymmetric import ec
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from ..errors import DecryptionError
from .group import POINT_BYTES, GroupElement, Scalar

_CURVE = ec.SECP256R1()
_ZERO_NONCE = b"\x00" * 12
TAG_BYTES = 16


@dataclass(frozen=True)
class HybridCiphertext:
    ephemeral: GroupElement
    payload: bytes  # AES-GCM ciphertext without the tag
    tag: bytes

    def encode(self) -> bytes:
        return self.ephemeral.encode() + self.tag + self.payload

    @classmethod
    def decode(cls, data: bytes) -> "HybridCiphertext":
        if len(data) < POINT_BYTES + TAG_BYTES:
            raise DecryptionError("ciphertext too short")
        eph = GroupElement.decode(data[:POINT_BYTES])
        tag = data[POINT_BYTES : POINT_BYTES + TAG_BYTES]
        return cls(eph, data[POINT_BYTES + TAG_BYTES :], tag)


@lru_cache(maxsize=4096)
def _load_peer(encoded: bytes):
    point = GroupElement.decode(encoded)
    return ec.EllipticCurvePublicNumbers(point.x, point.y, _CURVE).public_key()


def _shared_key(priv: Scalar, peer: GroupElement, eph_encoded: bytes) -> bytes:
    secret = ec.derive_private_key(priv.value, _CURVE).exchange(
        ec.ECDH(), _load_peer(peer.encode())
    )
    return hashlib.sha256(secret + eph_encoded).digest()[:16]


def hybrid_encrypt(to: GroupElement, plaintext: bytes, rng) -> HybridCiphertext:
    if to.is_identity:
        raise ValueError("cannot encrypt to the identity element")
    eph_priv = rng.scalar()
    eph_key = ec.derive_private_key(eph_priv.value, _CURVE)
    nums = eph_key.public_key().public_numbers()
    ephemeral = GroupElement(nums.x, nums.y, _skip_check=True)
    eph_encoded = ephemeral.encode()
    secret = eph_key.exchange(ec.ECDH(), _load_peer(to.encode()))
    key = hashlib.sha256(secret + eph_encoded).digest()[:16]
    sealed = AESGCM(key).encrypt(_ZERO_NONCE, plaintext, None)
    return HybridCiphertext(ephemeral, sealed[:-TAG_BYTES], sealed[-TAG_BYTES:])


def hybrid_decrypt(priv: Scalar, ct: HybridCiphertext) -> bytes:
    if ct.ephemeral.is_identity:
        raise DecryptionError("identity ephemeral key")
    key = _shared_key(priv, ct.ephemeral, ct.ephemeral.encode())
    try:
        return AESGCM(key).decrypt(_ZERO_NONCE, ct.payload + ct.tag, None)
    except InvalidTag as exc:
        raise DecryptionError("authentication failed") from exc


def channel_key(own_priv: Scalar, peer_pub: GroupElement, label: bytes) -> bytes:
    """Static-DH symmetric key for a fixed component pair; both sides derive
    the same key from their own private half."""
    secret = ec.derive_private_key(own_priv.value, _CURVE).exchange(
        ec.ECDH(), _load_peer(peer_pub.encode())
    )
    return hashlib.sha256(secret + label).digest()[:16]


def channel_encrypt(key: bytes, plaintext: bytes, rng) -> bytes:
    nonce = rng.randbytes(12)
    return nonce + AESGCM(key).encrypt(nonce, plaintext, None)


def channel_decrypt(key: bytes, data: bytes) -> bytes:
    if len(data) < 12 + TAG_BYTES:
        raise DecryptionError("channel ciphertext too short")
    try:
        return AESGCM(key).decrypt(data[:12], data[12:], None)
    except InvalidTag as exc:
        raise DecryptionError("authentication failed") from exc
