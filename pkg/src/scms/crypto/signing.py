"""ECDSA signatures over the package group.

Signing is pure Python with a deterministic nonce derived from the private
key and digest, so identical inputs always yield identical signature bytes
(required for replayable scenarios and golden vectors). Verification is
delegated to the OpenSSL backend, which doubles as an independent check
that signing produces standard ECDSA; a pure-Python verifier is kept for
differential tests.

Signature encoding: 64 bytes, r then s, each 32 bytes big-endian.
"""

from __future__ import annotations

import hashlib
from functools import lru_cache

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric import ec
from cryptography.hazmat.primitives.asymmetric.utils import (
    Prehashed,
    encode_dss_signature,
)

from .group import G, ORDER, GroupElement, Scalar, mul_g, scalar_mult

SIGNATURE_BYTES = 64
_NONCE_LABEL = b"scms-ecdsa-nonce-v1"
_PREHASHED = ec.ECDSA(Prehashed(hashes.SHA256()))
_CURVE = ec.SECP256R1()


def sign(priv: Scalar, digest: bytes) -> bytes:
    """Sign a 32-byte digest; deterministic in (priv, digest)."""
    if len(digest) != 32:
        raise ValueError("digest must be 32 bytes")
    e = int.from_bytes(digest, "big") % ORDER
    ctr = 0
    while True:
        material = priv.to_bytes() + digest + _NONCE_LABEL
        if ctr:
            material += ctr.to_bytes(4, "big")
        k = int.from_bytes(hashlib.sha256(material).digest(), "big") % ORDER
        ctr += 1
        if k == 0:
            continue
        r = mul_g(Scalar(k)).x % ORDER
        if r == 0:
            continue
        s = pow(k, -1, ORDER) * (e + r * priv.value) % ORDER
        if s == 0:
            continue
        return r.to_bytes(32, "big") + s.to_bytes(32, "big")


@lru_cache(maxsize=4096)
def _load_public(encoded: bytes):
    point = GroupElement.decode(encoded)
    return ec.EllipticCurvePublicNumbers(point.x, point.y, _CURVE).public_key()


def verify(pub: GroupElement, digest: bytes, signature: bytes) -> bool:
    """True iff the signature is valid; malformed input returns False."""
    r, s = _split(signature)
    if r is None:
        return False
    if pub.is_identity or len(digest) != 32:
        return False
    try:
        key = _load_public(pub.encode())
        key.verify(encode_dss_signature(r, s), digest, _PREHASHED)
        return True
    except (InvalidSignature, ValueError):
        return False


def verify_pure(pub: GroupElement, digest: bytes, signature: bytes) -> bool:
    """Reference verifier, used to cross-check the OpenSSL path."""
    r, s = _split(signature)
    if r is None:
        return False
    if pub.is_identity or len(digest) != 32:
        return False
    e = int.from_bytes(digest, "big") % ORDER
    w = pow(s, -1, ORDER)
    point = scalar_mult(Scalar(e * w % ORDER), G) + scalar_mult(
        Scalar(r * w % ORDER), pub
    )
    if point.is_identity:
        return False
    return point.x % ORDER == r


def _split(signature: bytes):
    if len(signature) != SIGNATURE_BYTES:
        return None, None
    r = int.from_bytes(signature[:32], "big")
    s = int.from_bytes(signature[32:], "big")
    if not (1 <= r < ORDER and 1 <= s < ORDER):
        return None, None
    return r, s
