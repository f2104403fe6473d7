"""Block PRF and truncated hashing.

``prf_block`` is AES-128 in Davies-Meyer mode (cipher output XOR input),
the one-way block function behind both key expansion and pre-linkage
values. ``hash_truncated`` keeps the u most significant bytes of SHA-256.
"""

from __future__ import annotations

import hashlib
from functools import lru_cache

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

KEY_BYTES = 16
BLOCK_BYTES = 16


@lru_cache(maxsize=1024)
def _cipher(key: bytes) -> Cipher:
    return Cipher(algorithms.AES(key), modes.ECB())


def aes_block(key: bytes, block: bytes) -> bytes:
    """Raw single-block AES-128-ECB encryption."""
    if len(key) != KEY_BYTES:
        raise ValueError(f"key must be {KEY_BYTES} bytes")
    if len(block) != BLOCK_BYTES:
        raise ValueError(f"block must be {BLOCK_BYTES} bytes")
    return _cipher(key).encryptor().update(block)


def prf_block(key: bytes, block: bytes) -> bytes:
    """Davies-Meyer: AES_key(block) XOR block."""
    out = aes_block(key, block)
    return bytes(a ^ b for a, b in zip(out, block))


def prf_blocks(key: bytes, blocks: list[bytes]) -> list[bytes]:
    """Davies-Meyer over several blocks under one key (one cipher pass)."""
    if len(key) != KEY_BYTES:
        raise ValueError(f"key must be {KEY_BYTES} bytes")
    joined = b"".join(blocks)
    enc = _cipher(key).encryptor().update(joined)
    return [
        bytes(a ^ b for a, b in zip(enc[i : i + 16], joined[i : i + 16]))
        for i in range(0, len(joined), 16)
    ]


def hash_truncated(data: bytes, u: int) -> bytes:
    """The u most significant bytes of SHA-256(data), 1 <= u <= 32."""
    if not 1 <= u <= 32:
        raise ValueError(f"truncation length {u} not in [1, 32]")
    return hashlib.sha256(data).digest()[:u]
