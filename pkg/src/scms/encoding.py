"""Canonical deterministic binary codec.

Encodes a restricted value model (None, bool, int, bytes, str, list, dict
with string keys) such that equal values always produce identical bytes:
integers use minimal-width two's complement and dict entries are sorted by
their UTF-8 key bytes. Used for message payloads, bus envelopes and store
snapshots. Certificate and CRL wire formats have their own fixed layouts
in certmodel.
"""

from __future__ import annotations

from .errors import ParseError

_NONE = 0x00
_FALSE = 0x01
_TRUE = 0x02
_INT = 0x03
_BYTES = 0x04
_STR = 0x05
_LIST = 0x06
_DICT = 0x07


def encode(value) -> bytes:
    out = bytearray()
    _encode_into(value, out)
    return bytes(out)


def _encode_into(value, out: bytearray) -> None:
    if value is None:
        out.append(_NONE)
    elif value is True:
        out.append(_TRUE)
    elif value is False:
        out.append(_FALSE)
    elif isinstance(value, int):
        width = max(1, (value.bit_length() + 8) // 8)
        out.append(_INT)
        out.append(width)
        out += value.to_bytes(width, "big", signed=True)
    elif isinstance(value, (bytes, bytearray)):
        out.append(_BYTES)
        out += len(value).to_bytes(4, "big")
        out += value
    elif isinstance(value, str):
        raw = value.encode()
        out.append(_STR)
        out += len(raw).to_bytes(4, "big")
        out += raw
    elif isinstance(value, (list, tuple)):
        out.append(_LIST)
        out += len(value).to_bytes(4, "big")
        for item in value:
            _encode_into(item, out)
    elif isinstance(value, dict):
        items = []
        for key, item in value.items():
            if not isinstance(key, str):
                raise TypeError(f"dict keys must be str, got {type(key).__name__}")
            items.append((key.encode(), item))
        items.sort(key=lambda kv: kv[0])
        out.append(_DICT)
        out += len(items).to_bytes(4, "big")
        for raw_key, item in items:
            out += len(raw_key).to_bytes(4, "big")
            out += raw_key
            _encode_into(item, out)
    else:
        raise TypeError(f"cannot canonically encode {type(value).__name__}")


def decode(data: bytes):
    value, offset = _decode_at(data, 0)
    if offset != len(data):
        raise ParseError("trailing bytes after value", offset)
    return value


def _need(data: bytes, offset: int, n: int) -> int:
    end = offset + n
    if end > len(data):
        raise ParseError("truncated input", offset)
    return end


def _decode_at(data: bytes, offset: int):
    _need(data, offset, 1)
    tag = data[offset]
    offset += 1
    if tag == _NONE:
        return None, offset
    if tag == _FALSE:
        return False, offset
    if tag == _TRUE:
        return True, offset
    if tag == _INT:
        end = _need(data, offset, 1)
        width = data[offset]
        end = _need(data, end, width)
        return int.from_bytes(data[offset + 1 : end], "big", signed=True), end
    if tag == _BYTES or tag == _STR:
        end = _need(data, offset, 4)
        length = int.from_bytes(data[offset:end], "big")
        end2 = _need(data, end, length)
        raw = data[end:end2]
        return (raw if tag == _BYTES else raw.decode()), end2
    if tag == _LIST:
        end = _need(data, offset, 4)
        count = int.from_bytes(data[offset:end], "big")
        items = []
        offset = end
        for _ in range(count):
            item, offset = _decode_at(data, offset)
            items.append(item)
        return items, offset
    if tag == _DICT:
        end = _need(data, offset, 4)
        count = int.from_bytes(data[offset:end], "big")
        offset = end
        result = {}
        for _ in range(count):
            end = _need(data, offset, 4)
            klen = int.from_bytes(data[offset:end], "big")
            end2 = _need(data, end, klen)
            key = data[end:end2].decode()
            value, offset = _decode_at(data, end2)
            result[key] = value
        return result, offset
    raise ParseError(f"unknown type tag {tag:#x}", offset - 1)
