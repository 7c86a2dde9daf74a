"""Binary wire format for sketches.

Layout (all integers little-endian)::

    u8 kind | u8 version | header | payload

    hll:          header = u8 b, u64 seed;   payload = 2**b registers, 6 bits each
    exact:        header = u64 count;        payload = count sorted u64 ids
    exact_l2:     header = u64 count;        payload = count x (u64 id, i64 count), ids sorted
    countsketch:  header = u32 depth, u32 width, depth x (u64 bucket seed, u64 sign seed);
                  payload = depth*width i32 counters, row-major

The length of the encoded bytes is what a machine pays to ship the sketch.
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import DecodeError, IncompatibleSketchError
from .countsketch import CountSketch
from .exact import ExactL0, ExactL2
from .hll import MAX_BITS, MIN_BITS, HyperLogLog

VERSION = 1
KIND_HLL = 1
KIND_EXACT = 2
KIND_COUNTSKETCH = 3
KIND_EXACT_L2 = 4

_L2_PAIR = np.dtype([("id", "<u8"), ("count", "<i8")])

_I32_MIN, _I32_MAX = -(2**31), 2**31 - 1


def pack6(values: np.ndarray) -> bytes:
    """Pack 6-bit values (length divisible by 4) into 3 bytes per 4 values."""
    v = np.asarray(values, dtype=np.uint32).reshape(-1, 4)
    word = v[:, 0] | (v[:, 1] << 6) | (v[:, 2] << 12) | (v[:, 3] << 18)
    out = np.empty((v.shape[0], 3), dtype=np.uint8)
    out[:, 0] = word & 0xFF
    out[:, 1] = (word >> 8) & 0xFF
    out[:, 2] = (word >> 16) & 0xFF
    return out.tobytes()


def unpack6(data: bytes, count: int) -> np.ndarray:
    raw = np.frombuffer(data, dtype=np.uint8).reshape(-1, 3).astype(np.uint32)
    word = raw[:, 0] | (raw[:, 1] << 8) | (raw[:, 2] << 16)
    out = np.empty((raw.shape[0], 4), dtype=np.uint8)
    for j in range(4):
        out[:, j] = (word >> (6 * j)) & 0x3F
    return out.reshape(-1)[:count]


def register_bytes(b: int) -> int:
    return -(-(1 << b) * 6 // 8)


def serialize(sketch) -> bytes:
    if isinstance(sketch, HyperLogLog):
        head = struct.pack("<BBBQ", KIND_HLL, VERSION, sketch.b, sketch.seed)
        return head + pack6(sketch.registers)
    if isinstance(sketch, ExactL0):
        ids = np.array(sorted(sketch.elements), dtype="<u8")
        return struct.pack("<BBQ", KIND_EXACT, VERSION, ids.size) + ids.tobytes()
    if isinstance(sketch, ExactL2):
        pairs = np.array(sorted(sketch.counts.items()), dtype=_L2_PAIR)
        return struct.pack("<BBQ", KIND_EXACT_L2, VERSION, pairs.size) + pairs.tobytes()
    if isinstance(sketch, CountSketch):
        t = sketch.tables
        if t.size and (t.min() < _I32_MIN or t.max() > _I32_MAX):
            raise OverflowError("CountSketch counter does not fit the 32-bit wire format")
        head = struct.pack("<BBII", KIND_COUNTSKETCH, VERSION, sketch.depth, sketch.width)
        seeds = b"".join(struct.pack("<QQ", a, s) for a, s in sketch.seeds)
        return head + seeds + t.astype("<i4").tobytes()
    raise TypeError(f"no wire format for {type(sketch).__name__}")


def _need(data: bytes, size: int, what: str) -> None:
    if len(data) < size:
        raise DecodeError(f"truncated {what}: need {size} bytes, have {len(data)}")


def deserialize(data: bytes):
    data = bytes(data)
    _need(data, 2, "sketch tag")
    kind, version = data[0], data[1]
    if version != VERSION:
        raise DecodeError(f"unsupported wire version {version}")

    if kind == KIND_HLL:
        _need(data, 11, "hll header")
        b, seed = struct.unpack_from("<BQ", data, 2)
        if not MIN_BITS <= b <= MAX_BITS:
            raise DecodeError(f"hll precision {b} out of range")
        size = 11 + register_bytes(b)
        if len(data) != size:
            raise DecodeError(f"hll payload length {len(data)} != {size}")
        regs = unpack6(data[11:], 1 << b)
        if regs.max(initial=0) > 64 - b:
            raise DecodeError("hll register value out of range")
        return HyperLogLog(b, seed, regs)

    if kind == KIND_EXACT:
        _need(data, 10, "exact header")
        (count,) = struct.unpack_from("<Q", data, 2)
        if len(data) != 10 + 8 * count:
            raise DecodeError(f"exact payload length {len(data)} != {10 + 8 * count}")
        ids = np.frombuffer(data, dtype="<u8", offset=10, count=count)
        return ExactL0(ids.tolist())

    if kind == KIND_EXACT_L2:
        _need(data, 10, "exact_l2 header")
        (count,) = struct.unpack_from("<Q", data, 2)
        if len(data) != 10 + 16 * count:
            raise DecodeError(f"exact_l2 payload length {len(data)} != {10 + 16 * count}")
        pairs = np.frombuffer(data, dtype=_L2_PAIR, offset=10, count=count)
        return ExactL2(dict(zip(pairs["id"].tolist(), pairs["count"].tolist())))

    if kind == KIND_COUNTSKETCH:
        _need(data, 10, "countsketch header")
        depth, width = struct.unpack_from("<II", data, 2)
        if depth < 1 or width < 1:
            raise DecodeError(f"countsketch shape {depth}x{width} invalid")
        seed_end = 10 + 16 * depth
        size = seed_end + 4 * depth * width
        if len(data) != size:
            raise DecodeError(f"countsketch payload length {len(data)} != {size}")
        seeds = [struct.unpack_from("<QQ", data, 10 + 16 * r) for r in range(depth)]
        cs = CountSketch(depth, width, seeds)
        cs.tables[:] = np.frombuffer(data, dtype="<i4", offset=seed_end).reshape(depth, width)
        return cs

    raise DecodeError(f"unknown sketch kind {kind}")


def roundtrip(sketch):
    """Serialize then decode, returning ``(copy, n_bytes)``."""
    payload = serialize(sketch)
    return deserialize(payload), len(payload)


__all__ = [
    "serialize",
    "deserialize",
    "roundtrip",
    "register_bytes",
    "pack6",
    "unpack6",
    "DecodeError",
    "IncompatibleSketchError",
]
