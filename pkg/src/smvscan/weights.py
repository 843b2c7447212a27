"""Self-describing binary container for model weights.

Layout: magic ``SMVW``, u16 format version, a block of length-prefixed
UTF-8 ``key=value`` header lines, a tensor table of (name, dims,
little-endian float32 data) entries, and a trailing 64-bit FNV-1a
checksum over the concatenated tensor payloads.  Integers are
little-endian throughout.  The format needs no framework on either side:
the trainer writes it with plain struct packing and the scanner reads it
back the same way.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ChecksumMismatch, ParseError

MAGIC = b"SMVW"
FORMAT_VERSION = 1

FNV_OFFSET = 14695981039346656037
FNV_PRIME = 1099511628211
_FNV_MASK = (1 << 64) - 1

# header keys every model file must declare, all integer-valued
REQUIRED_HEADER = (
    "vocab_size",
    "hidden_dim",
    "layer_count",
    "head_count",
    "ffn_dim",
    "max_seq_len",
)


def fnv1a(data: bytes, state: int = FNV_OFFSET) -> int:
    for byte in data:
        state = ((state ^ byte) * FNV_PRIME) & _FNV_MASK
    return state


@dataclass
class ModelWeights:
    header: dict[str, int]
    tensors: dict[str, np.ndarray] = field(default_factory=dict)
    version: int = FORMAT_VERSION

    def __post_init__(self):
        for key in REQUIRED_HEADER:
            if key not in self.header:
                raise ParseError(f"model header missing {key}")
        for name, t in self.tensors.items():
            if t.dtype != np.float32:
                self.tensors[name] = t.astype(np.float32)


def _tensor_payloads(tensors: dict[str, np.ndarray]):
    for name in tensors:
        yield np.ascontiguousarray(tensors[name], dtype=np.float32).tobytes()


def save_weights(weights: ModelWeights, path) -> None:
    out = bytearray()
    out += MAGIC
    out += struct.pack("<H", weights.version)

    lines = [f"{k}={weights.header[k]}" for k in sorted(weights.header)]
    out += struct.pack("<H", len(lines))
    for line in lines:
        enc = line.encode("utf-8")
        out += struct.pack("<H", len(enc))
        out += enc

    out += struct.pack("<H", len(weights.tensors))
    checksum = FNV_OFFSET
    for name, payload in zip(weights.tensors, _tensor_payloads(weights.tensors)):
        enc = name.encode("utf-8")
        t = weights.tensors[name]
        out += struct.pack("<H", len(enc))
        out += enc
        out += struct.pack("<B", t.ndim)
        for dim in t.shape:
            out += struct.pack("<I", dim)
        out += payload
        checksum = fnv1a(payload, checksum)
    out += struct.pack("<Q", checksum)
    Path(path).write_bytes(bytes(out))


class _Reader:
    def __init__(self, data: bytes, where: str):
        self.data = data
        self.pos = 0
        self.where = where

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ParseError(f"{self.where}: truncated at byte {self.pos}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]


def load_weights(path) -> ModelWeights:
    where = str(path)
    r = _Reader(Path(path).read_bytes(), where)
    if r.take(4) != MAGIC:
        raise ParseError(f"{where}: not a SMVW file")
    version = r.u16()
    if version != FORMAT_VERSION:
        raise ParseError(f"{where}: unsupported format version {version}")

    header: dict[str, int] = {}
    for _ in range(r.u16()):
        line = r.take(r.u16()).decode("utf-8")
        if "=" not in line:
            raise ParseError(f"{where}: header line {line!r} lacks '='")
        key, _, value = line.partition("=")
        try:
            header[key] = int(value)
        except ValueError:
            raise ParseError(f"{where}: non-integer header value {line!r}")

    tensors: dict[str, np.ndarray] = {}
    checksum = FNV_OFFSET
    for _ in range(r.u16()):
        name = r.take(r.u16()).decode("utf-8")
        rank = r.u8()
        shape = tuple(r.u32() for _ in range(rank))
        count = 1
        for dim in shape:
            count *= dim
        payload = r.take(count * 4)
        checksum = fnv1a(payload, checksum)
        tensors[name] = np.frombuffer(payload, dtype="<f4").reshape(shape).copy()

    stored = r.u64()
    if stored != checksum:
        raise ChecksumMismatch(
            f"{where}: checksum {stored:#018x} != computed {checksum:#018x}"
        )
    return ModelWeights(header=header, tensors=tensors, version=version)
