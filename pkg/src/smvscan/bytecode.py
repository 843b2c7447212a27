"""Decoding of raw contract bytecode into an instruction stream.

The stream is the ground representation every later stage works from: each
instruction knows its byte offset, and re-serializing the stream (including
the stripped metadata trailer) reproduces the input bytes exactly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from . import opcodes
from .errors import EmptyInput, MalformedHex

_HEX_RE = re.compile(r"^[0-9a-fA-F]*$")

# CBOR metadata blobs appended by the Solidity compiler start with a small
# map header (0xa1..0xa3) and end with a 2-byte big-endian length field.
_CBOR_MAP_HEADS = (0xA1, 0xA2, 0xA3)


@dataclass(frozen=True)
class Instruction:
    """One decoded instruction.

    `immediate` is the logical push operand, zero-padded to its full width
    when the code ends mid-operand; `truncated` counts the padding bytes so
    serialization can reproduce the original input.
    """

    offset: int
    opcode: int
    immediate: bytes = b""
    truncated: int = 0

    @property
    def mnemonic(self) -> str:
        return opcodes.mnemonic(self.opcode)

    @property
    def size(self) -> int:
        """Bytes this instruction occupies in the code."""
        return 1 + len(self.immediate) - self.truncated

    @property
    def end(self) -> int:
        return self.offset + self.size

    @property
    def operand(self) -> int | None:
        """Push operand as an integer, None for non-push opcodes."""
        if opcodes.is_push(self.opcode):
            return int.from_bytes(self.immediate, "big")
        return None

    def __repr__(self) -> str:
        if self.immediate:
            return f"0x{self.offset:x}: {self.mnemonic} 0x{self.immediate.hex()}"
        return f"0x{self.offset:x}: {self.mnemonic}"


@dataclass(frozen=True)
class InstructionStream:
    """Decoded executable code plus the opaque metadata trailer."""

    code: tuple[Instruction, ...]
    code_len: int
    trailer: bytes = b""
    _index: dict[int, int] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(
            self, "_index", {ins.offset: i for i, ins in enumerate(self.code)}
        )

    def at(self, offset: int) -> Instruction | None:
        """Instruction starting exactly at `offset`, if any."""
        i = self._index.get(offset)
        return self.code[i] if i is not None else None

    def index_of(self, offset: int) -> int | None:
        return self._index.get(offset)

    def owner_of(self, offset: int) -> Instruction | None:
        """Instruction whose span covers `offset` (start byte or immediate)."""
        ins = self.at(offset)
        if ins is not None:
            return ins
        # binary search over sorted starts
        lo, hi = 0, len(self.code) - 1
        while lo <= hi:
            mid = (lo + hi) // 2
            ins = self.code[mid]
            if ins.offset <= offset < ins.end:
                return ins
            if offset < ins.offset:
                hi = mid - 1
            else:
                lo = mid + 1
        return None

    def is_jumpdest(self, offset: int) -> bool:
        ins = self.at(offset)
        return ins is not None and ins.opcode == opcodes.JUMPDEST

    def serialize(self) -> bytes:
        """Reconstruct the exact input bytes (code followed by trailer)."""
        out = bytearray()
        for ins in self.code:
            out.append(ins.opcode)
            if ins.immediate:
                keep = len(ins.immediate) - ins.truncated
                out.extend(ins.immediate[:keep])
        out.extend(self.trailer)
        return bytes(out)


def normalize_hex(text: str) -> bytes:
    """Parse ASCII hex with optional 0x prefix and embedded whitespace."""
    cleaned = re.sub(r"\s+", "", text)
    if cleaned.lower().startswith("0x"):
        cleaned = cleaned[2:]
    if not _HEX_RE.match(cleaned):
        raise MalformedHex("input contains non-hex characters")
    if len(cleaned) % 2 != 0:
        raise MalformedHex("odd-length hex input")
    return bytes.fromhex(cleaned)


def decode(data: bytes) -> InstructionStream:
    """Decode raw bytes into instructions.

    Every byte is covered by exactly one instruction or one push immediate.
    Unknown opcodes decode as single-byte instructions so data islands stay
    visible to boundary recovery.
    """
    if not data:
        raise EmptyInput("no bytes to decode")
    out: list[Instruction] = []
    i = 0
    n = len(data)
    while i < n:
        op = data[i]
        width = opcodes.immediate_size(op)
        if width:
            raw = data[i + 1 : i + 1 + width]
            pad = width - len(raw)
            ins = Instruction(i, op, raw + b"\x00" * pad, truncated=pad)
        else:
            ins = Instruction(i, op)
        out.append(ins)
        i += ins.size
    return InstructionStream(tuple(out), n)


def decode_hex(text: str) -> InstructionStream:
    return decode(normalize_hex(text))


def strip_trailer(stream: InstructionStream) -> InstructionStream:
    """Split off the compiler metadata suffix when one is present.

    The suffix declares its own length in its final 2 bytes; absent or
    implausible suffixes leave the stream unchanged.
    """
    raw = stream.serialize()
    total = len(raw)
    if total < 4:
        return stream
    declared = int.from_bytes(raw[-2:], "big")
    blob_start = total - 2 - declared
    if declared < 1 or blob_start < 1:
        return stream
    if raw[blob_start] not in _CBOR_MAP_HEADS:
        return stream
    exe = decode(raw[:blob_start])
    return InstructionStream(exe.code, exe.code_len, trailer=raw[blob_start:])


def load_bytecode(path: str | Path) -> InstructionStream:
    """Read a `.hex` (ASCII hex) or `.bin` (raw) file and decode it."""
    p = Path(path)
    blob = p.read_bytes()
    if p.suffix == ".bin":
        data = blob
    else:
        try:
            data = normalize_hex(blob.decode("ascii"))
        except UnicodeDecodeError as exc:
            raise MalformedHex(f"{p}: not ASCII hex") from exc
    if not data:
        raise EmptyInput(str(p))
    return strip_trailer(decode(data))
