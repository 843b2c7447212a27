import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smvscan.bytecode import (
    decode,
    decode_hex,
    load_bytecode,
    normalize_hex,
    strip_trailer,
)
from smvscan.errors import EmptyInput, MalformedHex

from conftest import CORPUS, artifact


def test_normalize_hex_accepts_prefix_and_whitespace():
    assert normalize_hex("0x6001") == b"\x60\x01"
    assert normalize_hex("  60 01\n") == b"\x60\x01"
    assert normalize_hex("6001") == b"\x60\x01"


def test_normalize_hex_rejects_bad_input():
    with pytest.raises(MalformedHex):
        normalize_hex("0x601")
    with pytest.raises(MalformedHex):
        normalize_hex("60zz")


def test_decode_rejects_empty():
    assert normalize_hex("0x") == b""
    with pytest.raises(EmptyInput):
        decode(b"")


def test_push_immediates_and_truncation():
    # PUSH2 0x0102, then PUSH4 with only one immediate byte available
    stream = decode(bytes([0x61, 0x01, 0x02, 0x63, 0xAA]))
    p2, p4 = stream.code
    assert p2.mnemonic == "PUSH2" and p2.operand == 0x0102
    assert p4.mnemonic == "PUSH4"
    assert p4.truncated == 3
    assert len(p4.immediate) == 4  # zero padded
    assert stream.serialize() == bytes([0x61, 0x01, 0x02, 0x63, 0xAA])


def test_invalid_opcodes_become_single_byte_instructions():
    stream = decode(bytes([0xFE, 0x0C, 0x00]))
    assert [ins.size for ins in stream.code] == [1, 1, 1]
    assert stream.serialize() == bytes([0xFE, 0x0C, 0x00])


@given(st.binary(min_size=1, max_size=400))
@settings(max_examples=300)
def test_round_trip_property(raw):
    assert decode(raw).serialize() == raw


@given(st.binary(min_size=1, max_size=400))
@settings(max_examples=300)
def test_coverage_identity(raw):
    """Every byte belongs to exactly one instruction span."""
    stream = decode(raw)
    spans = [(ins.offset, ins.end) for ins in stream.code]
    covered = 0
    prev_end = 0
    for start, end in spans:
        assert start == prev_end
        covered += end - start
        prev_end = end
    # truncated trailing pushes still own their missing immediate bytes
    assert covered >= len(raw)
    assert stream.code_len == len(raw)


@pytest.mark.parametrize("name", CORPUS)
def test_fixture_round_trip_with_trailer(name):
    raw = normalize_hex(artifact(name)["runtime"])
    stream = strip_trailer(decode(raw))
    assert stream.trailer, f"{name} should carry a metadata trailer"
    assert stream.serialize() == raw


def test_strip_trailer_keeps_undeclared_tail():
    # no CBOR length suffix: nothing to strip
    raw = bytes([0x60, 0x01, 0x60, 0x02, 0x01, 0x00])
    stream = strip_trailer(decode(raw))
    assert stream.trailer == b""
    assert stream.code_len == len(raw)


def test_owner_of_covers_immediates():
    stream = decode(bytes([0x61, 0x01, 0x02, 0x01]))
    push = stream.code[0]
    assert stream.owner_of(0) is push
    assert stream.owner_of(1) is push
    assert stream.owner_of(2) is push
    assert stream.owner_of(3).mnemonic == "ADD"


def test_load_bytecode_hex_and_bin(tmp_path):
    hexfile = tmp_path / "c.hex"
    hexfile.write_text("0x600160020100\n")
    binfile = tmp_path / "c.bin"
    binfile.write_bytes(bytes.fromhex("600160020100"))
    assert load_bytecode(hexfile) == load_bytecode(binfile)


def test_decode_hex_convenience():
    stream = decode_hex("0x6001")
    assert stream.code[0].operand == 1
