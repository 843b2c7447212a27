import numpy as np
import pytest

from smvscan.errors import ChecksumMismatch, ParseError
from smvscan.weights import (
    FORMAT_VERSION,
    MAGIC,
    ModelWeights,
    fnv1a,
    load_weights,
    save_weights,
)

from conftest import tiny_model_weights


def test_round_trip_exact(tmp_path):
    w = tiny_model_weights(seed=7)
    path = tmp_path / "m.smvw"
    save_weights(w, path)
    again = load_weights(path)
    assert again.header == w.header
    assert set(again.tensors) == set(w.tensors)
    for name, t in w.tensors.items():
        got = again.tensors[name]
        assert got.dtype == np.float32
        assert got.shape == t.shape
        np.testing.assert_array_equal(got, t)


def test_save_is_deterministic(tmp_path):
    w = tiny_model_weights(seed=3)
    a, b = tmp_path / "a.smvw", tmp_path / "b.smvw"
    save_weights(w, a)
    save_weights(w, b)
    assert a.read_bytes() == b.read_bytes()


def test_magic_and_version_checked(tmp_path):
    w = tiny_model_weights()
    path = tmp_path / "m.smvw"
    save_weights(w, path)
    raw = bytearray(path.read_bytes())
    assert raw[:4] == MAGIC

    bad = tmp_path / "bad.smvw"
    bad.write_bytes(b"XXXX" + bytes(raw[4:]))
    with pytest.raises(ParseError):
        load_weights(bad)

    bumped = bytearray(raw)
    bumped[4:6] = int(FORMAT_VERSION + 1).to_bytes(2, "big")
    bad.write_bytes(bytes(bumped))
    with pytest.raises(ParseError):
        load_weights(bad)


def test_payload_corruption_fails_checksum(tmp_path):
    w = tiny_model_weights()
    path = tmp_path / "m.smvw"
    save_weights(w, path)
    raw = bytearray(path.read_bytes())
    # flip one byte well inside the tensor payload area
    raw[len(raw) // 2] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(ChecksumMismatch):
        load_weights(path)


def test_truncated_file_is_parse_error(tmp_path):
    w = tiny_model_weights()
    path = tmp_path / "m.smvw"
    save_weights(w, path)
    raw = path.read_bytes()
    path.write_bytes(raw[: len(raw) // 3])
    with pytest.raises(ParseError):
        load_weights(path)


def test_required_header_enforced():
    with pytest.raises(ParseError):
        ModelWeights(header={"vocab_size": 261}, tensors={})


def test_fnv1a_reference_values():
    # published FNV-1a 64-bit test vectors
    assert fnv1a(b"") == 0xCBF29CE484222325
    assert fnv1a(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a(b"foobar") == 0x85944171F73967E8


def test_tensors_cast_to_float32():
    w = tiny_model_weights()
    as64 = {k: v.astype(np.float64) for k, v in w.tensors.items()}
    again = ModelWeights(header=dict(w.header), tensors=as64)
    for t in again.tensors.values():
        assert t.dtype == np.float32
