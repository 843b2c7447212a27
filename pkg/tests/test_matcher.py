import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smvscan.db import SubcontractDb, SubcontractRecord
from smvscan.errors import EmptyContractSignature
from smvscan.matcher import (
    THETA_LEN,
    THETA_TYPE,
    match,
    opcode_length_similarity,
    opcode_type_similarity,
    presence_vector,
)
from smvscan.signatures import SYMBOLS, MethodSignature

symbol = st.sampled_from(SYMBOLS)
signature = st.lists(symbol, min_size=1, max_size=12).map(tuple)


def cosine_oracle(a, b) -> float:
    """Brute-force 18-dim cosine over presence vectors."""
    va = np.array(presence_vector(a), dtype=float)
    vb = np.array(presence_vector(b), dtype=float)
    na, nb = np.linalg.norm(va), np.linalg.norm(vb)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(va, vb) / (na * nb))


@given(signature, signature)
@settings(max_examples=500)
def test_type_similarity_matches_cosine(a, b):
    assert abs(opcode_type_similarity(a, b) - cosine_oracle(a, b)) < 1e-9


@given(signature, signature)
@settings(max_examples=200)
def test_type_similarity_symmetric_and_bounded(a, b):
    s = opcode_type_similarity(a, b)
    assert 0.0 <= s <= 1.0 + 1e-12
    assert s == opcode_type_similarity(b, a)
    assert opcode_type_similarity(a, a) == pytest.approx(1.0)


def test_type_similarity_empty_side_is_zero():
    assert opcode_type_similarity((), ("R",)) == 0.0
    assert opcode_type_similarity(("R",), ()) == 0.0


@given(signature, signature)
@settings(max_examples=200)
def test_length_similarity_symmetric_and_bounded(a, b):
    s = opcode_length_similarity(a, b)
    assert 0.0 <= s <= 1.0
    assert s == opcode_length_similarity(b, a)


def test_length_similarity_rejects_empty_contract():
    with pytest.raises(EmptyContractSignature):
        opcode_length_similarity(("R",), ())


def test_length_similarity_verbatim_is_directional():
    db_sig = ("R",) * 4
    contract = ("R",) * 8
    assert opcode_length_similarity(db_sig, contract, verbatim=True) == 0.5
    assert opcode_length_similarity(contract, db_sig, verbatim=True) == 2.0
    assert opcode_length_similarity(db_sig, contract) == 0.5


def _record(key_suffix, intra, chain=None):
    return SubcontractRecord(
        subcontract=f"Lib{key_suffix}",
        version="1",
        method="m",
        selector=None,
        visibility="internal",
        intra=intra,
        chain=chain if chain is not None else intra,
    )


def test_match_requires_both_features():
    """Chain agreement alone must not produce a match."""
    contract_sig = MethodSignature(
        region=0,
        intra=("E0", "E0", "E0"),
        chain=("R", "W", "I", "Re"),
    )
    rec = _record("A", intra=("R", "W", "I", "Re"), chain=("R", "W", "I", "Re"))
    db = SubcontractDb([rec])
    assert match({0: contract_sig}, db) == []

    agreeing = MethodSignature(
        region=0, intra=("R", "W", "I", "Re"), chain=("R", "W", "I", "Re")
    )
    got = match({0: agreeing}, db)
    assert len(got) == 1 and got[0].best


def test_match_thresholds_gate():
    sig = MethodSignature(region=0, intra=("R", "W"), chain=("R", "W"))
    near = _record("A", intra=("R", "I"))  # shares one of two symbols
    db = SubcontractDb([near])
    loose = match({0: sig}, db, theta1=0.4, theta2=0.5)
    tight = match({0: sig}, db, theta1=0.9, theta2=0.5)
    assert len(loose) == 1
    assert tight == []


def test_best_match_breaks_ties_by_key():
    sig = MethodSignature(region=0, intra=("R", "W"), chain=("R", "W"))
    db = SubcontractDb(
        [_record("B", intra=("R", "W")), _record("A", intra=("R", "W"))]
    )
    got = match({0: sig}, db)
    assert len(got) == 2
    best = [m for m in got if m.best]
    assert len(best) == 1
    assert best[0].record.subcontract == "LibA"


def test_empty_chain_regions_are_skipped():
    sig = MethodSignature(region=0, intra=(), chain=())
    db = SubcontractDb([_record("A", intra=("R",))])
    assert match({0: sig}, db) == []


def test_default_thresholds():
    assert THETA_TYPE == 0.82
    assert THETA_LEN == 0.75
