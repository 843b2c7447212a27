"""Signature matching between recovered regions and database records.

Two complementary scores gate a match: cosine similarity of 18-dim symbol
presence vectors (which symbol types appear at all) and a length ratio
(how much code each side has).  Both are order-invariant, so differing
helper layout between compilations does not perturb them.  Matching uses
the chain feature on both sides; for a region without outgoing calls that
feature is just its intra signature.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

from .db import SubcontractDb, SubcontractRecord
from .errors import EmptyContractSignature
from .signatures import SYMBOLS, MethodSignature

log = logging.getLogger(__name__)

THETA_TYPE = 0.82
THETA_LEN = 0.75


@dataclass(frozen=True)
class Match:
    region: int
    record: SubcontractRecord
    p_type: float
    p_len: float
    best: bool


def presence_vector(symbols) -> tuple[int, ...]:
    present = set(symbols)
    return tuple(1 if s in present else 0 for s in SYMBOLS)


def opcode_type_similarity(a, b) -> float:
    """Cosine over symbol presence; an empty side scores zero."""
    sa, sb = set(a), set(b)
    if not sa or not sb:
        log.debug("empty signature in type similarity (%d vs %d)", len(sa), len(sb))
        return 0.0
    inter = len(sa & sb)
    return inter / math.sqrt(len(sa) * len(sb))


def opcode_length_similarity(db_sig, contract_sig, verbatim: bool = False) -> float:
    """Length ratio of the two signatures.

    The symmetric default divides the shorter by the longer, so the score
    never exceeds 1.  Verbatim mode divides the database length by the
    contract length as-is.
    """
    n_db, n_c = len(db_sig), len(contract_sig)
    if n_c == 0:
        raise EmptyContractSignature("contract signature is empty")
    if verbatim:
        return n_db / n_c
    if n_db == 0:
        return 0.0
    return min(n_db, n_c) / max(n_db, n_c)


def match(
    signatures: dict[int, MethodSignature],
    db: SubcontractDb,
    theta1: float = THETA_TYPE,
    theta2: float = THETA_LEN,
    verbatim: bool = False,
) -> list[Match]:
    """All (region, record) pairs passing both thresholds, best ones flagged.

    A candidate must clear both thresholds on the chain feature and again
    on the intra feature; chain scores alone let a stub or wrapper whose
    call tree resembles a record impersonate it.  Candidates are ordered
    by region, then score; the first candidate of a region is its best
    match, with ties broken by higher type score, then higher length
    score, then lexicographic record key.
    """
    out: list[Match] = []
    for rid in sorted(signatures):
        sig = signatures[rid]
        feature = sig.chain
        if not feature:
            log.debug("region %d has an empty chain feature, skipped", rid)
            continue
        candidates = []
        for rec in db:
            p_t = opcode_type_similarity(rec.chain, feature)
            if p_t < theta1:
                continue
            p_n = opcode_length_similarity(rec.chain, feature, verbatim=verbatim)
            if p_n < theta2:
                continue
            if not sig.intra:
                continue
            if opcode_type_similarity(rec.intra, sig.intra) < theta1:
                continue
            if opcode_length_similarity(rec.intra, sig.intra, verbatim=verbatim) < theta2:
                continue
            candidates.append((p_t, p_n, rec))
        candidates.sort(key=lambda c: (-c[0], -c[1], c[2].key))
        for i, (p_t, p_n, rec) in enumerate(candidates):
            out.append(Match(rid, rec, p_t, p_n, best=(i == 0)))
    return out


def best_matches(matches: list[Match]) -> dict[int, Match]:
    return {m.region: m for m in matches if m.best}
