"""Opcode-type signatures for recovered method regions.

Every instruction of a region maps to at most one of 18 symbols (reads,
writes, control transfers, message-context probes, comparisons, returns,
events, reverts, gas probes, and the nine precompile targets).  The intra
signature lists symbols in offset order with nested callee regions cut
out; the chain signature appends, for every call chain leaving the
region, the intra signature of the chain's final callee.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import opcodes as op
from .cfg import ControlFlowGraph, call_chains
from .errors import InvalidSymbol

# Canonical symbol order; presence vectors and serialized signatures use it.
SYMBOLS: tuple[str, ...] = (
    "R", "W", "C0", "C1", "I", "Re", "E0", "M1", "M2",
    "P1", "P2", "P3", "P4", "P5", "P6", "P7", "P8", "P9",
)
VALID_SYMBOLS = frozenset(SYMBOLS)


@dataclass(frozen=True)
class MethodSignature:
    """Intra and chain symbol sequences for one region."""

    region: int
    intra: tuple[str, ...]
    chain: tuple[str, ...]


def classify(ins, return_jumps: set[int], precompile_sites: dict[int, int]) -> str | None:
    """Symbol for one instruction, or None when it contributes nothing."""
    code = ins.opcode
    if code == op.JUMP and ins.offset in return_jumps:
        return "Re"
    if code in (op.CALL, op.STATICCALL):
        target = precompile_sites.get(ins.offset)
        if target is not None:
            return f"P{target}"
    if code in op.READ_OPS:
        return "R"
    if code in op.WRITE_OPS:
        return "W"
    if code in op.METHOD_CALL_OPS:
        return "C0"
    if code in op.MESSAGE_CALL_OPS:
        return "C1"
    if code in op.IF_OPS:
        return "I"
    if code in op.RETURN_OPS:
        return "Re"
    if code in op.EVENT_OPS:
        return "E0"
    if code in op.REVERT_OPS:
        return "M1"
    if code in op.GAS_OPS:
        return "M2"
    return None


def _precompile_sites(cfg: ControlFlowGraph) -> dict[int, int]:
    out = {}
    for ev in cfg.call_events:
        t = ev.target_const
        if t is not None and op.PRECOMPILE_LOW <= t <= op.PRECOMPILE_HIGH:
            out[ev.site] = t
    return out


def extract_intra(cfg: ControlFlowGraph, region, regions) -> tuple[str, ...]:
    """Symbol sequence of a region, nested child regions excluded."""
    children = [
        r for r in regions
        if r.id != region.id and region.start <= r.start and r.end <= region.end
        and (r.start, r.end) != (region.start, region.end)
    ]
    return_jumps = cfg.return_jumps
    pre = _precompile_sites(cfg)
    out = []
    for ins in cfg.stream.code:
        o = ins.offset
        if not (region.start <= o < region.end):
            continue
        if any(c.start <= o < c.end for c in children):
            continue
        sym = classify(ins, return_jumps, pre)
        if sym is not None:
            out.append(sym)
    return tuple(out)


def extract_chain(root: int, chains: list[list[int]],
                  intra_by_id: dict[int, tuple[str, ...]]) -> tuple[str, ...]:
    """Chain signature: own intra, then the intra of each chain's last callee.

    Chains come pre-sorted by id sequence, beginning with the bare [root]
    chain, so a region with no outgoing calls keeps just its intra.
    """
    out = list(intra_by_id[root])
    for chain in chains:
        if chain[0] != root or len(chain) == 1:
            continue
        out.extend(intra_by_id[chain[-1]])
    return tuple(out)


def signatures_for(cfg: ControlFlowGraph, regions,
                   max_depth: int = 5) -> dict[int, MethodSignature]:
    """Intra and chain signatures for every region."""
    intra_by_id = {r.id: extract_intra(cfg, r, regions) for r in regions}
    chains = call_chains(cfg, regions, max_depth=max_depth)
    return {
        r.id: MethodSignature(
            region=r.id,
            intra=intra_by_id[r.id],
            chain=extract_chain(r.id, chains, intra_by_id),
        )
        for r in regions
    }


def parse_symbols(text: str) -> tuple[str, ...]:
    """Space-separated symbol string to a validated tuple."""
    parts = text.split()
    for p in parts:
        if p not in VALID_SYMBOLS:
            raise InvalidSymbol(f"unknown signature symbol {p!r}")
    return tuple(parts)


def render_symbols(symbols) -> str:
    return " ".join(symbols)
