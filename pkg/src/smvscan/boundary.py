"""Method-region recovery.

Public regions come from the selector dispatcher and are authoritative.
Internal and compiler-inlined (inherited) regions come either from the
internal-call idiom (heuristic engine) or from S/E/N labels predicted by a
learned model.  Model output only ever adds regions inside spans the
heuristic left unlabeled.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import opcodes as op
from .cfg import ControlFlowGraph
from .errors import WindowOutOfRange

PAD, LABEL_S, LABEL_E, LABEL_N, MASK = 0, 1, 2, 3, 4
RESERVED = 5
VOCAB_SIZE = 256 + RESERVED

_TERMINATORS = frozenset(
    {op.JUMP, op.STOP, op.RETURN, op.REVERT, op.INVALID, op.SELFDESTRUCT}
)


@dataclass(frozen=True)
class BoundaryLabel:
    offset: int
    label: str  # "S" | "E" | "N"
    confidence: float
    source: str  # "heuristic" | "model"


@dataclass(frozen=True)
class MethodRegion:
    id: int
    start: int
    end: int  # exclusive
    kind: str  # "public" | "internal" | "inherited-recovered"
    selector: int | None = None
    source: str = "heuristic"

    def contains(self, other: "MethodRegion") -> bool:
        return self.start <= other.start and other.end <= self.end


def tokenize(source, window: tuple[int, int], max_seq_len: int = 512) -> list[int]:
    """One token per byte, shifted past the reserved ids, PAD-padded."""
    if hasattr(source, "serialize"):
        data = source.serialize()[: source.code_len]
    else:
        data = source
    lo, hi = window
    if lo < 0 or hi > len(data) or lo > hi:
        raise WindowOutOfRange(f"window [{lo},{hi}) outside 0..{len(data)}")
    toks = [b + RESERVED for b in data[lo:hi]]
    if len(toks) > max_seq_len:
        toks = toks[:max_seq_len]
    toks.extend([PAD] * (max_seq_len - len(toks)))
    return toks


def _reachable_extent(cfg: ControlFlowGraph, entry_offset: int,
                      through_calls: bool) -> int:
    """Max end offset over blocks reachable intra-procedurally from entry.

    With through_calls the walk follows call and return edges too (used to
    cap public spans); without it, call sites continue at their return
    offset and return jumps stop the walk.
    """
    start = cfg.block_at(entry_offset)
    if start is None:
        return entry_offset
    seen = {start}
    work = [start]
    extent = cfg.blocks[start].end
    while work:
        bid = work.pop()
        block = cfg.blocks[bid]
        extent = max(extent, block.end)
        last = block.last
        if not through_calls:
            if last.offset in cfg.return_jumps:
                continue
            if last.offset in cfg.internal_calls:
                ret = cfg.internal_calls[last.offset][1]
                rb = cfg.block_at(ret)
                if rb is not None and rb not in seen:
                    seen.add(rb)
                    work.append(rb)
                continue
        for dst, kind in cfg.successors(bid):
            if dst < 0 or dst in seen:
                continue
            seen.add(dst)
            work.append(dst)
    return extent


def recover_heuristic(cfg: ControlFlowGraph) -> list[MethodRegion]:
    stream = cfg.stream
    public_targets = {}
    for sel, bid in cfg.public_entries.items():
        start = cfg.blocks[bid].start
        public_targets.setdefault(start, sel)

    regions: list[tuple[int, int, str, int | None]] = []
    pub_starts = sorted(public_targets)
    for i, start in enumerate(pub_starts):
        if i + 1 < len(pub_starts):
            end = pub_starts[i + 1]
        else:
            end = _reachable_extent(cfg, start, through_calls=True)
        regions.append((start, max(end, start + 1), "public", public_targets[start]))

    internal_targets = sorted(
        {callee for callee, _ret in cfg.internal_calls.values()} - set(public_targets)
    )
    for start in internal_targets:
        idx = stream.index_of(start)
        prev = stream.code[idx - 1] if idx and idx > 0 else None
        kind = "internal"
        if prev is not None and prev.opcode in _TERMINATORS:
            kind = "inherited-recovered"
        end = _reachable_extent(cfg, start, through_calls=False)
        regions.append((start, max(end, start + 1), kind, None))

    regions.sort(key=lambda r: (r[0], -r[1]))
    out: list[MethodRegion] = []
    last_internal = -1
    for start, end, kind, sel in regions:
        # clip partial overlaps so regions either nest or are disjoint
        if kind != "public" and last_internal >= 0:
            p = out[last_internal]
            if p.start < start < p.end < end:
                out[last_internal] = MethodRegion(p.id, p.start, start, p.kind,
                                                  p.selector, p.source)
        r = MethodRegion(len(out), start, end, kind, sel)
        out.append(r)
        if kind != "public":
            last_internal = len(out) - 1
    return out


def labels_to_regions(labels: list[BoundaryLabel], cfg: ControlFlowGraph) -> list[MethodRegion]:
    """Pair S/E labels into regions and merge with heuristic publics."""
    pairs: list[tuple[int, int, float]] = []
    open_s: tuple[int, float] | None = None
    code_len = cfg.stream.code_len
    for lab in sorted(labels, key=lambda l: l.offset):
        if lab.label == "S":
            if open_s is not None and lab.offset > open_s[0]:
                pairs.append((open_s[0], lab.offset, open_s[1]))
            open_s = (lab.offset, lab.confidence)
        elif lab.label == "E":
            if open_s is not None and lab.offset > open_s[0]:
                pairs.append((open_s[0], lab.offset, open_s[1]))
                open_s = None
    if open_s is not None and code_len > open_s[0]:
        pairs.append((open_s[0], code_len, open_s[1]))

    base = [r for r in recover_heuristic(cfg) if r.kind == "public"]
    out = list(base)
    for start, end, _conf in pairs:
        if any(r.start == start for r in out):
            continue
        crosses = any(
            (start < r.start < end < r.end) or (r.start < start < r.end < end)
            for r in out
        )
        if crosses:
            continue
        out.append(MethodRegion(0, start, end, "inherited-recovered", None, "model"))
    out.sort(key=lambda r: (r.start, -r.end))
    return [MethodRegion(i, r.start, r.end, r.kind, r.selector, r.source)
            for i, r in enumerate(out)]


def merge_regions(heuristic: list[MethodRegion], model: list[MethodRegion]) -> list[MethodRegion]:
    """Union for --boundary both: heuristic wins wherever it labeled."""
    out = list(heuristic)
    for m in model:
        if m.source != "model":
            continue
        clash = any(
            not (m.end <= r.start or r.end <= m.start)
            for r in heuristic if r.kind != "public"
        )
        if not clash:
            out.append(m)
    out.sort(key=lambda r: (r.start, -r.end))
    return [MethodRegion(i, r.start, r.end, r.kind, r.selector, r.source)
            for i, r in enumerate(out)]


def recover_model(stream, weights, max_seq_len: int | None = None) -> list[BoundaryLabel]:
    """Sliding-window model inference over the executable bytes."""
    from .model import TransformerEncoder

    enc = TransformerEncoder(weights)
    seq = max_seq_len or enc.max_seq_len
    data = stream.serialize()[: stream.code_len]
    if not data:
        return []
    stride = max(seq // 2, 1)
    best: dict[int, tuple[str, float]] = {}
    lo = 0
    while True:
        hi = min(lo + seq, len(data))
        toks = tokenize(data, (lo, hi), seq)
        labels, confs = enc.classify(toks)
        for i in range(hi - lo):
            offset = lo + i
            cur = best.get(offset)
            if cur is None or confs[i] > cur[1]:
                best[offset] = (labels[i], confs[i])
        if hi >= len(data):
            break
        lo += stride

    # snap byte labels onto instruction starts
    per_ins: dict[int, tuple[str, float]] = {}
    for offset, (lab, conf) in best.items():
        owner = stream.owner_of(offset)
        if owner is None:
            continue
        cur = per_ins.get(owner.offset)
        if cur is None or conf > cur[1]:
            per_ins[owner.offset] = (lab, conf)
    return [
        BoundaryLabel(off, lab, conf, "model")
        for off, (lab, conf) in sorted(per_ins.items())
    ]
