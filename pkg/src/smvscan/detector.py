"""Vulnerability detection over matched regions.

Two indicator families are reported:

- conflict: two distinct regions, best-matched to different database
  records that are known (or measured) to implement the same job in
  divergent ways, where public entry points reaching each of them write
  a common storage slot.
- lack-of-check: a call into a matched internal method whose knowledge
  entry demands a guard, with no qualifying guard of the required kind
  dominating the call site.

Both are gated twice: the involved regions must be reachable from the
public dispatcher, and the state effect must be influenced by message
inputs (tainted write, call value, or call target).  When the taint pass
finds nothing attacker-controlled in the whole contract, candidates are
downgraded to warnings instead of silently dropped.

Guard recognition has three disqualifiers learned from compiler output:
arithmetic-overflow checks revert through the 0x4e487b71 panic builder,
calldata-shape checks are tainted only by CALLDATASIZE, and address
cleaning compares a value against its own masked copy.  None of those
protect a call, however dominant they are.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from . import opcodes as op
from .cfg import ControlFlowGraph, innermost_region, region_call_edges
from .db import KnowledgeBase, SubcontractDb
from .matcher import (
    Match,
    best_matches,
    opcode_length_similarity,
    opcode_type_similarity,
)
from .taint import C1_SOURCE_OPS, propagate, source_nodes

BINARY_COMPARES = frozenset({"LT", "GT", "SLT", "SGT", "EQ"})
PANIC_TAG = bytes.fromhex("4e487b71")
_REVERT_SCAN = 6


VARIABLE_CONFLICT = "variable-conflict"
LACK_OF_CHECK = "lack-of-security-check"


@dataclass(frozen=True)
class Trace:
    smv_type: str  # VARIABLE_CONFLICT | LACK_OF_CHECK
    entry_selector: int
    site: int  # byte offset anchoring the finding
    chain: tuple[int, ...]  # region ids, public entry first
    regions: tuple[int, ...]  # the implicated matched regions
    records: tuple[str, ...]  # Subcontract.method@version
    affected: tuple[str, ...]  # state descriptors at risk, non-empty
    source: str  # knowledge provenance tag
    sensitive: str | None = None  # exposure class (lack of check)
    guard: str | None = None  # missing guard kind (lack of check)
    counterpart_selector: int | None = None

    def to_dict(self) -> dict:
        evidence = {
            "records": list(self.records),
            "regions": list(self.regions),
            "source": self.source,
        }
        if self.sensitive is not None:
            evidence["sensitive"] = self.sensitive
        if self.guard is not None:
            evidence["missing_guard"] = self.guard
        if self.counterpart_selector is not None:
            evidence["counterpart_selector"] = f"{self.counterpart_selector:08x}"
        return {
            "smv_type": self.smv_type,
            "entry_selector": f"{self.entry_selector:08x}",
            "site": self.site,
            "chain": list(self.chain),
            "affected_slots": list(self.affected),
            "evidence": evidence,
        }


@dataclass
class Detection:
    traces: list[Trace]
    warnings: list[str]
    matched: dict[int, Match]
    reachable: dict[int, tuple[int, tuple[int, ...]]] = field(default_factory=dict)


def _record_label(rec) -> str:
    return f"{rec.qualname}@{rec.version}"


def entry_reach(regions, edges) -> dict[int, tuple[int, tuple[int, ...]]]:
    """Shortest region path from a public entry to every reachable region.

    Ties prefer the lower selector, so trace attribution is stable.
    """
    best: dict[int, tuple[int, int, tuple[int, ...]]] = {}
    entries = sorted(
        (r.selector, r.id) for r in regions if r.selector is not None
    )
    for sel, eid in entries:
        q = deque([(eid, (eid,))])
        seen = {eid}
        while q:
            rid, path = q.popleft()
            cur = best.get(rid)
            if cur is None or (len(path), sel) < (cur[0], cur[1]):
                best[rid] = (len(path), sel, path)
            for nxt in sorted(edges.get(rid, ())):
                if nxt not in seen:
                    seen.add(nxt)
                    q.append((nxt, path + (nxt,)))
    return {rid: (sel, path) for rid, (_d, sel, path) in best.items()}


def region_closure(edges, root: int) -> set[int]:
    seen = {root}
    work = [root]
    while work:
        rid = work.pop()
        for nxt in edges.get(rid, ()):
            if nxt not in seen:
                seen.add(nxt)
                work.append(nxt)
    return seen


def _push_panic(block) -> bool:
    for ins in block.instructions:
        imm = ins.immediate
        if imm and len(imm) >= 4 and imm[:4] == PANIC_TAG:
            return True
    return False


class _RegionGraph:
    """One region's blocks with internal calls stepped over.

    Shared helpers collapse whole-graph dominators to the dispatch prefix
    (every caller's return point becomes a predecessor), so guard
    domination is judged region-locally: a call-site block gets a direct
    edge to its return block and the callee's blocks stay out.
    """

    __slots__ = ("blocks", "succ", "idx", "dom", "entry")

    def __init__(self, blocks, succ, idx, dom, entry):
        self.blocks = blocks
        self.succ = succ
        self.idx = idx
        self.dom = dom
        self.entry = entry


def _region_graph(cfg: ControlFlowGraph, regions, region) -> _RegionGraph | None:
    mine = {
        b.id for b in cfg.blocks
        if innermost_region(regions, b.start) == region.id
    }
    entry = cfg.block_at(region.start)
    if entry is None or entry not in mine:
        return None
    succ: dict[int, list[tuple[int, str]]] = {}
    for b in mine:
        block = cfg.blocks[b]
        call = cfg.internal_calls.get(block.last.offset)
        if call is not None:
            rb = cfg.block_at(call[1])
            succ[b] = [(rb, "call")] if rb in mine else []
            continue
        succ[b] = [
            (d, k) for d, k in cfg.successors(b)
            if d >= 0 and d in mine
            and k in ("jump", "branch-taken", "fallthrough")
        ]
    seen = {entry}
    work = [entry]
    while work:
        b = work.pop()
        for d, _ in succ[b]:
            if d not in seen:
                seen.add(d)
                work.append(d)
    order = sorted(seen)
    succ = {b: [(d, k) for d, k in succ[b] if d in seen] for b in order}
    idx = {b: i for i, b in enumerate(order)}
    preds: dict[int, list[int]] = {b: [] for b in order}
    for b in order:
        for d, _ in succ[b]:
            preds[d].append(b)
    full = (1 << len(order)) - 1
    dom = {b: full for b in order}
    dom[entry] = 1 << idx[entry]
    changed = True
    while changed:
        changed = False
        for b in order:
            if b == entry:
                continue
            m = full
            hit = False
            for p in preds[b]:
                m &= dom[p]
                hit = True
            m = (m | (1 << idx[b])) if hit else (1 << idx[b])
            if m != dom[b]:
                dom[b] = m
                changed = True
    return _RegionGraph(set(order), succ, idx, dom, entry)


def _sub_reaches(rg: _RegionGraph, start: int, targets: set[int]) -> bool:
    if start in targets:
        return True
    seen = {start}
    work = [start]
    while work:
        b = work.pop()
        for d, _ in rg.succ.get(b, ()):
            if d in targets:
                return True
            if d not in seen:
                seen.add(d)
                work.append(d)
    return False


def _sub_scan_revert(cfg: ControlFlowGraph, rg: _RegionGraph, start: int,
                     budget: int = _REVERT_SCAN):
    """(reaches REVERT, panic builder seen) within `budget` region blocks."""
    seen = {start}
    q = deque([(start, 0)])
    reverts = False
    panics = False
    while q:
        bid, depth = q.popleft()
        block = cfg.blocks[bid]
        if _push_panic(block):
            panics = True
        if block.last.opcode == op.REVERT:
            reverts = True
        if depth >= budget:
            continue
        for nxt, _kind in rg.succ.get(bid, ()):
            if nxt not in seen:
                seen.add(nxt)
                q.append((nxt, depth + 1))
    return reverts, panics


def _unwrap_iszero(graph, v):
    while v.op == "ISZERO":
        ins = graph.inputs(v.nid)
        if len(ins) != 1:
            break
        v = graph.values[ins[0]]
    return v


def _param_sources(graph, leaves) -> set[int]:
    return {
        x.nid
        for x in leaves
        if x.op in ("CALLDATALOAD", "CALLDATACOPY") and (x.param is None or x.param >= 0)
    }


def _classify_guard(
    cfg: ControlFlowGraph,
    cond_nid: int,
    guarded_sources: set[int],
    dominating_write_descs: set[tuple],
    read_descs_by_site: dict[int, set[tuple]],
) -> set[str] | None:
    """Guard kinds a condition provides, or None when disqualified."""
    graph = cfg.graph
    v = graph.values[cond_nid]
    leaves = graph.leaves(v)

    c1 = [x for x in leaves if x.op in C1_SOURCE_OPS]
    if c1 and all(x.op == "CALLDATASIZE" for x in c1):
        return None  # calldata shape validation
    core = _unwrap_iszero(graph, v)
    core_in = graph.inputs(core.nid)
    if core.op == "EQ" and len(core_in) == 2:
        a, b = (graph.values[n] for n in core_in)
        if a.nid == b.nid:
            return None  # compare of a value against itself
        pa = _param_sources(graph, graph.leaves(a))
        pb = _param_sources(graph, graph.leaves(b))
        if pa and pa == pb and len(pa) == 1:
            return None  # masked copy of one parameter vs the parameter

    kinds: set[str] = set()
    if any(x.op == "CALLER" for x in leaves):
        kinds.add("caller-check")

    if core.op in BINARY_COMPARES and len(core_in) == 2:
        a, b = (graph.values[n] for n in core_in)
        for x, y in ((a, b), (b, a)):
            lx = graph.leaves(x)
            ly = graph.leaves(y)
            x_guarded = bool({n.nid for n in lx} & guarded_sources)
            y_clean = not ({n.nid for n in ly} & guarded_sources)
            y_anchored = (
                any(n.op in ("SLOAD", "CALLER") for n in ly)
                or all(n.const is not None for n in ly)
            )
            if x_guarded and y_clean and y_anchored:
                kinds.add("value-bound")
                break

    for leaf in leaves:
        if leaf.op != "SLOAD":
            continue
        for desc in read_descs_by_site.get(leaf.site, ()):
            if desc[0] != "opaque" and desc in dominating_write_descs:
                kinds.add("reentrancy-guard")
    return kinds


def guard_kinds_on_path(
    cfg: ControlFlowGraph,
    regions,
    by_id: dict,
    path: tuple[int, ...],
    site: int,
    guarded_sources: set[int],
    read_by_site: dict[int, set[tuple]],
    writes_by_block: dict[int, set[tuple]],
    cache: dict,
) -> set[str]:
    """Kinds of qualifying guards dominating a call along its entry path.

    `path` names the regions from the public entry down to the caller;
    `site` is the call being checked.  For every region on the path, a
    guard must dominate each call site stepping to the next region (or the
    checked call itself in the last one) in that region's summarized
    graph, split execution into a side that keeps going and a side that
    reverts, and carry a condition that survives the disqualifiers.
    """
    steps = []
    for i, rid in enumerate(path):
        if rid not in cache:
            cache[rid] = _region_graph(cfg, regions, by_id[rid])
        rg = cache[rid]
        if rg is None:
            continue
        if i + 1 < len(path):
            nxt = by_id[path[i + 1]].start
            targets = {
                cfg.block_of(s)
                for s, (callee, _r) in cfg.internal_calls.items()
                if callee == nxt and innermost_region(regions, s) == rid
            }
        else:
            targets = {cfg.block_of(site)}
        targets = {t for t in targets if t is not None and t in rg.blocks}
        if not targets:
            continue
        dmask = (1 << len(rg.idx)) - 1
        for t in targets:
            dmask &= rg.dom[t]
        dom_blocks = {b for b in rg.blocks if (dmask >> rg.idx[b]) & 1}
        steps.append((rg, targets, dom_blocks))

    dominating_writes = {
        d
        for _rg, _t, dom_blocks in steps
        for b in dom_blocks
        for d in writes_by_block.get(b, ())
        if d[0] != "opaque"
    }

    kinds: set[str] = set()
    for rg, targets, dom_blocks in steps:
        for b in sorted(dom_blocks - targets):
            block = cfg.blocks[b]
            if block.last.opcode != op.JUMPI:
                continue
            sides = [d for d, k in rg.succ.get(b, ())
                     if k in ("branch-taken", "fallthrough")]
            revert_sides = [
                s for s in sides if not _sub_reaches(rg, s, targets)
            ]
            if not revert_sides or len(revert_sides) == len(sides):
                continue
            verdicts = [_sub_scan_revert(cfg, rg, s) for s in revert_sides]
            if not any(rev for rev, _p in verdicts):
                continue
            if all(panic for rev, panic in verdicts if rev):
                continue  # compiler panic path, not a programmer guard
            for cond_nid in cfg.branch_conds.get(block.last.offset, ()):
                got = _classify_guard(
                    cfg, cond_nid, guarded_sources, dominating_writes,
                    read_by_site,
                )
                if got:
                    kinds |= got
    return kinds


def _events_by_region(cfg: ControlFlowGraph, regions):
    storage: dict[int, list] = {}
    calls: dict[int, list] = {}
    for ev in cfg.storage_events:
        rid = innermost_region(regions, ev.site)
        if rid is not None:
            storage.setdefault(rid, []).append(ev)
    for ev in cfg.call_events:
        rid = innermost_region(regions, ev.site)
        if rid is not None:
            calls.setdefault(rid, []).append(ev)
    return storage, calls


def detect(
    cfg: ControlFlowGraph,
    regions,
    signatures,
    matches: list[Match],
    db: SubcontractDb,
    kb: KnowledgeBase,
    theta1: float,
    theta2: float,
) -> Detection:
    by_id = {r.id: r for r in regions}
    edges = region_call_edges(cfg, regions)
    reach = entry_reach(regions, edges)
    best = {rid: m for rid, m in best_matches(matches).items() if rid in reach}

    # regions called straight from a dispatch stub are public method bodies,
    # not shared internal routines
    stub_callees = set()
    for site, (callee, _ret) in cfg.internal_calls.items():
        rid = innermost_region(regions, site)
        if rid is not None and by_id[rid].selector is not None:
            stub_callees.add(callee)

    spans = [(by_id[rid].start, by_id[rid].end) for rid in reach]
    sources = source_nodes(cfg.graph, spans)
    tainted = propagate(cfg.graph, sources)
    storage_by_region, calls_by_region = _events_by_region(cfg, regions)

    def write_events(closure):
        for rid in closure:
            if rid in reach:
                yield from storage_by_region.get(rid, ())

    def call_events(closure):
        for rid in closure:
            if rid in reach:
                yield from calls_by_region.get(rid, ())

    def is_tainted_write(ev):
        if ev.kind != "write":
            return False
        if ev.stored is not None and ev.stored.nid in tainted:
            return True
        return ev.slot_value.nid in tainted

    any_taint = any(
        is_tainted_write(ev) for evs in storage_by_region.values() for ev in evs
    ) or any(
        (ev.value is not None and ev.value.nid in tainted)
        or ev.target.nid in tainted
        for evs in calls_by_region.values()
        for ev in evs
    )

    traces: list[Trace] = []
    warnings: list[str] = []

    # --- conflicts -------------------------------------------------------
    entry_ids = {r.selector: r.id for r in regions if r.selector is not None}
    closures = {sel: region_closure(edges, eid) for sel, eid in entry_ids.items()}
    entry_writes: dict[int, dict[tuple, list]] = {}
    for sel, clo in closures.items():
        per: dict[tuple, list] = {}
        for ev in write_events(clo):
            if ev.kind == "write" and ev.slot.kind != "opaque":
                per.setdefault((ev.slot.kind, ev.slot.base), []).append(ev)
        entry_writes[sel] = per
    kb_pairs = kb.conflict_pairs()
    conflict_sources = {
        frozenset(c.methods()): c.source for c in kb.conflicts
    }

    conflict_cands: list[tuple] = []
    items = sorted(best.items())
    for i, (r1, m1) in enumerate(items):
        for r2, m2 in items[i + 1:]:
            if m1.record.key == m2.record.key:
                continue
            quals = frozenset({m1.record.qualname, m2.record.qualname})
            source = ""
            if quals in kb_pairs:
                source = conflict_sources.get(quals, "")
            elif m1.record.method == m2.record.method:
                s1, s2 = signatures[r1], signatures[r2]
                if not (
                    opcode_type_similarity(s1.chain, s2.chain) >= theta1
                    and opcode_length_similarity(s1.chain, s2.chain) >= theta2
                    and s1.intra
                    and s2.intra
                    and opcode_type_similarity(s1.intra, s2.intra) >= theta1
                    and opcode_length_similarity(s1.intra, s2.intra) >= theta2
                ):
                    continue
            else:
                continue

            # both variants must feed a common storage slot from public entry
            # points, and some write to it must carry message input
            found = None
            saw_common = None
            for sa in sorted(s for s, clo in closures.items() if r1 in clo):
                for sb in sorted(s for s, clo in closures.items() if r2 in clo):
                    common = set(entry_writes[sa]) & set(entry_writes[sb])
                    if not common:
                        continue
                    desc = sorted(common)[0]
                    if saw_common is None:
                        saw_common = desc
                    hot = any(
                        is_tainted_write(ev)
                        for s in (sa, sb)
                        for d in common
                        for ev in entry_writes[s][d]
                    )
                    if not hot:
                        continue
                    cand = (min(sa, sb), max(sa, sb), desc)
                    if found is None or cand < found:
                        found = cand
            label = " vs ".join(
                sorted((_record_label(m1.record), _record_label(m2.record)))
            )
            if found is None:
                if saw_common is not None and not any_taint:
                    warnings.append(
                        f"conflict between {label} writes "
                        f"{_render_desc(saw_common)} but no message-input "
                        "taint was recovered; reported without taint "
                        "confirmation"
                    )
                continue
            primary, other, desc = found
            pair_key = frozenset({m1.record.key, m2.record.key})
            first, second = sorted((r1, r2), key=lambda rid: by_id[rid].start)
            path_target = r1 if r1 in closures[primary] else r2
            path = _path_to(regions, edges, entry_ids[primary], path_target)
            conflict_cands.append(
                (
                    pair_key,
                    Trace(
                        smv_type=VARIABLE_CONFLICT,
                        entry_selector=primary,
                        site=by_id[first].start,
                        chain=path,
                        regions=(first, second),
                        records=tuple(
                            sorted(
                                (_record_label(m1.record), _record_label(m2.record))
                            )
                        ),
                        affected=(_render_desc(desc),),
                        source=source,
                        counterpart_selector=other if other != primary else None,
                    ),
                )
            )

    conflict_cands.sort(key=lambda c: (c[1].entry_selector, c[1].site))
    emitted: set[frozenset] = set()
    for pair_key, trace in conflict_cands:
        if pair_key in emitted:
            continue
        emitted.add(pair_key)
        traces.append(trace)

    # --- lack of check ---------------------------------------------------
    read_by_site: dict[int, set[tuple]] = {}
    writes_by_block: dict[int, set[tuple]] = {}
    for ev in cfg.storage_events:
        key = (ev.slot.kind, ev.slot.base)
        if ev.kind == "read":
            read_by_site.setdefault(ev.site, set()).add(key)
        else:
            b = cfg.block_of(ev.site)
            if b is not None:
                writes_by_block.setdefault(b, set()).add(key)
    rg_cache: dict = {}
    for rid, m in items:
        rec = m.record
        if rec.visibility != "internal":
            continue
        rules = [a for a in kb.access if a.method == rec.qualname]
        if not rules:
            continue
        region = by_id[rid]
        if region.start in stub_callees:
            continue
        closure = region_closure(edges, rid)
        sites = sorted(
            s for s, (callee, _r) in cfg.internal_calls.items()
            if callee == region.start
        )
        for rule in rules:
            affected = _sensitive_evidence(
                rule.sensitive, write_events(closure), call_events(closure),
                tainted, is_tainted_write,
            )
            for site in sites:
                caller_rid = innermost_region(regions, site)
                if caller_rid is None or caller_rid not in reach:
                    continue
                guarded = _guarded_arg_sources(cfg, site, rule.params)
                kinds = guard_kinds_on_path(
                    cfg, regions, by_id, reach[caller_rid][1], site,
                    guarded, read_by_site, writes_by_block, rg_cache,
                )
                if rule.guard in kinds:
                    continue
                if not affected:
                    if not any_taint:
                        warnings.append(
                            f"call at {site} reaches {rec.qualname} without a "
                            f"{rule.guard} guard, but no message-input taint "
                            "was recovered; reported without taint confirmation"
                        )
                    continue
                sel, path = reach[caller_rid]
                traces.append(
                    Trace(
                        smv_type=LACK_OF_CHECK,
                        entry_selector=sel,
                        site=site,
                        chain=path + (rid,),
                        regions=(caller_rid, rid),
                        records=(_record_label(rec),),
                        affected=affected,
                        source=rule.source,
                        sensitive=rule.sensitive,
                        guard=rule.guard,
                    )
                )

    traces.sort(key=lambda t: (t.entry_selector, t.site, t.smv_type))
    return Detection(traces=traces, warnings=warnings, matched=best, reachable=reach)


def _render_desc(desc: tuple) -> str:
    kind, base = desc
    if kind == "const":
        return f"{base:#x}"
    if kind == "hash":
        return f"hash({base:#x})"
    if kind == "eth":
        return "eth-balance"
    return "opaque"


def _path_to(regions, edges, start: int, goal: int) -> tuple[int, ...]:
    q = deque([(start, (start,))])
    seen = {start}
    while q:
        rid, path = q.popleft()
        if rid == goal:
            return path
        for nxt in sorted(edges.get(rid, ())):
            if nxt not in seen:
                seen.add(nxt)
                q.append((nxt, path + (nxt,)))
    return (start, goal)


def _guarded_arg_sources(cfg: ControlFlowGraph, site: int, params) -> set[int]:
    """Message-input source nodes feeding the listed call arguments."""
    graph = cfg.graph
    args = cfg.call_args.get(site, ())
    out: set[int] = set()
    for k in params:
        if 1 <= k <= len(args):
            node = graph.values[args[k - 1]]
            for leaf in graph.leaves(node):
                if leaf.op in C1_SOURCE_OPS:
                    out.add(leaf.nid)
    return out


def _sensitive_evidence(
    sensitive, writes, calls, tainted, is_tainted_write
) -> tuple[str, ...]:
    """Descriptors of state the unguarded call can move, empty if none."""
    out: set[str] = set()
    if sensitive == "ETH-balance":
        for ev in calls:
            if ev.value is not None and ev.value.nid in tainted:
                out.add("eth-balance")
            elif ev.target.nid in tainted:
                out.add("eth-balance")
    else:
        for ev in writes:
            if is_tainted_write(ev):
                out.add(ev.slot.render())
    return tuple(sorted(out))
