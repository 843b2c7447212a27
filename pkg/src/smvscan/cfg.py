"""Control-flow graph construction by bounded abstract emulation.

Blocks are lexed statically (JUMPDEST starts a block, terminators end one),
then a worklist walk from offset 0 resolves jump targets, classifies
internal calls and returns, and parses the selector dispatcher.  States are
joined per (block, call stack, stack depth): slots that disagree widen to a
PHI node carrying both operands, so constants converge and taint survives
the merge.  Loops with unresolved trip counts terminate because each
lineage re-runs at most _JOIN_RUNS times; their exit branch is explored on
the first iteration since the condition is unknown.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import opcodes as op
from .absint import DefUseGraph, Frame, Interpreter, MachineState, SlotDesc
from .bytecode import InstructionStream

UNKNOWN_BLOCK = -1
_JOIN_RUNS = 10
_FRAME_CAP = 16
_RET_SCAN_DEPTH = 16
_STEP_BUDGET = 200_000


@dataclass(frozen=True)
class BasicBlock:
    id: int
    start: int
    end: int  # exclusive byte offset
    instructions: tuple

    @property
    def last(self):
        return self.instructions[-1]


@dataclass(frozen=True)
class StorageAccess:
    slot: SlotDesc
    kind: str  # "read" | "write"
    site: int


@dataclass
class ControlFlowGraph:
    stream: InstructionStream
    blocks: list[BasicBlock]
    edges: set[tuple[int, int, str]]  # (src block, dst block, kind)
    entry: int
    public_entries: dict[int, int]  # selector -> block id
    graph: DefUseGraph
    storage_events: list
    call_events: list
    internal_calls: dict[int, tuple[int, int]]  # jump site -> (callee, return offset)
    call_args: dict[int, tuple[int, ...]]  # jump site -> value node ids, arg 1 first
    branch_conds: dict[int, set[int]]  # JUMPI site -> condition node ids seen
    return_jumps: set[int]
    _by_start: dict[int, int] = field(default_factory=dict)
    _succ: dict[int, list[tuple[int, str]]] = field(default_factory=dict)
    _dominators: dict[int, int] | None = None

    def __post_init__(self):
        self._by_start = {b.start: b.id for b in self.blocks}
        self._succ = {}
        for src, dst, kind in sorted(self.edges):
            self._succ.setdefault(src, []).append((dst, kind))

    def block_at(self, offset: int) -> int | None:
        return self._by_start.get(offset)

    def block_of(self, offset: int) -> int | None:
        """Block whose byte range contains offset."""
        lo, hi = 0, len(self.blocks) - 1
        while lo <= hi:
            mid = (lo + hi) // 2
            b = self.blocks[mid]
            if offset < b.start:
                hi = mid - 1
            elif offset >= b.end:
                lo = mid + 1
            else:
                return b.id
        return None

    def successors(self, bid: int) -> list[tuple[int, str]]:
        return self._succ.get(bid, [])

    def reachable_blocks(self) -> set[int]:
        seen = {self.entry}
        work = [self.entry]
        while work:
            b = work.pop()
            for dst, _ in self.successors(b):
                if dst != UNKNOWN_BLOCK and dst not in seen:
                    seen.add(dst)
                    work.append(dst)
        return seen

    def dominator_masks(self) -> list[int]:
        """dom[b] as a bitmask over block ids, entry-rooted."""
        n = len(self.blocks)
        preds: list[list[int]] = [[] for _ in range(n)]
        for src, dst, _ in self.edges:
            if dst != UNKNOWN_BLOCK and src != UNKNOWN_BLOCK:
                preds[dst].append(src)
        full = (1 << n) - 1
        dom = [full] * n
        dom[self.entry] = 1 << self.entry
        changed = True
        while changed:
            changed = False
            for b in range(n):
                if b == self.entry:
                    continue
                m = full
                hit = False
                for p in preds[b]:
                    m &= dom[p]
                    hit = True
                if not hit:
                    m = 1 << b
                else:
                    m |= 1 << b
                if m != dom[b]:
                    dom[b] = m
                    changed = True
        return dom

    def dump_edges(self) -> list[str]:
        out = []
        for src, dst, kind in sorted(self.edges):
            d = "blockU" if dst == UNKNOWN_BLOCK else f"block{dst}"
            out.append(f"block{src} -> {d} {kind}")
        return out


def lex_blocks(stream: InstructionStream) -> list[BasicBlock]:
    starts = {0}
    for ins in stream.code:
        if ins.opcode == op.JUMPDEST:
            starts.add(ins.offset)
        elif ins.opcode in op.BLOCK_ENDS or ins.opcode not in op.TABLE:
            if ins.end < stream.code_len:
                starts.add(ins.end)
    ordered = sorted(starts)
    blocks = []
    for i, s in enumerate(ordered):
        e = ordered[i + 1] if i + 1 < len(ordered) else stream.code_len
        ins_slice = tuple(x for x in stream.code if s <= x.offset < e)
        if ins_slice:
            blocks.append(BasicBlock(len(blocks), s, e, ins_slice))
    return blocks


def _find_return_const(stack, after: int):
    """Index (from top) of a stack slot holding the const `after`."""
    for depth, v in enumerate(reversed(stack[-_RET_SCAN_DEPTH:])):
        if v.const == after:
            return depth
    return None


def _phi(graph: DefUseGraph, a, b, site: int):
    """Join two slot values; disagreement widens to a PHI over both."""
    if a.nid == b.nid:
        return a
    if a.const is not None and a.const == b.const:
        return a
    parts = {}
    for v in (a, b):
        if v.op == "PHI":
            for n in graph.inputs(v.nid):
                parts[n] = graph.values[n]
        else:
            parts[v.nid] = v
    ops = tuple(parts[k] for k in sorted(parts))
    if len(ops) == 1:
        return ops[0]
    return graph.mk("PHI", site, operands=ops)


def _join_states(graph: DefUseGraph, a: MachineState, b: MachineState, site: int):
    """Slot-wise join of two states with equal frames and stack depth."""
    changed = False
    st = MachineState.__new__(MachineState)
    st.frames = a.frames
    st.stack = []
    for va, vb in zip(a.stack, b.stack):
        v = _phi(graph, va, vb, site)
        changed |= v.nid != va.nid
        st.stack.append(v)
    mem = {}
    for k, va in a.memory.items():
        vb = b.memory.get(k)
        if vb is None:
            changed = True
            continue
        v = _phi(graph, va, vb, site)
        changed |= v.nid != va.nid
        mem[k] = v
    st.memory = mem
    st.mem_unknown = a.mem_unknown or b.mem_unknown
    changed |= st.mem_unknown != a.mem_unknown
    stores = tuple(sorted(set(a.unknown_stores) | set(b.unknown_stores))[:8])
    changed |= stores != a.unknown_stores
    st.unknown_stores = stores
    return st, changed


def build_cfg(stream: InstructionStream) -> ControlFlowGraph:
    blocks = lex_blocks(stream)
    by_start = {b.start: b.id for b in blocks}
    graph = DefUseGraph()
    interp = Interpreter(stream, graph)
    edges: set[tuple[int, int, str]] = set()
    public_entries: dict[int, int] = {}
    internal_calls: dict[int, tuple[int, int]] = {}
    call_args: dict[int, tuple[int, ...]] = {}
    branch_conds: dict[int, set[int]] = {}
    joined: dict[tuple, MachineState] = {}
    return_jumps: set[int] = set()
    runs: dict[tuple, int] = {}
    budget = _STEP_BUDGET

    def is_dest(offset) -> bool:
        ins = stream.at(offset)
        return ins is not None and ins.opcode == op.JUMPDEST

    def enqueue(work, bid: int, st: MachineState):
        work.append((bid, st))

    work: list[tuple[int, MachineState]] = [(by_start[0], MachineState())] if blocks else []
    while work and budget > 0:
        bid, arrived = work.pop()
        block = blocks[bid]
        key = (bid, arrived.frames, len(arrived.stack))
        prev = joined.get(key)
        if prev is None:
            joined[key] = arrived.fork()
            runs[key] = 1
            st = arrived
        else:
            merged, changed = _join_states(graph, prev, arrived, block.start)
            if not changed or runs[key] >= _JOIN_RUNS:
                continue
            joined[key] = merged
            runs[key] += 1
            st = merged.fork()
        budget -= 1

        res = None
        for ins in block.instructions:
            res = interp.step(st, ins)
            if res.kind != "next":
                break

        last = block.instructions[-1]
        if res is None or res.kind == "next":
            nxt = by_start.get(block.end)
            if nxt is not None:
                edges.add((bid, nxt, "fallthrough"))
                enqueue(work, nxt, st)
            continue
        if res.kind == "halt":
            continue

        if res.kind == "jump":
            t = res.target.const
            if st.frames and t is not None and t == st.frames[-1].ret:
                st.frames = st.frames[:-1]
                return_jumps.add(last.offset)
                tb = by_start.get(t)
                if tb is not None:
                    edges.add((bid, tb, "call-return"))
                    enqueue(work, tb, st)
                continue
            if t is None and st.frames:
                # return address travelled beyond const tracking; trust the frame
                ret = st.frames[-1].ret
                st.frames = st.frames[:-1]
                return_jumps.add(last.offset)
                tb = by_start.get(ret)
                if tb is not None:
                    edges.add((bid, tb, "call-return"))
                    enqueue(work, tb, st)
                continue
            if t is not None and is_dest(t):
                tb = by_start[t]
                ret_at = _find_return_const(st.stack, last.end)
                if ret_at is not None and is_dest(last.end):
                    if len(st.frames) < _FRAME_CAP:
                        st.frames = st.frames + (Frame(t, last.end),)
                    internal_calls[last.offset] = (t, last.end)
                    if ret_at > 0:
                        call_args.setdefault(
                            last.offset,
                            tuple(v.nid for v in st.stack[-ret_at:]),
                        )
                    else:
                        call_args.setdefault(last.offset, ())
                edges.add((bid, tb, "jump"))
                enqueue(work, tb, st)
            else:
                edges.add((bid, UNKNOWN_BLOCK, "jump"))
            continue

        # branch
        t = res.target.const
        sel = graph.selcheck.get(res.cond.nid)
        branch_conds.setdefault(last.offset, set()).add(res.cond.nid)
        fall = by_start.get(last.end)
        if t is not None and is_dest(t):
            tb = by_start[t]
            edges.add((bid, tb, "branch-taken"))
            if sel is not None and sel >= 0:
                public_entries.setdefault(sel, tb)
            enqueue(work, tb, st.fork())
        else:
            edges.add((bid, UNKNOWN_BLOCK, "branch-taken"))
        if fall is not None:
            edges.add((bid, fall, "fallthrough"))
            if sel is not None and sel < 0:
                public_entries.setdefault(-sel - 1, fall)
            enqueue(work, fall, st)

    return ControlFlowGraph(
        stream=stream,
        blocks=blocks,
        edges=edges,
        entry=by_start.get(0, 0),
        public_entries=public_entries,
        graph=graph,
        storage_events=list(interp.storage_events.values()),
        call_events=list(interp.call_events.values()),
        internal_calls=internal_calls,
        call_args=call_args,
        branch_conds=branch_conds,
        return_jumps=return_jumps,
    )


def storage_accesses(cfg: ControlFlowGraph) -> list[StorageAccess]:
    out = [StorageAccess(ev.slot, ev.kind, ev.site) for ev in cfg.storage_events]
    out.sort(key=lambda a: (a.site, a.kind, a.slot.render()))
    return out


def call_chains(cfg: ControlFlowGraph, regions, max_depth: int = 5) -> list[list[int]]:
    """All acyclic prefix chains of region calls, rooted at every region."""
    calls = region_call_edges(cfg, regions)
    chains: list[list[int]] = []
    for root in sorted(r.id for r in regions):
        stack = [[root]]
        while stack:
            chain = stack.pop()
            chains.append(chain)
            if len(chain) >= max_depth:
                continue
            for callee in sorted(calls.get(chain[-1], ()), reverse=True):
                if callee not in chain:
                    stack.append(chain + [callee])
    return chains


def region_call_edges(cfg: ControlFlowGraph, regions) -> dict[int, set[int]]:
    """Region-level call graph from the internal-call idiom sites."""
    by_entry = {r.start: r.id for r in regions}
    edges: dict[int, set[int]] = {}
    for site, (callee, _ret) in cfg.internal_calls.items():
        caller = innermost_region(regions, site)
        target = by_entry.get(callee)
        if caller is None or target is None or caller == target:
            continue
        edges.setdefault(caller, set()).add(target)
    return edges


def innermost_region(regions, offset: int):
    """Id of the smallest region containing offset, or None."""
    best = None
    best_span = None
    for r in regions:
        if r.start <= offset < r.end:
            span = r.end - r.start
            if best_span is None or span < best_span:
                best, best_span = r.id, span
    return best
