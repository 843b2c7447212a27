"""Abstract interpretation of EVM stack code.

Values form a constant-or-unknown lattice.  Every computed value is a node
in a def-use graph; operand edges drive taint propagation later.  Two
deliberate taint barriers: SLOAD results carry no operand edge (the loaded
word does not depend on who computed the key) and call results likewise.
The slot operand of every storage access is kept on the access event
instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import opcodes as op


@dataclass(frozen=True)
class Value:
    """One node in the def-use graph."""

    nid: int
    op: str
    site: int
    const: int | None = None
    param: int | None = None  # calldata word index for CALLDATALOAD

    def __repr__(self):
        c = f"={self.const:#x}" if self.const is not None else ""
        return f"<{self.op}@{self.site}{c}>"


@dataclass(frozen=True)
class SlotDesc:
    """Storage-slot descriptor: const slot, hash(base), or opaque."""

    kind: str  # "const" | "hash" | "opaque" | "eth"
    base: int | None = None

    def render(self) -> str:
        if self.kind == "const":
            return f"{self.base:#x}"
        if self.kind == "hash":
            return f"hash({self.base:#x})"
        if self.kind == "eth":
            return "eth-balance"
        return "opaque"


ETH_BALANCE = SlotDesc("eth")
OPAQUE = SlotDesc("opaque")


@dataclass(frozen=True)
class StorageEvent:
    site: int
    kind: str  # "read" | "write"
    slot: SlotDesc
    slot_value: Value
    stored: Value | None = None


@dataclass(frozen=True)
class CallEvent:
    site: int
    op: str
    target_const: int | None
    target: Value
    value: Value | None  # wei transferred, CALL/CALLCODE only
    result: Value


class DefUseGraph:
    """Hash-consed value nodes with operand edges."""

    def __init__(self):
        self.values: list[Value] = []
        self.operands: dict[int, tuple[int, ...]] = {}
        self.keccak_base: dict[int, SlotDesc] = {}
        self.selector_nodes: set[int] = set()
        self.selcheck: dict[int, int] = {}  # EQ node id -> selector constant
        self._memo: dict[tuple, int] = {}

    def mk(self, opname: str, site: int, const: int | None = None,
           operands: tuple[Value, ...] = (), param: int | None = None) -> Value:
        key = (opname, site, const, tuple(v.nid for v in operands), param)
        nid = self._memo.get(key)
        if nid is not None:
            return self.values[nid]
        nid = len(self.values)
        v = Value(nid, opname, site, const, param)
        self.values.append(v)
        self.operands[nid] = tuple(x.nid for x in operands)
        self._memo[key] = nid
        return v

    def const(self, value: int, site: int = -1) -> Value:
        return self.mk("const", site, const=value)

    def inputs(self, nid: int) -> tuple[int, ...]:
        return self.operands.get(nid, ())

    def edges(self):
        for dst, srcs in self.operands.items():
            for src in srcs:
                yield (src, dst)

    def slot_descriptor(self, v: Value) -> SlotDesc:
        if v.const is not None:
            return SlotDesc("const", v.const)
        if v.nid in self.keccak_base:
            return self.keccak_base[v.nid]
        if v.op == "ADD":
            ins = [self.values[i] for i in self.inputs(v.nid)]
            if len(ins) == 2:
                a, b = ins
                if b.const is not None and a.const is None:
                    inner = self.slot_descriptor(a)
                    if inner.kind == "hash":
                        return inner
                if a.const is not None and b.const is None:
                    inner = self.slot_descriptor(b)
                    if inner.kind == "hash":
                        return inner
        return OPAQUE

    def leaves(self, v: Value, stop_ops=("SLOAD",)) -> set[Value]:
        """Transitive operand closure of v, including v itself."""
        seen: set[int] = set()
        work = [v.nid]
        while work:
            nid = work.pop()
            if nid in seen:
                continue
            seen.add(nid)
            node = self.values[nid]
            if node.op in stop_ops:
                continue
            work.extend(self.inputs(nid))
        return {self.values[n] for n in seen}


@dataclass(frozen=True)
class Frame:
    callee: int
    ret: int


MASK_U256 = (1 << 256) - 1

# folded when all operands are constant
_FOLD = {
    "ADD": lambda a, b: (a + b) & MASK_U256,
    "SUB": lambda a, b: (a - b) & MASK_U256,
    "MUL": lambda a, b: (a * b) & MASK_U256,
    "DIV": lambda a, b: a // b if b else 0,
    "AND": lambda a, b: a & b,
    "OR": lambda a, b: a | b,
    "XOR": lambda a, b: a ^ b,
    "SHL": lambda a, b: (b << a) & MASK_U256 if a < 256 else 0,
    "SHR": lambda a, b: b >> a if a < 256 else 0,
    "EXP": lambda a, b: pow(a, b, 1 << 256),
    "NOT": lambda a: a ^ MASK_U256,
    "ISZERO": lambda a: int(a == 0),
    "EQ": lambda a, b: int(a == b),
    "LT": lambda a, b: int(a < b),
    "GT": lambda a, b: int(a > b),
}


class MachineState:
    """Stack, constant-addressed memory cells, and the internal call stack."""

    __slots__ = ("stack", "memory", "mem_unknown", "unknown_stores", "frames")

    def __init__(self):
        self.stack: list[Value] = []
        self.memory: dict[int, Value] = {}
        self.mem_unknown = False
        self.unknown_stores: tuple[int, ...] = ()
        self.frames: tuple[Frame, ...] = ()

    def fork(self) -> "MachineState":
        st = MachineState.__new__(MachineState)
        st.stack = self.stack[:]
        st.memory = dict(self.memory)
        st.mem_unknown = self.mem_unknown
        st.unknown_stores = self.unknown_stores
        st.frames = self.frames
        return st

    def digest(self) -> tuple:
        consts = tuple(v.const for v in self.stack[-32:])
        return (len(self.stack), consts, self.frames, self.mem_unknown)


@dataclass
class StepResult:
    """Control effect of one instruction."""

    kind: str  # "next" | "jump" | "branch" | "halt"
    target: Value | None = None
    cond: Value | None = None


class Interpreter:
    """Transfer function shared by the CFG builder."""

    def __init__(self, stream, graph: DefUseGraph):
        self.stream = stream
        self.graph = graph
        self.storage_events: dict[tuple, StorageEvent] = {}
        self.call_events: dict[tuple, CallEvent] = {}

    def _pop(self, st: MachineState, n: int) -> list[Value]:
        out = []
        for _ in range(n):
            if st.stack:
                out.append(st.stack.pop())
            else:
                out.append(self.graph.mk("underflow", -1))
        return out

    def step(self, st: MachineState, ins) -> StepResult:
        g = self.graph
        code = ins.opcode
        name = ins.mnemonic

        if op.is_push(code):
            st.stack.append(g.const(ins.operand, ins.offset))
            return StepResult("next")
        if 0x80 <= code <= 0x8F:  # DUPn
            n = code - 0x7F
            if len(st.stack) >= n:
                st.stack.append(st.stack[-n])
            else:
                st.stack.append(g.mk("underflow", ins.offset))
            return StepResult("next")
        if 0x90 <= code <= 0x9F:  # SWAPn
            n = code - 0x8F
            if len(st.stack) > n:
                st.stack[-1], st.stack[-n - 1] = st.stack[-n - 1], st.stack[-1]
            return StepResult("next")
        if code == op.POP:
            self._pop(st, 1)
            return StepResult("next")

        if code == op.JUMP:
            (target,) = self._pop(st, 1)
            return StepResult("jump", target=target)
        if code == op.JUMPI:
            target, cond = self._pop(st, 2)
            return StepResult("branch", target=target, cond=cond)
        if code == op.JUMPDEST:
            return StepResult("next")
        if code in op.HALTS or code not in op.TABLE:
            return StepResult("halt")

        if code == op.MSTORE:
            addr, val = self._pop(st, 2)
            if addr.const is not None:
                st.memory[addr.const] = val
            else:
                st.mem_unknown = True
                st.unknown_stores = (st.unknown_stores + (val.nid,))[-8:]
            return StepResult("next")
        if code == op.MSTORE8:
            addr, val = self._pop(st, 2)
            st.mem_unknown = True
            st.unknown_stores = (st.unknown_stores + (val.nid,))[-8:]
            return StepResult("next")
        if code == op.MLOAD:
            (addr,) = self._pop(st, 1)
            if addr.const is not None and addr.const in st.memory:
                st.stack.append(st.memory[addr.const])
            else:
                deps = tuple(self.graph.values[n] for n in st.unknown_stores) if st.mem_unknown else ()
                st.stack.append(g.mk("MLOAD", ins.offset, operands=(addr,) + deps))
            return StepResult("next")

        if code == op.SLOAD:
            (slot,) = self._pop(st, 1)
            desc = g.slot_descriptor(slot)
            ev = StorageEvent(ins.offset, "read", desc, slot)
            self.storage_events[(ins.offset, "read", desc)] = ev
            st.stack.append(g.mk("SLOAD", ins.offset))
            return StepResult("next")
        if code == op.SSTORE:
            slot, val = self._pop(st, 2)
            desc = g.slot_descriptor(slot)
            ev = StorageEvent(ins.offset, "write", desc, slot, val)
            self.storage_events[(ins.offset, "write", desc, val.nid)] = ev
            return StepResult("next")

        if code == op.KECCAK256:
            off, length = self._pop(st, 2)
            operands = [off, length]
            desc = OPAQUE
            if off.const is not None and length.const is not None:
                if length.const == 0x40:
                    key = st.memory.get(off.const)
                    base = st.memory.get(off.const + 0x20)
                    if key is not None:
                        operands.append(key)
                    if base is not None:
                        operands.append(base)
                        if base.const is not None:
                            desc = SlotDesc("hash", base.const)
                elif length.const == 0x20:
                    cell = st.memory.get(off.const)
                    if cell is not None:
                        operands.append(cell)
                        if cell.const is not None:
                            desc = SlotDesc("hash", cell.const)
            node = g.mk("KECCAK256", ins.offset, operands=tuple(operands))
            if desc.kind == "hash":
                g.keccak_base[node.nid] = desc
            st.stack.append(node)
            return StepResult("next")

        if code == op.CALLDATALOAD:
            (offv,) = self._pop(st, 1)
            param = None
            if offv.const is not None:
                if offv.const == 0:
                    param = -1  # selector word
                elif offv.const >= 4 and (offv.const - 4) % 32 == 0:
                    param = (offv.const - 4) // 32
            node = g.mk("CALLDATALOAD", ins.offset, operands=(offv,), param=param)
            st.stack.append(node)
            return StepResult("next")
        if code == op.CALLDATACOPY:
            dest, src, length = self._pop(st, 3)
            node = g.mk("CALLDATACOPY", ins.offset, operands=(src, length))
            if dest.const is not None and length.const is not None and length.const <= 0x200:
                for word in range(0, length.const, 32):
                    st.memory[dest.const + word] = node
            else:
                st.mem_unknown = True
                st.unknown_stores = (st.unknown_stores + (node.nid,))[-8:]
            return StepResult("next")

        if code in op.CALL_FAMILY:
            pops, _ = op.stack_effect(code)
            args = self._pop(st, pops)
            target = args[1]
            value = args[2] if code in (op.CALL, op.CALLCODE) else None
            result = g.mk(name, ins.offset)
            ev = CallEvent(ins.offset, name, target.const, target, value, result)
            vkey = value.nid if value is not None else -1
            self.call_events[(ins.offset, target.nid, vkey)] = ev
            st.stack.append(result)
            return StepResult("next")

        pops, pushes = op.stack_effect(code)
        args = self._pop(st, pops)
        if pushes == 0:
            return StepResult("next")

        const = None
        fold = _FOLD.get(name)
        if fold is not None and all(a.const is not None for a in args):
            const = fold(*[a.const for a in args])
        node = g.mk(name, ins.offset, const=const, operands=tuple(args))

        # selector extraction patterns: SHR(0xe0, calldata[0]) or DIV by 2^224
        if name == "SHR" and args[0].const == 0xE0 and _is_calldata0(args[1]):
            g.selector_nodes.add(node.nid)
        if name == "DIV" and args[1].const == (1 << 224) and _is_calldata0(args[0]):
            g.selector_nodes.add(node.nid)
        if name == "AND" and any(a.nid in g.selector_nodes for a in args):
            g.selector_nodes.add(node.nid)
        if name == "EQ":
            for a, b in ((args[0], args[1]), (args[1], args[0])):
                if a.const is not None and a.const <= 0xFFFFFFFF and b.nid in g.selector_nodes:
                    g.selcheck[node.nid] = a.const
        if name == "ISZERO" and args[0].nid in g.selcheck:
            # inverted selector check: fall-through edge is the match
            g.selcheck[node.nid] = -g.selcheck[args[0].nid] - 1

        st.stack.append(node)
        return StepResult("next")


def _is_calldata0(v: Value) -> bool:
    return v.op == "CALLDATALOAD" and v.param == -1
