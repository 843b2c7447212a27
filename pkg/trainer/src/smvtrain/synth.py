"""Seeded synthetic contracts in the compiler's emission idiom.

The fixture corpus is small, so the fine-tune stage also sees generated
contracts that follow the same layout the compiler produces: value
prologue, selector dispatcher, wrapper blocks with return landings,
function bodies, then shared utility routines (abi plumbing, checked
arithmetic, panics) at the back of the file.  Jump targets are real
offsets, so the pushed-address patterns the boundary head relies on
stay consistent.  Labels are derived from per-function byte runs the
same way as for compiled artifacts; utility routines and auto-getter
pairs carry no labels and act as hard negatives.

Nothing here ever executes; the code only has to disassemble cleanly
and exhibit the statistical shape of real runtime sections.
"""

from __future__ import annotations

import numpy as np

from .corpus import CorpusEntry, labels_from_functions

JUMPDEST = 0x5B
PUSH0 = 0x5F
PUSH1 = 0x60
PUSH2 = 0x61
PUSH4 = 0x63
PUSH32 = 0x7F
JUMP = 0x56
JUMPI = 0x57

# straight-line filler for function bodies: env reads, stack shuffles,
# small arithmetic; nothing that implies control flow
BODY_OPS = (
    0x01, 0x02, 0x03, 0x04, 0x0A, 0x10, 0x11, 0x14, 0x15, 0x16, 0x17,
    0x33, 0x34, 0x3A, 0x42, 0x43, 0x46,
    0x50, 0x51, 0x52, 0x54, 0x55,
    0x80, 0x81, 0x82, 0x90, 0x91, 0x92,
)


class _Asm:
    """Tiny assembler: append bytes, name offsets, backpatch PUSH2 refs."""

    def __init__(self) -> None:
        self.buf = bytearray()
        self.marks: dict[str, int] = {}
        self.holes: list[tuple[int, str]] = []

    def here(self) -> int:
        return len(self.buf)

    def raw(self, *data: int) -> None:
        self.buf.extend(data)

    def mark(self, name: str) -> int:
        self.marks[name] = self.here()
        return self.here()

    def push2(self, name: str) -> None:
        self.buf.append(PUSH2)
        self.holes.append((self.here(), name))
        self.buf.extend((0, 0))

    def finish(self) -> bytes:
        for at, name in self.holes:
            self.buf[at : at + 2] = self.marks[name].to_bytes(2, "big")
        return bytes(self.buf)


def _filler(a: _Asm, rng: np.random.Generator, count: int) -> None:
    for _ in range(count):
        roll = rng.random()
        if roll < 0.62:
            a.raw(int(rng.choice(BODY_OPS)))
        elif roll < 0.82:
            a.raw(PUSH1, int(rng.integers(0, 256)))
        elif roll < 0.90:
            a.raw(PUSH0)
        elif roll < 0.96:
            a.raw(PUSH2 + 1, *rng.integers(0, 256, size=3).tolist())
        else:
            a.raw(0x73, *([0xFF] * 20), 0x16)  # address mask


def _body_block(
    a: _Asm,
    rng: np.random.Generator,
    tag: str,
    helpers: list[str],
    internals: list[str],
    must_call: list[str] = (),
) -> None:
    """One declared-function body: JUMPDEST ... JUMP back to the caller.

    must_call targets are always invoked so no generated function ends
    up unreferenced; the compiler never emits dead routines either.
    """
    a.mark(tag)
    a.raw(JUMPDEST)
    serial = 0

    def call(target: str) -> None:
        ret = f"{tag}.r{serial}"
        a.push2(ret)
        if rng.random() < 0.5:
            a.raw(0x91, 0x90)
        a.push2(target)
        a.raw(JUMP)
        a.mark(ret)
        a.raw(JUMPDEST)
        a.raw(0x92, 0x50, 0x50)

    for _ in range(int(rng.integers(3, 8))):
        roll = rng.random()
        serial += 1
        if roll < 0.30:
            _filler(a, rng, int(rng.integers(2, 8)))
        elif roll < 0.45:  # storage write
            a.raw(0x80 if rng.random() < 0.5 else PUSH0, 0x90, 0x55)
        elif roll < 0.60 and helpers:  # utility call with return landing
            call(str(rng.choice(helpers)))
        elif roll < 0.72 and internals:  # internal function call
            call(str(rng.choice(internals)))
        elif roll < 0.86:  # forward branch
            join = f"{tag}.j{serial}"
            a.raw(0x80, 0x15)
            a.push2(join)
            a.raw(JUMPI)
            _filler(a, rng, int(rng.integers(2, 6)))
            a.mark(join)
            a.raw(JUMPDEST)
        else:  # loop: head is a pushed jumpdest that is not a boundary
            head = f"{tag}.h{serial}"
            exit_ = f"{tag}.x{serial}"
            a.mark(head)
            a.raw(JUMPDEST)
            _filler(a, rng, int(rng.integers(2, 5)))
            a.raw(0x80, 0x15)
            a.push2(exit_)
            a.raw(JUMPI)
            a.push2(head)
            a.raw(JUMP)
            a.mark(exit_)
            a.raw(JUMPDEST)
    for target in must_call:
        serial += 1
        call(target)
    a.raw(0x90 if rng.random() < 0.7 else 0x50, JUMP)


def _helper_block(a: _Asm, rng: np.random.Generator, tag: str, family: str, panic_tag: str | None) -> None:
    """One shared utility routine; never labeled."""
    a.mark(tag)
    a.raw(JUMPDEST)
    if family == "cleanup":
        a.raw(PUSH0, 0x82, 0x82, 0x90, 0x50, 0x92, 0x91, 0x50, 0x50, JUMP)
    elif family == "encode":
        ret = f"{tag}.r"
        a.push2(ret)
        a.raw(0x81)
        a.push2(f"{tag}.clean")
        a.raw(JUMP)
        a.mark(f"{tag}.clean")
        a.raw(JUMPDEST, 0x82, 0x52, 0x50, 0x50, JUMP)
        a.mark(ret)
        a.raw(JUMPDEST, 0x92, 0x91, 0x50, 0x50, JUMP)
    elif family == "decode":
        ok = f"{tag}.ok"
        a.raw(PUSH0, 0x81, 0x35, 0x90, 0x50, 0x81, 0x14)
        a.push2(ok)
        a.raw(JUMPI, PUSH0, PUSH0, 0xFD)
        a.mark(ok)
        a.raw(JUMPDEST, 0x50, 0x92, 0x91, 0x50, 0x50, JUMP)
    elif family == "decode_tuple":
        good = f"{tag}.g"
        a.raw(PUSH0, PUSH1, 0x20, 0x82, 0x84, 0x03, 0x12, 0x15)
        a.push2(good)
        a.raw(JUMPI, PUSH0, PUSH0, 0xFD)
        a.mark(good)
        a.raw(JUMPDEST, JUMPDEST, 0x84, 0x82, 0x85, 0x01, 0x91, 0x50, 0x50, 0x92, 0x91, 0x50, 0x50, JUMP)
    elif family == "panic":
        a.raw(PUSH32, 0x4E, 0x48, 0x7B, 0x71, *([0] * 28))
        a.raw(PUSH0, 0x52, PUSH1, 0x11, PUSH1, 0x04, 0x52, PUSH1, 0x24, PUSH0, 0xFD)
    elif family == "checked":
        ok = f"{tag}.ok"
        a.raw(PUSH0, 0x82, 0x82, int(rng.choice((0x01, 0x02, 0x03))), 0x90, 0x50, 0x83, 0x81, 0x10, 0x15)
        a.push2(ok)
        a.raw(JUMPI)
        if panic_tag is not None:
            a.push2(panic_tag)
            a.raw(JUMP)
        else:
            a.raw(PUSH0, PUSH0, 0xFD)
        a.mark(ok)
        a.raw(JUMPDEST, 0x92, 0x91, 0x50, 0x50, JUMP)
    else:
        raise ValueError(f"unknown helper family {family}")


def generate_contract(name: str, rng: np.random.Generator) -> CorpusEntry:
    """One synthetic runtime section with source-map-style labels."""
    n_funcs = int(rng.integers(2, 5))
    n_getters = int(rng.integers(0, 3))
    n_internal = int(rng.integers(0, 3))
    kinds = ["fn"] * n_funcs + ["getter"] * n_getters
    rng.shuffle(kinds)

    helper_menu = ["cleanup", "encode", "decode", "decode_tuple", "panic"]
    helper_menu += ["checked"] * int(rng.integers(1, 4))
    helpers = [f"help{i}" for i in range(len(helper_menu))]
    internals = [f"ifn{i}" for i in range(n_internal)]
    callable_helpers = [h for h, fam in zip(helpers, helper_menu) if fam in ("cleanup", "checked", "encode")]
    panic_tag = helpers[helper_menu.index("panic")]

    a = _Asm()
    # value prologue with optional callvalue guard
    a.raw(PUSH1, 0x80, PUSH1, 0x40, 0x52)
    if rng.random() < 0.8:
        a.raw(0x34, 0x80, 0x15)
        a.push2("nv")
        a.raw(JUMPI, PUSH0, PUSH0, 0xFD)
        a.mark("nv")
        a.raw(JUMPDEST, 0x50)
    # dispatcher
    a.raw(PUSH1, 0x04, 0x36, 0x10)
    a.push2("fb")
    a.raw(JUMPI, PUSH0, 0x35, PUSH1, 0xE0, 0x1C)
    for i, _ in enumerate(kinds):
        a.raw(0x80, PUSH4, *rng.integers(0, 256, size=4).tolist(), 0x14)
        a.push2(f"wrap{i}")
        a.raw(JUMPI)
    a.mark("fb")
    a.raw(JUMPDEST, PUSH0, PUSH0, 0xFD)

    spans: dict[str, list[tuple[int, int]]] = {}
    # wrapper blocks, each contiguous with its return landings
    for i, kind in enumerate(kinds):
        start = a.mark(f"wrap{i}")
        a.raw(JUMPDEST)
        returns = kind == "getter" or rng.random() < 0.5
        takes_arg = kind == "fn" and rng.random() < 0.4
        a.push2(f"wret{i}")
        if takes_arg:
            a.raw(PUSH1, 0x04, 0x80, 0x36, 0x03, 0x81, 0x01, 0x90)
            a.push2(f"wdec{i}")
            a.raw(0x91, 0x90)
            a.push2(str(rng.choice(helpers[2:4])))  # a decode family helper
            a.raw(JUMP)
            a.mark(f"wdec{i}")
            a.raw(JUMPDEST)
        a.push2(f"body{i}")
        a.raw(JUMP)
        a.mark(f"wret{i}")
        a.raw(JUMPDEST)
        if returns:
            a.raw(PUSH1, 0x40, 0x51)
            a.push2(f"wenc{i}")
            a.raw(0x91, 0x90)
            a.push2(helpers[1])
            a.raw(JUMP)
            a.mark(f"wenc{i}")
            a.raw(JUMPDEST, PUSH1, 0x40, 0x51, 0x80, 0x91, 0x03, 0x90, 0xF3)
        else:
            a.raw(0x00)
        if kind == "fn":
            spans.setdefault(f"f{i}", []).append((start, a.here()))

    # bodies in wrapper order, then internal functions
    fn_indices = [i for i, kind in enumerate(kinds) if kind == "fn"]
    assigned: dict[int, list[str]] = {i: [] for i in fn_indices}
    for tag in internals:
        assigned[int(rng.choice(fn_indices))].append(tag)
    for i, kind in enumerate(kinds):
        if kind == "getter":
            a.mark(f"body{i}")
            a.raw(JUMPDEST, PUSH0, 0x54, 0x81, JUMP)
        else:
            start = a.here()
            _body_block(a, rng, f"body{i}", callable_helpers, internals, assigned[i])
            spans[f"f{i}"].append((start, a.here()))
    for j, tag in enumerate(internals):
        start = a.here()
        _body_block(a, rng, tag, callable_helpers, [])
        spans.setdefault(f"i{j}", []).append((start, a.here()))

    # shared utility routines last, mirroring compiler layout
    order = rng.permutation(len(helpers))
    fixed = [k for k in order if helper_menu[k] == "panic"] + [k for k in order if helper_menu[k] != "panic"]
    for k in fixed:
        _helper_block(a, rng, helpers[k], helper_menu[k], panic_tag)

    code = a.finish()
    functions = [{"name": fn, "runs": [list(r) for r in runs]} for fn, runs in spans.items()]
    table, starts = labels_from_functions(code, functions)
    return CorpusEntry(name=name, bytecode=code, label_table=table, starts=starts)


def generate_corpus(rng: np.random.Generator, count: int, prefix: str = "synth") -> list[CorpusEntry]:
    """Deterministic batch of synthetic contracts."""
    return [generate_contract(f"{prefix}{i}", rng) for i in range(count)]
