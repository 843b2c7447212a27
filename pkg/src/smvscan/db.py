"""Subcontract signature database and vulnerability knowledge base.

Both stores are tab-separated text with `#` comments.  Signature rows key
on (subcontract, version, method); knowledge rows are kind-first, either a
conflict pair of methods that must not share state or an access-control
rule naming the guard a caller of the method must provide.  Saving always
emits the canonical sorted form, so save(load(x)) is byte-stable.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .boundary import recover_heuristic
from .bytecode import decode, load_bytecode, strip_trailer
from .cfg import build_cfg, innermost_region
from .errors import DuplicateKey, ParseError, UnknownKind
from .signatures import parse_symbols, render_symbols, signatures_for

log = logging.getLogger(__name__)

GUARD_KINDS = ("value-bound", "caller-check", "reentrancy-guard")


@dataclass(frozen=True)
class SubcontractRecord:
    subcontract: str
    version: str
    method: str
    selector: int | None  # None for internal methods
    visibility: str
    intra: tuple[str, ...]
    chain: tuple[str, ...]

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.subcontract, self.version, self.method)

    @property
    def qualname(self) -> str:
        return f"{self.subcontract}.{self.method}"


@dataclass(frozen=True)
class ConflictEntry:
    a: str  # qualified method, Subcontract.method
    b: str
    source: str

    kind = "conflict"

    def methods(self) -> tuple[str, str]:
        return (self.a, self.b)


@dataclass(frozen=True)
class AccessControlEntry:
    method: str  # qualified method whose callers must guard
    params: tuple[int, ...]  # 1-based argument positions to be guarded
    guard: str  # one of GUARD_KINDS
    sensitive: str  # what an unguarded call exposes, e.g. ETH-balance
    source: str

    kind = "access-control"


class SubcontractDb:
    """Ordered signature records with qualified-name lookup."""

    def __init__(self, records=()):
        self.records: dict[tuple[str, str, str], SubcontractRecord] = {}
        for rec in records:
            self.add(rec)

    def add(self, rec: SubcontractRecord) -> None:
        if rec.key in self.records:
            raise DuplicateKey(f"duplicate record {rec.key}")
        self.records[rec.key] = rec

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records.values())

    def by_qualname(self, qual: str) -> list[SubcontractRecord]:
        return [r for r in self if r.qualname == qual]


class KnowledgeBase:
    def __init__(self, entries=()):
        self.conflicts: list[ConflictEntry] = []
        self.access: list[AccessControlEntry] = []
        for e in entries:
            self.add(e)

    def add(self, entry) -> None:
        if isinstance(entry, ConflictEntry):
            self.conflicts.append(entry)
        elif isinstance(entry, AccessControlEntry):
            self.access.append(entry)
        else:
            raise UnknownKind(f"unknown knowledge entry {entry!r}")

    def __len__(self):
        return len(self.conflicts) + len(self.access)

    def conflict_pairs(self) -> set[frozenset]:
        return {frozenset(c.methods()) for c in self.conflicts}


def _fields(line: str, n_min: int, where: str) -> list[str]:
    parts = line.rstrip("\n").split("\t")
    if len(parts) < n_min:
        raise ParseError(f"{where}: expected at least {n_min} fields, got {len(parts)}")
    return parts


def load_db(path) -> SubcontractDb:
    db = SubcontractDb()
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        sub, ver, meth, sel, vis, intra, chain = _fields(
            line, 7, f"{path}:{lineno}"
        )[:7]
        selector = None if sel == "-" else int(sel, 16)
        db.add(
            SubcontractRecord(
                subcontract=sub,
                version=ver,
                method=meth,
                selector=selector,
                visibility=vis,
                intra=parse_symbols(intra),
                chain=parse_symbols(chain),
            )
        )
    return db


def save_db(db: SubcontractDb, path) -> None:
    lines = ["# subcontract\tversion\tmethod\tselector\tvisibility\tintra\tchain"]
    for rec in sorted(db, key=lambda r: r.key):
        sel = "-" if rec.selector is None else f"{rec.selector:08x}"
        lines.append(
            "\t".join(
                (
                    rec.subcontract,
                    rec.version,
                    rec.method,
                    sel,
                    rec.visibility,
                    render_symbols(rec.intra),
                    render_symbols(rec.chain),
                )
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def _parse_kv(parts: list[str], where: str) -> dict[str, str]:
    out = {}
    for p in parts:
        if "=" not in p:
            raise ParseError(f"{where}: expected key=value, got {p!r}")
        k, v = p.split("=", 1)
        out[k] = v
    return out


def load_knowledge(path) -> KnowledgeBase:
    kb = KnowledgeBase()
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        where = f"{path}:{lineno}"
        parts = _fields(line, 2, where)
        kind = parts[0]
        if kind == "conflict":
            if len(parts) < 4:
                raise ParseError(f"{where}: conflict needs two methods and src=")
            kv = _parse_kv(parts[3:], where)
            kb.add(ConflictEntry(a=parts[1], b=parts[2], source=kv.get("src", "")))
        elif kind == "access-control":
            kv = _parse_kv(parts[2:], where)
            guard = kv.get("guard", "")
            if guard not in GUARD_KINDS:
                raise UnknownKind(f"{where}: guard kind {guard!r}")
            params = tuple(
                int(x) for x in kv.get("params", "").split(",") if x.strip()
            )
            kb.add(
                AccessControlEntry(
                    method=parts[1],
                    params=params,
                    guard=guard,
                    sensitive=kv.get("sensitive", ""),
                    source=kv.get("src", ""),
                )
            )
        else:
            raise UnknownKind(f"{where}: knowledge kind {kind!r}")
    return kb


def save_knowledge(kb: KnowledgeBase, path) -> None:
    lines = ["# kind\tfields..."]
    for c in sorted(kb.conflicts, key=lambda c: (c.a, c.b)):
        lines.append(f"conflict\t{c.a}\t{c.b}\tsrc={c.source}")
    for a in sorted(kb.access, key=lambda a: a.method):
        params = ",".join(str(p) for p in a.params)
        lines.append(
            f"access-control\t{a.method}\tparams={params}"
            f"\tguard={a.guard}\tsensitive={a.sensitive}\tsrc={a.source}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def check_closure(db: SubcontractDb, kb: KnowledgeBase) -> list[str]:
    """Knowledge entries must reference methods present in the database."""
    known = {r.qualname for r in db}
    warnings = []
    refs = [(e.kind, m) for e in kb.conflicts for m in e.methods()]
    refs += [(e.kind, e.method) for e in kb.access]
    for kind, qual in refs:
        if qual not in known:
            msg = f"{kind} entry references unknown method {qual}"
            warnings.append(msg)
            log.warning(msg)
    return warnings


def _load_runtime(bytecode_dir: Path, name: str) -> bytes:
    path = bytecode_dir / name
    if path.suffix == ".json":
        art = json.loads(path.read_text())
        return bytes.fromhex(art["runtime"])
    return load_bytecode(path)


def build_db(bytecode_dir, manifest_path, errors: list | None = None) -> SubcontractDb:
    """Run the analysis pipeline over listed binaries and record signatures.

    Manifest rows: file, subcontract, version, method, locator, visibility.
    A locator is either selector:HEX8 (public dispatch entry) or offset:N
    (any byte offset inside the method body).  Per-file pipeline failures
    are appended to `errors` as (where, message) and the build continues;
    a malformed manifest still raises.
    """
    bytecode_dir = Path(bytecode_dir)
    rows = []
    text = Path(manifest_path).read_text()
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        rows.append((lineno, _fields(line, 6, f"{manifest_path}:{lineno}")))

    by_file: dict[str, list] = {}
    for lineno, row in rows:
        by_file.setdefault(row[0], []).append((lineno, row))

    if errors is None:
        errors = []
    db = SubcontractDb()
    for fname in sorted(by_file):
        try:
            raw = _load_runtime(bytecode_dir, fname)
            stream = strip_trailer(decode(raw))
            cfg = build_cfg(stream)
            regions = recover_heuristic(cfg)
            sigs = signatures_for(cfg, regions)
        except Exception as exc:
            errors.append((fname, str(exc)))
            log.warning("skipping %s: %s", fname, exc)
            continue
        by_id = {r.id: r for r in regions}
        for lineno, (_, sub, ver, meth, locator, vis) in by_file[fname]:
            where = f"{manifest_path}:{lineno}"
            scheme, _, arg = locator.partition(":")
            if scheme == "selector":
                sel = int(arg, 16)
                matches = [
                    r for r in regions if r.selector == sel
                ]
                if not matches:
                    errors.append((where, f"no region with selector {arg}"))
                    log.warning("%s: no region with selector %s", where, arg)
                    continue
                region = matches[0]
                selector = sel
            elif scheme == "offset":
                rid = innermost_region(regions, int(arg))
                if rid is None:
                    errors.append((where, f"offset {arg} in no region"))
                    log.warning("%s: offset %s in no region", where, arg)
                    continue
                region = by_id[rid]
                selector = None
            else:
                raise ParseError(f"{where}: bad locator {locator!r}")
            sig = sigs[region.id]
            db.add(
                SubcontractRecord(
                    subcontract=sub,
                    version=ver,
                    method=meth,
                    selector=selector,
                    visibility=vis,
                    intra=sig.intra,
                    chain=sig.chain,
                )
            )
    return db
