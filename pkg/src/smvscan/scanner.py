"""End-to-end scan pipeline: bytes in, vulnerability traces out.

Ties the stages together for one contract (decode, control flow, method
boundaries, signatures, matching, detection) and exposes batch helpers
used by the command line front end.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .boundary import (
    labels_to_regions,
    merge_regions,
    recover_heuristic,
    recover_model,
)
from .bytecode import decode, normalize_hex, strip_trailer
from .errors import MalformedHex
from .cfg import ControlFlowGraph, build_cfg
from .db import KnowledgeBase, SubcontractDb
from .detector import Detection, detect
from .matcher import THETA_LEN, THETA_TYPE, Match, match
from .signatures import render_symbols, signatures_for

BOUNDARY_MODES = ("heuristic", "model", "both")


@dataclass
class ScanResult:
    """Everything produced while scanning one contract."""

    path: str
    stream: object = None
    cfg: ControlFlowGraph | None = None
    regions: tuple = ()
    signatures: dict = field(default_factory=dict)
    matches: list[Match] = field(default_factory=list)
    detection: Detection | None = None
    timings: dict[str, float] = field(default_factory=dict)
    error: str | None = None

    @property
    def traces(self):
        return self.detection.traces if self.detection else ()

    @property
    def warnings(self):
        return self.detection.warnings if self.detection else ()


def load_contract_bytes(path) -> bytes:
    """Read runtime bytecode from a file.

    Accepts raw binaries (.bin), hex text, or compiler artifact JSON
    with a "runtime" hex field.
    """
    path = Path(path)
    if path.suffix == ".json":
        artifact = json.loads(path.read_text())
        if "runtime" not in artifact:
            raise ValueError(f"{path}: artifact has no 'runtime' field")
        return normalize_hex(artifact["runtime"])
    blob = path.read_bytes()
    if path.suffix == ".bin":
        return blob
    try:
        return normalize_hex(blob.decode("ascii"))
    except UnicodeDecodeError as exc:
        raise MalformedHex(f"{path}: not ASCII hex") from exc


def scan_bytes(
    raw: bytes,
    db: SubcontractDb,
    kb: KnowledgeBase | None = None,
    *,
    theta_type: float = THETA_TYPE,
    theta_len: float = THETA_LEN,
    pn_verbatim: bool = False,
    boundary: str = "heuristic",
    weights=None,
    max_depth: int = 5,
    path: str = "<bytes>",
) -> ScanResult:
    """Run the full pipeline over one runtime bytecode blob."""
    if boundary not in BOUNDARY_MODES:
        raise ValueError(f"unknown boundary mode {boundary!r}")
    if boundary != "heuristic" and weights is None:
        raise ValueError(f"boundary mode {boundary!r} needs model weights")
    result = ScanResult(path=str(path))
    clock = time.perf_counter

    t0 = clock()
    stream = strip_trailer(decode(raw))
    result.stream = stream
    result.timings["decode"] = clock() - t0

    t0 = clock()
    cfg = build_cfg(stream)
    result.cfg = cfg
    result.timings["cfg"] = clock() - t0

    t0 = clock()
    heur = recover_heuristic(cfg)
    if boundary == "heuristic":
        regions = heur
    else:
        labels = recover_model(stream, weights)
        modeled = labels_to_regions(labels, cfg)
        regions = modeled if boundary == "model" else merge_regions(heur, modeled)
    result.regions = regions
    result.timings["regions"] = clock() - t0

    t0 = clock()
    sigs = signatures_for(cfg, regions, max_depth=max_depth)
    result.signatures = sigs
    result.timings["signatures"] = clock() - t0

    t0 = clock()
    matches = match(
        sigs, db, theta1=theta_type, theta2=theta_len, verbatim=pn_verbatim
    )
    result.matches = matches
    result.timings["match"] = clock() - t0

    t0 = clock()
    if kb is None:
        kb = KnowledgeBase()
    result.detection = detect(
        cfg, regions, sigs, matches, db, kb, theta_type, theta_len
    )
    result.timings["detect"] = clock() - t0
    return result


def scan_path(path, db, kb=None, **kwargs) -> ScanResult:
    """Scan one contract file; analysis failures land in result.error."""
    try:
        raw = load_contract_bytes(path)
    except Exception as exc:
        return ScanResult(path=str(path), error=str(exc))
    try:
        return scan_bytes(raw, db, kb, path=str(path), **kwargs)
    except Exception as exc:
        return ScanResult(path=str(path), error=f"{type(exc).__name__}: {exc}")


def scan_many(paths, db, kb=None, jobs: int = 1, **kwargs) -> list[ScanResult]:
    """Scan several contracts, optionally in parallel, preserving order."""
    paths = [str(p) for p in paths]
    if jobs <= 1 or len(paths) <= 1:
        return [scan_path(p, db, kb, **kwargs) for p in paths]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda p: scan_path(p, db, kb, **kwargs), paths))


def build_report(results, db_warnings=()) -> dict:
    """Assemble the JSON report for a batch of scan results."""
    contracts = []
    total = 0
    for res in results:
        entry: dict = {"path": res.path}
        if res.error is not None:
            entry["error"] = res.error
            entry["traces"] = []
            entry["warnings"] = []
        else:
            entry["traces"] = [t.to_dict() for t in res.traces]
            entry["warnings"] = list(res.warnings)
            total += len(res.traces)
        contracts.append(entry)
    report = {"contracts": contracts, "trace_count": total}
    if db_warnings:
        report["warnings"] = list(db_warnings)
    return report


def render_text(report: dict) -> str:
    """Human-readable rendering of a JSON report."""
    lines = []
    for warning in report.get("warnings", ()):
        lines.append(f"warning: {warning}")
    for entry in report["contracts"]:
        if entry.get("error"):
            lines.append(f"{entry['path']}: error: {entry['error']}")
            continue
        traces = entry["traces"]
        count = len(traces)
        noun = "finding" if count == 1 else "findings"
        lines.append(f"{entry['path']}: {count} {noun}")
        for t in traces:
            chain = " -> ".join(f"r{rid}" for rid in t["chain"])
            slots = ", ".join(t["affected_slots"])
            lines.append(
                f"  [{t['smv_type']}] entry {t['entry_selector']}"
                f" site {t['site']} chain {chain} affects {slots}"
            )
            ev = t["evidence"]
            records = ", ".join(ev["records"])
            lines.append(f"      records: {records} (source: {ev['source']})")
            if "missing_guard" in ev:
                lines.append(f"      missing guard: {ev['missing_guard']}")
            if "counterpart_selector" in ev:
                lines.append(
                    f"      counterpart entry: {ev['counterpart_selector']}"
                )
        for warning in entry["warnings"]:
            lines.append(f"  warning: {warning}")
    lines.append(f"total: {report['trace_count']} trace(s)")
    return "\n".join(lines)


def dump_regions(result: ScanResult) -> str:
    """One region per line: start end kind source."""
    lines = []
    for r in sorted(result.regions, key=lambda r: (r.start, r.end)):
        lines.append(f"{r.start} {r.end} {r.kind} {r.source}")
    return "\n".join(lines)


def dump_signatures(result: ScanResult) -> str:
    """Per region: id, intra and chain symbol strings."""
    lines = []
    for rid in sorted(result.signatures):
        sig = result.signatures[rid]
        lines.append(
            f"region {rid}"
            f"\tintra {render_symbols(sig.intra) or '-'}"
            f"\tchain {render_symbols(sig.chain) or '-'}"
        )
    return "\n".join(lines)


def dump_matches(result: ScanResult) -> str:
    """TSV of database matches per region; best ones flagged."""
    lines = ["region\tsubcontract\tversion\tmethod\tp_type\tp_len\tbest"]
    for m in result.matches:
        rec = m.record
        lines.append(
            f"{m.region}\t{rec.subcontract}\t{rec.version}\t{rec.method}"
            f"\t{m.p_type:.4f}\t{m.p_len:.4f}\t{int(m.best)}"
        )
    return "\n".join(lines)
