"""Corpus loading: compiled artifacts or Solidity sources with a manifest.

A corpus directory holds either precompiled ``*.json`` artifacts (runtime
bytecode plus per-function byte runs derived from compiler source maps)
or ``*.sol`` sources listed in a ``corpus.tsv`` manifest, which are
compiled on the fly through a node/solc helper.  Both routes end in the
same :class:`CorpusEntry` shape: trailer-stripped runtime bytecode and a
table labeling method start and end offsets.
"""

from __future__ import annotations

import json
import logging
import shutil
import subprocess
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from smvscan import decode, strip_trailer

from .errors import BadCorpus, CompilationFailed, CompilerUnavailable
from .protocol import LABEL_IDS, MAX_SEQ, PAD, byte_token

log = logging.getLogger(__name__)

COMPILE_HELPER = Path(__file__).with_name("compile.js")

# snap tolerance when a run border does not sit on an instruction start
SNAP = 2


@dataclass
class CorpusEntry:
    """One contract: stripped runtime code plus boundary labels.

    label_table maps instruction offsets to "S" or "E"; every other
    position is implicitly "N".  Each "S" has a matching "E" at a later
    offset (the function body's end).
    """

    name: str
    bytecode: bytes
    label_table: dict[int, str]
    starts: frozenset[int] = field(repr=False)

    def __post_init__(self) -> None:
        for off, lab in self.label_table.items():
            if lab not in ("S", "E"):
                raise BadCorpus(f"{self.name}: bad label {lab!r} at {off}")
            if off not in self.starts:
                raise BadCorpus(f"{self.name}: label off instruction start at {off}")


def _snap_start(offset: int, starts: list[int]) -> int | None:
    """Nearest instruction start at or after offset, within tolerance."""
    i = int(np.searchsorted(starts, offset))
    if i < len(starts) and starts[i] - offset <= SNAP:
        return starts[i]
    return None


def labels_from_functions(code: bytes, functions: list[dict]) -> tuple[dict[int, str], frozenset[int]]:
    """Derive the S/E table from per-function byte runs.

    Each contiguous run [a, b) of a function body yields S at the first
    instruction inside it and E at the first instruction at or past b.
    S wins when two runs disagree about one offset.
    """
    stream = decode(code)
    starts = [ins.offset for ins in stream.code]
    start_set = frozenset(starts)
    table: dict[int, str] = {}
    spans: list[tuple[int, int]] = []
    for fn in functions:
        for a, b in fn.get("runs", ()):
            s = _snap_start(a, starts)
            e = _snap_start(b, starts)
            if e is None and starts and starts[-1] < b:
                e = starts[-1]
            if s is None or e is None or e <= s:
                continue
            spans.append((s, e))
    for _, e in sorted(spans):
        table.setdefault(e, "E")
    # S wins when one offset ends a body and starts the next
    for s, _ in spans:
        table[s] = "S"
    return table, start_set


def entry_from_artifact(name: str, artifact: dict) -> CorpusEntry:
    runtime = artifact.get("runtime")
    functions = artifact.get("functions")
    if not isinstance(runtime, str) or not isinstance(functions, list):
        raise BadCorpus(f"{name}: not a compiled-contract artifact")
    raw = bytes.fromhex(runtime)
    body = strip_trailer(decode(raw))
    code = body.serialize()
    table, starts = labels_from_functions(code, functions)
    return CorpusEntry(name=name, bytecode=code, label_table=table, starts=starts)


def _read_manifest(path: Path) -> list[tuple[str, str]]:
    rows = []
    for ln, line in enumerate(path.read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise BadCorpus(f"{path.name}:{ln}: expected 'file<TAB>contract'")
        rows.append((parts[0], parts[1]))
    return rows


def compile_source(directory: Path, file: str, contract: str) -> dict:
    """Compile one Solidity file through the node/solc helper.

    The helper resolves the ``solc`` package through node's normal
    module lookup starting at the corpus directory, so a node_modules
    tree must be reachable from there.
    """
    node = shutil.which("node")
    if node is None:
        raise CompilerUnavailable("node executable not found on PATH")
    sources = {}
    main = directory / file
    if not main.is_file():
        raise CompilationFailed(file, "source file not found")
    sources[file] = main.read_text()
    lib = directory / "lib"
    if lib.is_dir():
        for dep in sorted(lib.glob("*.sol")):
            sources[f"lib/{dep.name}"] = dep.read_text()
    request = json.dumps({"sources": sources, "file": file, "contract": contract})
    proc = subprocess.run(
        [node, str(COMPILE_HELPER)],
        input=request,
        capture_output=True,
        text=True,
        cwd=directory,
    )
    if proc.returncode == 3:
        raise CompilerUnavailable(proc.stderr.strip() or "solc package not resolvable")
    if proc.returncode != 0:
        raise CompilationFailed(file, proc.stderr.strip() or "compiler helper failed")
    try:
        return json.loads(proc.stdout)
    except ValueError as exc:
        raise CompilationFailed(file, f"bad helper output: {exc}") from exc


def load_corpus(directory: str | Path, errors: list[tuple[str, str]] | None = None) -> list[CorpusEntry]:
    """Load every usable contract under a corpus directory.

    Per-file failures are appended to ``errors`` and skipped; an empty
    result raises BadCorpus.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise BadCorpus(f"{directory} is not a directory")
    entries: list[CorpusEntry] = []

    for path in sorted(directory.glob("*.json")):
        try:
            artifact = json.loads(path.read_text())
            entries.append(entry_from_artifact(path.stem, artifact))
        except Exception as exc:
            _note(errors, path.name, str(exc))

    manifest = directory / "corpus.tsv"
    if manifest.is_file():
        for file, contract in _read_manifest(manifest):
            try:
                artifact = compile_source(directory, file, contract)
                entries.append(entry_from_artifact(Path(file).stem, artifact))
            except CompilerUnavailable:
                raise
            except Exception as exc:
                _note(errors, file, str(exc))

    if not entries:
        raise BadCorpus(f"no usable contracts in {directory}")
    return entries


def _note(errors: list[tuple[str, str]] | None, where: str, message: str) -> None:
    log.warning("%s: %s", where, message)
    if errors is not None:
        errors.append((where, message))


def window_at(entry: CorpusEntry, origin: int, seq_len: int = MAX_SEQ) -> tuple[np.ndarray, np.ndarray]:
    """One window starting at a byte offset.

    Returns (tokens, labels); labels hold LABEL_IDS values with -1 at
    padded positions so they can be dropped from any loss.
    """
    chunk = entry.bytecode[origin : origin + seq_len]
    tokens = np.full(seq_len, PAD, dtype=np.int64)
    labels = np.full(seq_len, -1, dtype=np.int64)
    for j, b in enumerate(chunk):
        tokens[j] = byte_token(b)
        labels[j] = LABEL_IDS["N"]
    for off, lab in entry.label_table.items():
        j = off - origin
        if 0 <= j < len(chunk):
            labels[j] = LABEL_IDS[lab]
    return tokens, labels


def tiling_origins(entry: CorpusEntry, seq_len: int = MAX_SEQ, stride: int = MAX_SEQ // 2) -> list[int]:
    return list(range(0, max(len(entry.bytecode) - stride, 1), stride)) or [0]


def entry_windows(entry: CorpusEntry, seq_len: int = MAX_SEQ, stride: int = MAX_SEQ // 2) -> list[tuple[np.ndarray, np.ndarray]]:
    """Cut one contract into overlapping fixed-stride windows."""
    return [window_at(entry, w0, seq_len) for w0 in tiling_origins(entry, seq_len, stride)]


def jittered_windows(
    entries: list[CorpusEntry],
    rng: np.random.Generator,
    seq_len: int = MAX_SEQ,
    stride: int = MAX_SEQ // 2,
) -> tuple[np.ndarray, np.ndarray]:
    """Windows at random origins, as many per contract as plain tiling.

    An alternative to the consumer-style tiling for fine-tune epochs:
    shifting origins decouple boundary patterns from absolute window
    positions, at the cost of hiding the aligned layout the scanner
    actually presents.
    """
    toks, labs = [], []
    for entry in entries:
        span = max(len(entry.bytecode) - stride, 1)
        for _ in tiling_origins(entry, seq_len, stride):
            w0 = int(rng.integers(0, span))
            tokens, labels = window_at(entry, w0, seq_len)
            toks.append(tokens)
            labs.append(labels)
    return np.stack(toks), np.stack(labs)


def corpus_windows(entries: list[CorpusEntry], seq_len: int = MAX_SEQ, stride: int = MAX_SEQ // 2) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Stack windows from many contracts into batchable arrays."""
    toks, labs, owners = [], [], []
    for entry in entries:
        for tokens, labels in entry_windows(entry, seq_len, stride):
            toks.append(tokens)
            labs.append(labels)
            owners.append(entry.name)
    return np.stack(toks), np.stack(labs), owners
