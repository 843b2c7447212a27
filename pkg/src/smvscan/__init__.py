"""Static detection of subcontract misuse in EVM runtime bytecode.

The pipeline: decode the binary, build a control flow graph, recover
method boundaries, summarize each method as an opcode-type signature,
match signatures against a database of known library methods, then check
matched uses against a misuse knowledge base.  Two trace kinds come out:
variable conflicts (two embedded library versions sharing a storage
slot) and lack-of-security-check (a sensitive library method reachable
without its required guard).
"""

from .bytecode import decode, load_bytecode, strip_trailer
from .cfg import build_cfg
from .db import (
    KnowledgeBase,
    SubcontractDb,
    build_db,
    load_db,
    load_knowledge,
    save_db,
)
from .detector import LACK_OF_CHECK, VARIABLE_CONFLICT, Detection, Trace, detect
from .errors import (
    ChecksumMismatch,
    DuplicateKey,
    EmptyContractSignature,
    EmptyInput,
    InvalidSymbol,
    MalformedHex,
    ParseError,
    ShapeMismatch,
    SmvScanError,
    UnknownKind,
    WindowOutOfRange,
)
from .matcher import THETA_LEN, THETA_TYPE, Match, match
from .scanner import ScanResult, build_report, render_text, scan_bytes, scan_many, scan_path
from .signatures import SYMBOLS, MethodSignature, signatures_for
from .weights import ModelWeights, load_weights, save_weights

__version__ = "0.1.0"

__all__ = [
    "ChecksumMismatch",
    "Detection",
    "DuplicateKey",
    "EmptyContractSignature",
    "EmptyInput",
    "InvalidSymbol",
    "KnowledgeBase",
    "LACK_OF_CHECK",
    "MalformedHex",
    "Match",
    "MethodSignature",
    "ModelWeights",
    "ParseError",
    "ScanResult",
    "ShapeMismatch",
    "SmvScanError",
    "SubcontractDb",
    "SYMBOLS",
    "THETA_LEN",
    "THETA_TYPE",
    "Trace",
    "UnknownKind",
    "VARIABLE_CONFLICT",
    "WindowOutOfRange",
    "build_cfg",
    "build_db",
    "build_report",
    "decode",
    "detect",
    "load_bytecode",
    "load_db",
    "load_knowledge",
    "load_weights",
    "match",
    "render_text",
    "save_db",
    "save_weights",
    "scan_bytes",
    "scan_many",
    "scan_path",
    "signatures_for",
    "strip_trailer",
]
