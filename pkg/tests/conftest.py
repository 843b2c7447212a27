import json
from pathlib import Path

import numpy as np
import pytest

from smvscan.bytecode import decode, strip_trailer
from smvscan.cfg import build_cfg
from smvscan.db import load_db, load_knowledge
from smvscan.scanner import load_contract_bytes, scan_path
from smvscan.weights import ModelWeights

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"
COMPILED = FIXTURES / "compiled"
DB_DIR = FIXTURES / "db"

# one verdict line per acceptance criterion, shown after the test run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

CORPUS = sorted(
    p.stem for p in COMPILED.glob("*.json") if not p.stem.startswith("db_")
)


def artifact_path(name: str) -> Path:
    return COMPILED / f"{name}.json"


def artifact(name: str) -> dict:
    return json.loads(artifact_path(name).read_text())


@pytest.fixture(scope="session")
def db():
    return load_db(DB_DIR / "subcontracts.tsv")


@pytest.fixture(scope="session")
def kb():
    return load_knowledge(DB_DIR / "knowledge.tsv")


@pytest.fixture(scope="session")
def corpus_results(db, kb):
    """One full scan of every non-library fixture, shared by all tests."""
    return {
        name: scan_path(artifact_path(name), db, kb) for name in CORPUS
    }


@pytest.fixture(scope="session")
def tokenhub_cfg():
    stream = strip_trailer(decode(load_contract_bytes(artifact_path("tokenhub"))))
    return build_cfg(stream)


def tiny_model_weights(seed: int = 0, *, vocab=261, hidden=16, layers=2,
                       heads=2, ffn=32, max_seq=64) -> ModelWeights:
    """Random but well-formed weights for model plumbing tests."""
    rng = np.random.default_rng(seed)

    def t(*shape):
        return rng.normal(0.0, 0.02, size=shape).astype(np.float32)

    header = {
        "vocab_size": vocab,
        "hidden_dim": hidden,
        "layer_count": layers,
        "head_count": heads,
        "ffn_dim": ffn,
        "max_seq_len": max_seq,
    }
    tensors = {
        "embed.tok": t(vocab, hidden),
        "embed.pos": t(max_seq, hidden),
        "head.w": t(hidden, 3),
        "head.b": t(3),
    }
    for i in range(layers):
        base = f"layer{i}"
        for part in ("wq", "wk", "wv", "wo"):
            tensors[f"{base}.attn.{part}"] = t(hidden, hidden)
        for part in ("bq", "bk", "bv", "bo"):
            tensors[f"{base}.attn.{part}"] = t(hidden)
        for ln in ("ln1", "ln2"):
            tensors[f"{base}.{ln}.g"] = np.ones(hidden, dtype=np.float32)
            tensors[f"{base}.{ln}.b"] = np.zeros(hidden, dtype=np.float32)
        tensors[f"{base}.ffn.w1"] = t(hidden, ffn)
        tensors[f"{base}.ffn.b1"] = t(ffn)
        tensors[f"{base}.ffn.w2"] = t(ffn, hidden)
        tensors[f"{base}.ffn.b2"] = t(hidden)
    return ModelWeights(header=header, tensors=tensors)
