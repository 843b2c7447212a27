import sys
from pathlib import Path

import numpy as np
import pytest

from smvtrain import load_corpus
from smvtrain.net import NetConfig

ROOT = Path(__file__).resolve().parents[2]
COMPILED = ROOT / "fixtures" / "compiled"

# verdict lines echoed after the run, one per acceptance criterion
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def entries():
    return load_corpus(COMPILED)


@pytest.fixture(scope="session")
def tokenhub_entry(entries):
    return next(e for e in entries if e.name == "tokenhub")


def tiny_config(**overrides) -> NetConfig:
    base = dict(vocab=13, hidden=8, layers=2, heads=2, ffn=12, max_seq=12)
    base.update(overrides)
    return NetConfig(**base)


def tiny_batch(rng: np.random.Generator, bsz: int = 2, seq: int = 9, vocab: int = 13, pad_tail: int = 2):
    tokens = rng.integers(5, vocab, size=(bsz, seq))
    tokens[:, seq - pad_tail :] = 0
    return tokens
