import json
import subprocess
import sys

import numpy as np
import pytest
from smvscan import load_weights


def write_artifact_corpus(directory, count=5, size=60, seed=0):
    """Artifact JSONs for synthetic stop-terminated jumpdest bodies."""
    rng = np.random.default_rng(seed)
    for i in range(count):
        body = bytearray()
        runs = []
        while len(body) < size:
            start = len(body)
            body.append(0x5B)
            for _ in range(int(rng.integers(3, 9))):
                body.append(int(rng.choice([0x01, 0x02, 0x50, 0x80, 0x90])))
            body.append(0x00)
            runs.append([start, len(body) - 1])
        artifact = {
            "contract": f"Micro{i}",
            "runtime": bytes(body).hex(),
            "functions": [{"name": f"f{j}", "runs": [r]} for j, r in enumerate(runs)],
        }
        (directory / f"micro{i}.json").write_text(json.dumps(artifact))


def run_cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "smvtrain.cli", *args],
        capture_output=True,
        text=True,
    )


def test_train_command_writes_loadable_model(tmp_path):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    write_artifact_corpus(corpus)
    out = tmp_path / "model.smvw"
    stats_path = tmp_path / "stats.json"
    proc = run_cli(
        "train", "--corpus", str(corpus), "--out", str(out),
        "--seed", "1", "--steps", "2", "--epochs", "1",
        "--stats", str(stats_path),
    )
    assert proc.returncode == 0, proc.stderr
    assert "wrote" in proc.stderr
    weights = load_weights(out)
    assert "embed.tok" in weights.tensors
    stats = json.loads(stats_path.read_text())
    assert stats["contracts"] == 5
    assert stats["pretrain"]["steps"] == 2


def test_train_command_rejects_missing_corpus(tmp_path):
    proc = run_cli("train", "--corpus", str(tmp_path / "nope"), "--out", str(tmp_path / "m.smvw"))
    assert proc.returncode == 1
    assert "error:" in proc.stderr


def test_train_command_rejects_over_budget(tmp_path):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    write_artifact_corpus(corpus, count=1)
    proc = run_cli(
        "train", "--corpus", str(corpus), "--out", str(tmp_path / "m.smvw"),
        "--steps", "999999",
    )
    assert proc.returncode == 1
    assert "error:" in proc.stderr
    assert not (tmp_path / "m.smvw").exists()
