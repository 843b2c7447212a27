import numpy as np
import pytest
from smvscan import load_weights

from smvtrain import Net, TrainConfig, export_weights, f1_for_label, pretrain, split_entries, train_pipeline
from smvtrain.corpus import CorpusEntry
from smvtrain.errors import DivergedLoss
from smvtrain.train import MAX_FINETUNE_EPOCHS, MAX_PRETRAIN_STEPS, class_weights, _rng

from conftest import tiny_config


def micro_corpus(seed: int = 0, count: int = 4, size: int = 60) -> list[CorpusEntry]:
    """Synthetic contracts: stop-terminated jumpdest bodies."""
    rng = np.random.default_rng(seed)
    entries = []
    for i in range(count):
        body = bytearray()
        table = {}
        while len(body) < size:
            start = len(body)
            body.append(0x5B)
            for _ in range(int(rng.integers(3, 9))):
                body.append(int(rng.choice([0x01, 0x02, 0x50, 0x80, 0x90])))
            body.append(0x00)
            table[start] = "S"
            table[len(body) - 1] = "E"
        starts = frozenset(range(len(body)))
        entries.append(CorpusEntry(f"micro{i}", bytes(body), table, starts))
    return entries


def test_config_budget_caps():
    with pytest.raises(ValueError):
        TrainConfig(pretrain_steps=MAX_PRETRAIN_STEPS + 1)
    with pytest.raises(ValueError):
        TrainConfig(finetune_epochs=MAX_FINETUNE_EPOCHS + 1)
    with pytest.raises(ValueError):
        TrainConfig(batch=0)


def test_split_is_seeded_partition(entries):
    cfg = TrainConfig(seed=11)
    train_a, val_a = split_entries(entries, cfg)
    train_b, val_b = split_entries(entries, cfg)
    assert [e.name for e in train_a] == [e.name for e in train_b]
    assert [e.name for e in val_a] == [e.name for e in val_b]
    assert {e.name for e in train_a} | {e.name for e in val_a} == {e.name for e in entries}
    assert not {e.name for e in train_a} & {e.name for e in val_a}
    assert val_a and train_a


def test_split_changes_with_seed(entries):
    _, val_a = split_entries(entries, TrainConfig(seed=1))
    _, val_b = split_entries(entries, TrainConfig(seed=2))
    assert {e.name for e in val_a} != {e.name for e in val_b}


def test_class_weights_favor_rare_labels():
    labels = np.array([2] * 96 + [0] * 3 + [1] * 1)
    w = class_weights(labels)
    assert w[0] > w[2] and w[1] > w[2]
    assert w.max() <= 10.0
    loose = class_weights(labels, cap=50.0)
    assert loose[1] == pytest.approx(100 / 3, rel=1e-6)


def test_f1_hand_cases():
    preds = np.array([[0, 2, 0, 2, 1]])
    labels = np.array([[0, 0, 2, 2, -1]])
    # tp=1 fp=1 fn=1
    assert f1_for_label(preds, labels, 0) == pytest.approx(0.5)
    assert f1_for_label(preds, labels, 1) == 0.0


def test_zero_pretrain_steps_leaves_initialization(tmp_path):
    corpus = micro_corpus()
    cfg = TrainConfig(seed=3, pretrain_steps=0, finetune_epochs=0, synth_contracts=0)
    stats = train_pipeline(corpus, tmp_path / "zero.smvw", cfg)
    assert stats["pretrain"]["final_loss"] is None
    fresh = Net.create(tiny_config_full(), _rng(cfg, 0))
    loaded = load_weights(tmp_path / "zero.smvw")
    for name, tensor in loaded.tensors.items():
        np.testing.assert_array_equal(tensor, fresh.params[name])


def tiny_config_full():
    from smvtrain.net import NetConfig

    return NetConfig()


def test_pretrain_diverges_loudly():
    corpus = micro_corpus()
    cfg = TrainConfig(seed=4, pretrain_steps=2, finetune_epochs=0, seq_len=64, stride=32, synth_contracts=0)
    net = Net.create(tiny_config(vocab=261, max_seq=64), _rng(cfg, 0))
    net.params["embed.tok"][:] = np.nan
    with pytest.raises(DivergedLoss):
        pretrain(net, corpus, cfg)


def test_pipeline_deterministic_per_seed(tmp_path):
    corpus = micro_corpus()
    cfg = TrainConfig(seed=5, pretrain_steps=3, finetune_epochs=2, seq_len=64, stride=32, synth_contracts=2)
    train_pipeline(corpus, tmp_path / "a.smvw", cfg)
    train_pipeline(corpus, tmp_path / "b.smvw", cfg)
    assert (tmp_path / "a.smvw").read_bytes() == (tmp_path / "b.smvw").read_bytes()


def test_pipeline_seed_changes_output(tmp_path):
    corpus = micro_corpus()
    base = dict(pretrain_steps=3, finetune_epochs=0, seq_len=64, stride=32, synth_contracts=0)
    train_pipeline(corpus, tmp_path / "a.smvw", TrainConfig(seed=6, **base))
    train_pipeline(corpus, tmp_path / "b.smvw", TrainConfig(seed=7, **base))
    assert (tmp_path / "a.smvw").read_bytes() != (tmp_path / "b.smvw").read_bytes()


def test_export_round_trips_through_consumer(tmp_path):
    net = Net.create(tiny_config_full(), np.random.default_rng(8))
    out = tmp_path / "model.smvw"
    export_weights(net, out)
    loaded = load_weights(out)
    assert "mlm.w" not in loaded.tensors
    assert set(loaded.tensors) == {k for k in net.params if not k.startswith("mlm.")}
    np.testing.assert_array_equal(loaded.tensors["embed.tok"], net.params["embed.tok"])


def test_export_rejects_corruption(tmp_path):
    from smvscan import ChecksumMismatch

    net = Net.create(tiny_config_full(), np.random.default_rng(9))
    out = tmp_path / "model.smvw"
    export_weights(net, out)
    blob = bytearray(out.read_bytes())
    blob[-3] ^= 0xFF
    out.write_bytes(bytes(blob))
    with pytest.raises(ChecksumMismatch):
        load_weights(out)


def test_finetune_tracks_best_checkpoint(tmp_path):
    corpus = micro_corpus(count=6)
    cfg = TrainConfig(
        seed=10, pretrain_steps=0, finetune_epochs=3, seq_len=64, stride=32,
        val_fraction=0.3, synth_contracts=0,
    )
    stats = train_pipeline(corpus, tmp_path / "m.smvw", cfg)
    ft = stats["finetune"]
    assert len(ft["history"]) == 3
    assert 1 <= ft["best_epoch"] <= 3
    best = max(h["val_f1_s"] for h in ft["history"])
    assert ft["val_f1_s"] == pytest.approx(best)
