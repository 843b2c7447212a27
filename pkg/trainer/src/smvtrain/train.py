"""Two-stage training and weight export.

Stage one teaches the encoder bytecode statistics by reconstructing
corrupted windows; stage two fits the 3-way boundary head on compiler
derived S/E/N labels, keeping the checkpoint with the best validation
F1 for the method-start class.  The exported file drops the
reconstruction head and carries only what the scanner loads.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from smvscan import ModelWeights, save_weights

from .corpus import CorpusEntry, corpus_windows, jittered_windows, tiling_origins, window_at
from .errors import DivergedLoss
from .masking import apply_plan, draw_plan
from .net import Adam, Net, NetConfig
from .protocol import LABEL_IDS, MAX_SEQ, header
from .synth import generate_corpus

log = logging.getLogger(__name__)

# caps for a desk-scale run on one CPU
MAX_PRETRAIN_STEPS = 2000
MAX_FINETUNE_EPOCHS = 30

EXPORT_PREFIXES = ("embed.", "layer", "head.")


@dataclass(frozen=True)
class TrainConfig:
    seed: int = 0
    pretrain_steps: int = 300
    finetune_epochs: int = 20
    batch: int = 8
    pretrain_lr: float = 1e-3
    finetune_lr: float = 5e-4
    val_fraction: float = 0.2
    seq_len: int = MAX_SEQ
    stride: int = MAX_SEQ // 2
    # fine-tune windows: consumer tiling (False) or random origins (True).
    # The scanner always tiles from offset 0, so the aligned placement is
    # part of the deployment distribution, not an artifact.
    jitter: bool = False
    # inverse-frequency class weights are clipped here; large caps trade
    # start/end precision away for recall
    class_weight_cap: float = 10.0
    # generated contracts mixed into the training side only; held-out
    # metrics always come from real corpus entries
    synth_contracts: int = 150

    def __post_init__(self) -> None:
        if not 0 <= self.pretrain_steps <= MAX_PRETRAIN_STEPS:
            raise ValueError(f"pretrain_steps outside 0..{MAX_PRETRAIN_STEPS}")
        if not 0 <= self.finetune_epochs <= MAX_FINETUNE_EPOCHS:
            raise ValueError(f"finetune_epochs outside 0..{MAX_FINETUNE_EPOCHS}")
        if self.batch < 1:
            raise ValueError("batch must be positive")
        if self.class_weight_cap <= 0:
            raise ValueError("class_weight_cap must be positive")
        if self.synth_contracts < 0:
            raise ValueError("synth_contracts must be non-negative")


def _rng(cfg: TrainConfig, stream: int) -> np.random.Generator:
    return np.random.default_rng([cfg.seed, stream])


def split_entries(entries: list[CorpusEntry], cfg: TrainConfig) -> tuple[list[CorpusEntry], list[CorpusEntry]]:
    """Seeded contract-level holdout; at least one entry lands in each side."""
    order = list(_rng(cfg, 1).permutation(len(entries)))
    n_val = max(1, int(round(cfg.val_fraction * len(entries)))) if len(entries) > 1 else 0
    val_idx = set(order[:n_val])
    train = [e for i, e in enumerate(entries) if i not in val_idx]
    val = [e for i, e in enumerate(entries) if i in val_idx]
    return train, val


def pretrain(net: Net, entries: list[CorpusEntry], cfg: TrainConfig) -> dict:
    """Denoising pretraining; zero steps leaves parameters untouched.

    Every step sees freshly placed windows under freshly drawn masks,
    so no fixed (position, content) pairing can be memorized.
    """
    rng = _rng(cfg, 2)
    adam = Adam(lr=cfg.pretrain_lr)
    losses = []
    correct = counted = 0
    for step in range(cfg.pretrain_steps):
        picks = rng.choice(len(entries), size=min(cfg.batch, len(entries)), replace=False)
        xs, ys = [], []
        for i in picks:
            entry = entries[i]
            span = max(len(entry.bytecode) - cfg.stride, 1)
            tokens, _ = window_at(entry, int(rng.integers(0, span)), cfg.seq_len)
            plan = draw_plan(rng, tokens)
            corrupted, targets = apply_plan(rng, tokens, plan)
            xs.append(corrupted)
            ys.append(targets)
        loss, grads, (c, n) = net.loss_mlm(np.stack(xs), np.stack(ys))
        if not math.isfinite(loss):
            raise DivergedLoss(f"pretrain loss {loss} at step {step}")
        adam.step(net.params, grads)
        losses.append(loss)
        correct += c
        counted += n
        if step % 50 == 0:
            log.info("pretrain step %d loss %.4f", step, loss)
    return {
        "steps": cfg.pretrain_steps,
        "final_loss": losses[-1] if losses else None,
        "train_masked_acc": correct / counted if counted else None,
    }


def masked_accuracy(net: Net, tokens: np.ndarray, cfg: TrainConfig, rounds: int = 4) -> float:
    """Reconstruction accuracy at freshly drawn masked positions."""
    rng = _rng(cfg, 3)
    correct = counted = 0
    for _ in range(rounds):
        for i in range(0, len(tokens), cfg.batch):
            chunk = tokens[i : i + cfg.batch]
            xs, ys = [], []
            for row in chunk:
                plan = draw_plan(rng, row)
                corrupted, targets = apply_plan(rng, row, plan)
                xs.append(corrupted)
                ys.append(targets)
            targets = np.stack(ys)
            preds = net.predict_mlm(np.stack(xs))
            counted += int((targets >= 0).sum())
            correct += int(((preds == targets) & (targets >= 0)).sum())
    return correct / counted if counted else 0.0


def class_weights(labels: np.ndarray, cap: float = 10.0) -> np.ndarray:
    """Inverse-frequency weights so rare boundary labels are not drowned.

    The cap keeps the skew in check: uncapped weights for labels near
    0.3% frequency would make the head mark boundaries on any faint
    evidence, wrecking precision.
    """
    counts = np.array([(labels == c).sum() for c in range(len(LABEL_IDS))], dtype=np.float64)
    total = counts.sum()
    w = np.where(counts > 0, total / (len(counts) * np.maximum(counts, 1)), 0.0)
    return np.minimum(w, cap).astype(np.float32)


def prf_for_label(preds: np.ndarray, labels: np.ndarray, label_id: int) -> tuple[float, float, float]:
    """(precision, recall, F1) for one class at scored positions."""
    counted = labels >= 0
    tp = int(((preds == label_id) & (labels == label_id) & counted).sum())
    fp = int(((preds == label_id) & (labels != label_id) & counted).sum())
    fn = int(((preds != label_id) & (labels == label_id) & counted).sum())
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    denom = 2 * tp + fp + fn
    return precision, recall, 2 * tp / denom if denom else 0.0


def f1_for_label(preds: np.ndarray, labels: np.ndarray, label_id: int) -> float:
    return prf_for_label(preds, labels, label_id)[2]


def merged_predictions(net: Net, entry: CorpusEntry, cfg: TrainConfig) -> np.ndarray:
    """Per-byte labels after overlap merge, the way the scanner reads them.

    Overlapping windows vote; the higher-confidence window wins each
    position, so edge-of-window positions inherit their full-context
    prediction from the neighboring window.
    """
    n = len(entry.bytecode)
    origins = tiling_origins(entry, cfg.seq_len, cfg.stride)
    toks = np.stack([window_at(entry, w0, cfg.seq_len)[0] for w0 in origins])
    probs = np.concatenate(
        [net.predict_probs(toks[i : i + cfg.batch]) for i in range(0, len(toks), cfg.batch)]
    )
    best_conf = np.full(n, -1.0)
    preds = np.full(n, LABEL_IDS["N"], dtype=np.int64)
    for w0, window in zip(origins, probs):
        span = min(cfg.seq_len, n - w0)
        conf = window[:span].max(axis=-1)
        take = conf > best_conf[w0 : w0 + span]
        idx = np.flatnonzero(take) + w0
        preds[idx] = window[:span].argmax(axis=-1)[take]
        best_conf[idx] = conf[take]
    return preds


def entry_label_ids(entry: CorpusEntry) -> np.ndarray:
    labels = np.full(len(entry.bytecode), LABEL_IDS["N"], dtype=np.int64)
    for off, lab in entry.label_table.items():
        labels[off] = LABEL_IDS[lab]
    return labels


def merged_prf(net: Net, entries: list[CorpusEntry], cfg: TrainConfig, label: str = "S") -> tuple[float, float, float]:
    """Contract-level precision/recall/F1 after overlap merging."""
    preds = np.concatenate([merged_predictions(net, e, cfg) for e in entries])
    labels = np.concatenate([entry_label_ids(e) for e in entries])
    return prf_for_label(preds, labels, LABEL_IDS[label])


def finetune(net: Net, train_entries: list[CorpusEntry], val_entries: list[CorpusEntry], cfg: TrainConfig) -> dict:
    """Fit the boundary head; keep the best validation-S-F1 checkpoint.

    Training windows use the consumer's fixed tiling by default so the
    net sees boundary sites at the in-window positions it will meet at
    scan time (cfg.jitter re-cuts them at random origins instead).
    Validation reads each held-out contract through fixed tiling with
    overlap merging, so the tracked F1 matches scan-time conditions.
    """
    rng = _rng(cfg, 4)
    adam = Adam(lr=cfg.finetune_lr)
    fixed_t, fixed_l, _ = corpus_windows(train_entries, cfg.seq_len, cfg.stride)
    weights = class_weights(fixed_l, cfg.class_weight_cap)
    best_f1 = -1.0
    best_epoch = 0
    best_params = {k: v.copy() for k, v in net.params.items()}
    history = []
    for epoch in range(1, cfg.finetune_epochs + 1):
        if cfg.jitter:
            train_t, train_l = jittered_windows(train_entries, rng, cfg.seq_len, cfg.stride)
        else:
            train_t, train_l = fixed_t, fixed_l
        order = rng.permutation(len(train_t))
        epoch_loss = 0.0
        batches = 0
        for i in range(0, len(order), cfg.batch):
            picks = order[i : i + cfg.batch]
            loss, grads, _ = net.loss_cls(train_t[picks], train_l[picks], weights)
            if not math.isfinite(loss):
                raise DivergedLoss(f"finetune loss {loss} in epoch {epoch}")
            adam.step(net.params, grads)
            epoch_loss += loss
            batches += 1
        precision, recall, f1 = merged_prf(net, val_entries, cfg)
        history.append(
            {
                "epoch": epoch,
                "loss": epoch_loss / max(batches, 1),
                "val_p_s": precision,
                "val_r_s": recall,
                "val_f1_s": f1,
            }
        )
        log.info(
            "finetune epoch %d loss %.4f val S P/R/F1 %.3f/%.3f/%.3f",
            epoch, history[-1]["loss"], precision, recall, f1,
        )
        if f1 > best_f1:
            best_f1 = f1
            best_epoch = epoch
            best_params = {k: v.copy() for k, v in net.params.items()}
    net.params = best_params
    return {"best_epoch": best_epoch, "val_f1_s": max(best_f1, 0.0), "history": history}


def export_weights(net: Net, path) -> ModelWeights:
    """Write the scanner's weight file; drops the reconstruction head."""
    tensors = {
        name: np.asarray(value, dtype=np.float32)
        for name, value in net.params.items()
        if name.startswith(EXPORT_PREFIXES)
    }
    weights = ModelWeights(header=header(), tensors=tensors)
    save_weights(weights, path)
    return weights


def train_pipeline(entries: list[CorpusEntry], out_path, cfg: TrainConfig) -> dict:
    """Pretrain, fine-tune, evaluate, and export in one seeded run.

    Generated contracts join the training side of both stages; masked
    accuracy and the tracked F1 are measured on real entries only.
    """
    net = Net.create(NetConfig(), _rng(cfg, 0))
    all_t, _, _ = corpus_windows(entries, cfg.seq_len, cfg.stride)
    train_e, val_e = split_entries(entries, cfg)
    synth_e = generate_corpus(_rng(cfg, 5), cfg.synth_contracts)
    stats: dict = {
        "contracts": len(entries),
        "windows": len(all_t),
        "synth_contracts": len(synth_e),
        "train_contracts": [e.name for e in train_e],
        "val_contracts": [e.name for e in val_e],
    }
    fit_e = (train_e if val_e else entries) + synth_e
    stats["pretrain"] = pretrain(net, fit_e, cfg)
    stats["masked_acc"] = masked_accuracy(net, all_t, cfg)
    if cfg.finetune_epochs:
        stats["finetune"] = finetune(net, fit_e, val_e or entries, cfg)
    if out_path is not None:
        export_weights(net, out_path)
        stats["out"] = str(out_path)
    return stats
