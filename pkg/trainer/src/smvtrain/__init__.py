"""Trainer for the bytecode boundary-labeling model.

Builds labeled corpora from compiled contracts (or compiles Solidity
sources through node/solc), pretrains a small transformer encoder with
a denoising objective, fine-tunes a method start/end/none head, and
exports weights in the file format the scanner loads.
"""

from .corpus import (
    CorpusEntry,
    corpus_windows,
    entry_from_artifact,
    entry_windows,
    jittered_windows,
    load_corpus,
    window_at,
)
from .errors import BadCorpus, CompilationFailed, CompilerUnavailable, DivergedLoss, TrainError
from .masking import MaskingPlan, apply_plan, draw_plan
from .net import Adam, Net, NetConfig, init_params
from .synth import generate_contract, generate_corpus
from .train import (
    TrainConfig,
    export_weights,
    f1_for_label,
    finetune,
    masked_accuracy,
    merged_predictions,
    merged_prf,
    pretrain,
    split_entries,
    train_pipeline,
)

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "BadCorpus",
    "CompilationFailed",
    "CompilerUnavailable",
    "CorpusEntry",
    "DivergedLoss",
    "MaskingPlan",
    "Net",
    "NetConfig",
    "TrainConfig",
    "TrainError",
    "apply_plan",
    "corpus_windows",
    "draw_plan",
    "entry_from_artifact",
    "entry_windows",
    "export_weights",
    "f1_for_label",
    "finetune",
    "generate_contract",
    "generate_corpus",
    "init_params",
    "jittered_windows",
    "load_corpus",
    "masked_accuracy",
    "merged_predictions",
    "merged_prf",
    "pretrain",
    "split_entries",
    "train_pipeline",
    "window_at",
]
