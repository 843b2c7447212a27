"""Transformer encoder inference for boundary labeling.

Pure numpy float32 forward pass: token + learned position embeddings,
post-layer-norm encoder blocks with tanh-approximated GELU, and a 3-way
classification head.  Attention never looks at padding positions.  The
same weight layout is produced by the trainer, so shapes are checked
against the file header up front instead of failing mid-multiply.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ShapeMismatch
from .weights import ModelWeights

LABELS = ("S", "E", "N")
_LN_EPS = np.float32(1e-5)


def gelu(x: np.ndarray) -> np.ndarray:
    c = np.float32(math.sqrt(2.0 / math.pi))
    inner = c * (x + np.float32(0.044715) * x * x * x)
    return np.float32(0.5) * x * (np.float32(1.0) + np.tanh(inner))


def layer_norm(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray) -> np.ndarray:
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + _LN_EPS) * gamma + beta


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def _layer_names(i: int):
    base = f"layer{i}"
    names = {}
    for part in ("wq", "wk", "wv", "wo"):
        names[f"{base}.attn.{part}"] = ("hidden", "hidden")
    for part in ("bq", "bk", "bv", "bo"):
        names[f"{base}.attn.{part}"] = ("hidden",)
    for ln in ("ln1", "ln2"):
        names[f"{base}.{ln}.g"] = ("hidden",)
        names[f"{base}.{ln}.b"] = ("hidden",)
    names[f"{base}.ffn.w1"] = ("hidden", "ffn")
    names[f"{base}.ffn.b1"] = ("ffn",)
    names[f"{base}.ffn.w2"] = ("ffn", "hidden")
    names[f"{base}.ffn.b2"] = ("hidden",)
    return names


class TransformerEncoder:
    def __init__(self, weights: ModelWeights):
        h = weights.header
        self.vocab_size = h["vocab_size"]
        self.hidden = h["hidden_dim"]
        self.layer_count = h["layer_count"]
        self.heads = h["head_count"]
        self.ffn_dim = h["ffn_dim"]
        self.max_seq_len = h["max_seq_len"]
        if self.hidden % self.heads:
            raise ShapeMismatch(
                f"hidden_dim {self.hidden} not divisible by {self.heads} heads"
            )
        self.t = weights.tensors

        dims = {"hidden": self.hidden, "ffn": self.ffn_dim}
        expected = {
            "embed.tok": (self.vocab_size, self.hidden),
            "embed.pos": (self.max_seq_len, self.hidden),
            "head.w": (self.hidden, len(LABELS)),
            "head.b": (len(LABELS),),
        }
        for i in range(self.layer_count):
            for name, spec in _layer_names(i).items():
                expected[name] = tuple(dims[d] for d in spec)
        for name, shape in expected.items():
            got = self.t.get(name)
            if got is None:
                raise ShapeMismatch(f"missing tensor {name}")
            if got.shape != shape:
                raise ShapeMismatch(
                    f"tensor {name}: shape {got.shape}, header implies {shape}"
                )

    def forward(self, tokens) -> np.ndarray:
        """Per-position label logits, shape (len(tokens), 3)."""
        toks = np.asarray(tokens, dtype=np.int64)
        if toks.ndim != 1 or len(toks) > self.max_seq_len:
            raise ShapeMismatch(
                f"token sequence of {toks.shape} exceeds window {self.max_seq_len}"
            )
        n = len(toks)
        x = self.t["embed.tok"][toks] + self.t["embed.pos"][:n]
        pad = toks == 0
        bias = np.where(pad, np.float32(-1e9), np.float32(0.0))[None, :]
        hd = self.hidden // self.heads
        scale = np.float32(1.0 / math.sqrt(hd))

        for i in range(self.layer_count):
            t = self.t
            base = f"layer{i}"
            q = x @ t[f"{base}.attn.wq"] + t[f"{base}.attn.bq"]
            k = x @ t[f"{base}.attn.wk"] + t[f"{base}.attn.bk"]
            v = x @ t[f"{base}.attn.wv"] + t[f"{base}.attn.bv"]
            q = q.reshape(n, self.heads, hd).transpose(1, 0, 2)
            k = k.reshape(n, self.heads, hd).transpose(1, 0, 2)
            v = v.reshape(n, self.heads, hd).transpose(1, 0, 2)
            scores = (q @ k.transpose(0, 2, 1)) * scale + bias[None, :, :]
            att = softmax(scores, axis=-1) @ v
            att = att.transpose(1, 0, 2).reshape(n, self.hidden)
            att = att @ t[f"{base}.attn.wo"] + t[f"{base}.attn.bo"]
            x = layer_norm(x + att, t[f"{base}.ln1.g"], t[f"{base}.ln1.b"])
            ff = gelu(x @ t[f"{base}.ffn.w1"] + t[f"{base}.ffn.b1"])
            ff = ff @ t[f"{base}.ffn.w2"] + t[f"{base}.ffn.b2"]
            x = layer_norm(x + ff, t[f"{base}.ln2.g"], t[f"{base}.ln2.b"])

        return x @ self.t["head.w"] + self.t["head.b"]

    def classify(self, tokens):
        """Argmax labels with softmax confidence per position."""
        probs = softmax(self.forward(tokens), axis=-1)
        picks = probs.argmax(axis=-1)
        labels = [LABELS[p] for p in picks]
        confs = [float(probs[i, p]) for i, p in enumerate(picks)]
        return labels, confs
