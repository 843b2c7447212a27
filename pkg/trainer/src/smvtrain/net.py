"""Trainable encoder: numpy forward, hand-written backward, Adam.

The forward pass mirrors the consumer's inference exactly (post-block
layer norm, tanh-approximated GELU, additive -1e9 bias on padded keys,
layer-norm epsilon 1e-5) so exported weights behave the same at scan
time.  Two output heads share the encoder: a vocabulary head for the
denoising pretrain stage and a 3-way boundary head for fine-tuning.

Everything runs on (batch, seq) token arrays.  The dtype is a
parameter so gradients can be verified in float64 against numerical
differences; training itself uses float32.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergedLoss
from .protocol import FFN, HEADS, HIDDEN, LABELS, MAX_SEQ, PAD, VOCAB_SIZE
from .protocol import LAYERS as LAYER_COUNT

LN_EPS = 1e-5
INIT_STD = 0.02


@dataclass(frozen=True)
class NetConfig:
    vocab: int = VOCAB_SIZE
    hidden: int = HIDDEN
    layers: int = LAYER_COUNT
    heads: int = HEADS
    ffn: int = FFN
    max_seq: int = MAX_SEQ

    def __post_init__(self) -> None:
        if self.hidden % self.heads:
            raise ValueError("hidden must divide evenly across heads")


def init_params(cfg: NetConfig, rng: np.random.Generator, dtype=np.float32) -> dict[str, np.ndarray]:
    """Seeded initialization; layer norms start as identity."""

    def w(*shape):
        return rng.normal(0.0, INIT_STD, size=shape).astype(dtype)

    def zeros(*shape):
        return np.zeros(shape, dtype=dtype)

    p = {
        "embed.tok": w(cfg.vocab, cfg.hidden),
        "embed.pos": w(cfg.max_seq, cfg.hidden),
        "head.w": w(cfg.hidden, len(LABELS)),
        "head.b": zeros(len(LABELS)),
        "mlm.w": w(cfg.hidden, cfg.vocab),
        "mlm.b": zeros(cfg.vocab),
    }
    for i in range(cfg.layers):
        base = f"layer{i}"
        for part in ("wq", "wk", "wv", "wo"):
            p[f"{base}.attn.{part}"] = w(cfg.hidden, cfg.hidden)
        for part in ("bq", "bk", "bv", "bo"):
            p[f"{base}.attn.{part}"] = zeros(cfg.hidden)
        for ln in ("ln1", "ln2"):
            p[f"{base}.{ln}.g"] = np.ones(cfg.hidden, dtype=dtype)
            p[f"{base}.{ln}.b"] = zeros(cfg.hidden)
        p[f"{base}.ffn.w1"] = w(cfg.hidden, cfg.ffn)
        p[f"{base}.ffn.b1"] = zeros(cfg.ffn)
        p[f"{base}.ffn.w2"] = w(cfg.ffn, cfg.hidden)
        p[f"{base}.ffn.b2"] = zeros(cfg.hidden)
    return p


def _gelu(x):
    """Tanh-approximated GELU; also returns the tanh for reuse in backward."""
    c = x.dtype.type(math.sqrt(2.0 / math.pi))
    a = x.dtype.type(0.044715)
    half = x.dtype.type(0.5)
    one = x.dtype.type(1.0)
    t = np.tanh(c * (x + a * x * x * x))
    return half * x * (one + t), t


def _gelu_grad(x, t):
    c = x.dtype.type(math.sqrt(2.0 / math.pi))
    a = x.dtype.type(0.044715)
    half = x.dtype.type(0.5)
    one = x.dtype.type(1.0)
    three = x.dtype.type(3.0)
    du = c * (one + three * a * x * x)
    return half * (one + t) + half * x * (one - t * t) * du


def _softmax(x):
    # consumes x in place; callers only pass disposable score buffers
    x -= x.max(axis=-1, keepdims=True)
    np.exp(x, out=x)
    x /= x.sum(axis=-1, keepdims=True)
    return x


def _ln_forward(x, g, b):
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + x.dtype.type(LN_EPS))
    xhat = (x - mean) * inv
    return xhat * g + b, (xhat, inv.astype(x.dtype))


def _ln_backward(dy, cache, g):
    xhat, inv = cache
    dxhat = dy * g
    dg = (dy * xhat).sum(axis=(0, 1))
    db = dy.sum(axis=(0, 1))
    m1 = dxhat.mean(axis=-1, keepdims=True)
    m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
    dx = (dxhat - m1 - xhat * m2) * inv
    return dx, dg, db


def _mm(a, b):
    # (B,T,X)@(X,Y) contractions flattened for BLAS
    return (a.reshape(-1, a.shape[-1]) @ b).reshape(*a.shape[:-1], b.shape[-1])


def _grad_w(x, dy):
    return x.reshape(-1, x.shape[-1]).T @ dy.reshape(-1, dy.shape[-1])


class Net:
    """Parameter bag plus forward/backward over batched windows."""

    def __init__(self, cfg: NetConfig, params: dict[str, np.ndarray]):
        self.cfg = cfg
        self.params = params
        self.dtype = params["embed.tok"].dtype

    @classmethod
    def create(cls, cfg: NetConfig, rng: np.random.Generator, dtype=np.float32) -> "Net":
        return cls(cfg, init_params(cfg, rng, dtype))

    def hidden_states(self, tokens: np.ndarray):
        """Encoder output (B, T, hidden) plus the cache backward needs."""
        cfg = self.cfg
        p = self.params
        toks = np.asarray(tokens, dtype=np.int64)
        if toks.ndim == 1:
            toks = toks[None, :]
        bsz, n = toks.shape
        if n > cfg.max_seq:
            raise ValueError(f"window of {n} exceeds max_seq {cfg.max_seq}")
        x = p["embed.tok"][toks] + p["embed.pos"][:n]
        bias = np.where(toks == PAD, self.dtype.type(-1e9), self.dtype.type(0.0))
        bias = bias[:, None, None, :]
        hd = cfg.hidden // cfg.heads
        scale = self.dtype.type(1.0 / math.sqrt(hd))
        layers = []
        for i in range(cfg.layers):
            base = f"layer{i}"
            x_in = x
            q = _mm(x, p[f"{base}.attn.wq"]) + p[f"{base}.attn.bq"]
            k = _mm(x, p[f"{base}.attn.wk"]) + p[f"{base}.attn.bk"]
            v = _mm(x, p[f"{base}.attn.wv"]) + p[f"{base}.attn.bv"]
            qh = q.reshape(bsz, n, cfg.heads, hd).transpose(0, 2, 1, 3)
            kh = k.reshape(bsz, n, cfg.heads, hd).transpose(0, 2, 1, 3)
            vh = v.reshape(bsz, n, cfg.heads, hd).transpose(0, 2, 1, 3)
            scores = qh @ kh.swapaxes(-1, -2) * scale + bias
            probs = _softmax(scores)
            ah = probs @ vh
            amerge = ah.transpose(0, 2, 1, 3).reshape(bsz, n, cfg.hidden)
            attn = _mm(amerge, p[f"{base}.attn.wo"]) + p[f"{base}.attn.bo"]
            y1 = x_in + attn
            x1, ln1c = _ln_forward(y1, p[f"{base}.ln1.g"], p[f"{base}.ln1.b"])
            z1 = _mm(x1, p[f"{base}.ffn.w1"]) + p[f"{base}.ffn.b1"]
            g1, t1 = _gelu(z1)
            f = _mm(g1, p[f"{base}.ffn.w2"]) + p[f"{base}.ffn.b2"]
            y2 = x1 + f
            x2, ln2c = _ln_forward(y2, p[f"{base}.ln2.g"], p[f"{base}.ln2.b"])
            layers.append(
                {
                    "x_in": x_in, "qh": qh, "kh": kh, "vh": vh, "probs": probs,
                    "amerge": amerge, "ln1c": ln1c, "x1": x1, "z1": z1,
                    "t1": t1, "g1": g1, "ln2c": ln2c,
                }
            )
            x = x2
        cache = {"tokens": toks, "layers": layers, "scale": scale, "n": n, "bsz": bsz}
        return x, cache

    def backward_hidden(self, dh: np.ndarray, cache) -> dict[str, np.ndarray]:
        """Gradients of every encoder parameter given d(loss)/d(hidden)."""
        cfg = self.cfg
        p = self.params
        grads: dict[str, np.ndarray] = {}
        bsz, n = cache["bsz"], cache["n"]
        hd = cfg.hidden // cfg.heads
        scale = cache["scale"]
        dx = dh
        for i in reversed(range(cfg.layers)):
            base = f"layer{i}"
            lc = cache["layers"][i]
            dy2, dg2, db2 = _ln_backward(dx, lc["ln2c"], p[f"{base}.ln2.g"])
            grads[f"{base}.ln2.g"] = dg2
            grads[f"{base}.ln2.b"] = db2
            df = dy2
            grads[f"{base}.ffn.w2"] = _grad_w(lc["g1"], df)
            grads[f"{base}.ffn.b2"] = df.sum(axis=(0, 1))
            dg1 = _mm(df, p[f"{base}.ffn.w2"].T)
            dz1 = dg1 * _gelu_grad(lc["z1"], lc["t1"])
            grads[f"{base}.ffn.w1"] = _grad_w(lc["x1"], dz1)
            grads[f"{base}.ffn.b1"] = dz1.sum(axis=(0, 1))
            dx1 = dy2 + _mm(dz1, p[f"{base}.ffn.w1"].T)
            dy1, dg1n, db1n = _ln_backward(dx1, lc["ln1c"], p[f"{base}.ln1.g"])
            grads[f"{base}.ln1.g"] = dg1n
            grads[f"{base}.ln1.b"] = db1n
            dattn = dy1
            grads[f"{base}.attn.wo"] = _grad_w(lc["amerge"], dattn)
            grads[f"{base}.attn.bo"] = dattn.sum(axis=(0, 1))
            damerge = _mm(dattn, p[f"{base}.attn.wo"].T)
            dah = damerge.reshape(bsz, n, cfg.heads, hd).transpose(0, 2, 1, 3)
            probs, vh, qh, kh = lc["probs"], lc["vh"], lc["qh"], lc["kh"]
            dvh = probs.swapaxes(-1, -2) @ dah
            dprobs = dah @ vh.swapaxes(-1, -2)
            dscores = probs * (dprobs - (dprobs * probs).sum(axis=-1, keepdims=True))
            dqh = dscores @ kh * scale
            dkh = dscores.swapaxes(-1, -2) @ qh * scale
            dq = dqh.transpose(0, 2, 1, 3).reshape(bsz, n, cfg.hidden)
            dk = dkh.transpose(0, 2, 1, 3).reshape(bsz, n, cfg.hidden)
            dv = dvh.transpose(0, 2, 1, 3).reshape(bsz, n, cfg.hidden)
            x_in = lc["x_in"]
            grads[f"{base}.attn.wq"] = _grad_w(x_in, dq)
            grads[f"{base}.attn.bq"] = dq.sum(axis=(0, 1))
            grads[f"{base}.attn.wk"] = _grad_w(x_in, dk)
            grads[f"{base}.attn.bk"] = dk.sum(axis=(0, 1))
            grads[f"{base}.attn.wv"] = _grad_w(x_in, dv)
            grads[f"{base}.attn.bv"] = dv.sum(axis=(0, 1))
            dx = (
                dy1
                + _mm(dq, p[f"{base}.attn.wq"].T)
                + _mm(dk, p[f"{base}.attn.wk"].T)
                + _mm(dv, p[f"{base}.attn.wv"].T)
            )
        toks = cache["tokens"]
        dtok = np.zeros_like(p["embed.tok"])
        np.add.at(dtok, toks.reshape(-1), dx.reshape(-1, cfg.hidden))
        dpos = np.zeros_like(p["embed.pos"])
        dpos[:n] = dx.sum(axis=0)
        grads["embed.tok"] = dtok
        grads["embed.pos"] = dpos
        return grads

    def head_loss(self, h, wname, bname, targets, class_weights=None):
        """Cross-entropy over positions where targets >= 0.

        Returns loss, d(loss)/d(hidden), head gradients, and the
        (correct, counted) tally for accuracy tracking.  Rows of the
        hidden gradient at uncounted positions are exactly zero; only
        scored positions feed the encoder backward pass.
        """
        p = self.params
        logits = _mm(h, p[wname]) + p[bname]
        probs = _softmax(logits)
        counted = targets >= 0
        total = int(counted.sum())
        if total == 0:
            zero = {wname: np.zeros_like(p[wname]), bname: np.zeros_like(p[bname])}
            return 0.0, np.zeros_like(h), zero, (0, 0)
        safe = np.where(counted, targets, 0)
        picked = np.take_along_axis(probs, safe[..., None], axis=-1)[..., 0]
        logp = np.log(np.maximum(picked, np.finfo(self.dtype).tiny))
        if class_weights is None:
            wpos = counted.astype(self.dtype)
        else:
            wpos = np.where(counted, np.asarray(class_weights, dtype=self.dtype)[safe], 0)
        norm = wpos.sum()
        loss = float(-(logp * wpos).sum() / norm)
        onehot = np.zeros_like(probs)
        np.put_along_axis(onehot, safe[..., None], 1.0, axis=-1)
        dlogits = (probs - onehot) * wpos[..., None] / norm
        dlogits = np.where(counted[..., None], dlogits, 0).astype(self.dtype)
        dh = _mm(dlogits, p[wname].T)
        hw = _grad_w(h, dlogits)
        hb = dlogits.sum(axis=(0, 1))
        correct = int(((probs.argmax(axis=-1) == targets) & counted).sum())
        return loss, dh, {wname: hw, bname: hb}, (correct, total)

    def loss_mlm(self, tokens, targets):
        """Denoising loss at selected positions only."""
        h, cache = self.hidden_states(tokens)
        loss, dh, head_grads, tally = self.head_loss(h, "mlm.w", "mlm.b", np.atleast_2d(targets))
        grads = self.backward_hidden(dh, cache)
        grads.update(head_grads)
        return loss, grads, tally

    def loss_cls(self, tokens, labels, class_weights=None):
        """Boundary-label loss at non-pad positions."""
        h, cache = self.hidden_states(tokens)
        loss, dh, head_grads, tally = self.head_loss(
            h, "head.w", "head.b", np.atleast_2d(labels), class_weights
        )
        grads = self.backward_hidden(dh, cache)
        grads.update(head_grads)
        return loss, grads, tally

    def predict(self, tokens) -> np.ndarray:
        """Argmax boundary labels, shape (B, T)."""
        h, _ = self.hidden_states(tokens)
        logits = _mm(h, self.params["head.w"]) + self.params["head.b"]
        return logits.argmax(axis=-1)

    def predict_probs(self, tokens) -> np.ndarray:
        """Boundary label probabilities, shape (B, T, 3)."""
        h, _ = self.hidden_states(tokens)
        logits = _mm(h, self.params["head.w"]) + self.params["head.b"]
        return _softmax(logits)

    def predict_mlm(self, tokens) -> np.ndarray:
        h, _ = self.hidden_states(tokens)
        logits = _mm(h, self.params["mlm.w"]) + self.params["mlm.b"]
        return logits.argmax(axis=-1)


@dataclass
class Adam:
    """Adam with the usual bias correction."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.98
    eps: float = 1e-8
    step_count: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.step_count += 1
        b1 = self.beta1
        b2 = self.beta2
        c1 = 1.0 - b1**self.step_count
        c2 = 1.0 - b2**self.step_count
        for name, g in grads.items():
            if not np.all(np.isfinite(g)):
                raise DivergedLoss(f"non-finite gradient in {name}")
            m = self.m.get(name)
            if m is None:
                m = self.m[name] = np.zeros_like(g)
            vv = self.v.get(name)
            if vv is None:
                vv = self.v[name] = np.zeros_like(g)
            m += (1.0 - b1) * (g - m)
            vv += (1.0 - b2) * (g * g - vv)
            update = (self.lr * (m / c1) / (np.sqrt(vv / c2) + self.eps)).astype(params[name].dtype)
            params[name] -= update
