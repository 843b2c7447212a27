import numpy as np
import pytest

from smvtrain import Adam, Net
from smvtrain.errors import DivergedLoss

from conftest import tiny_batch, tiny_config


def grad_check(kind: str, seed: int = 7, tol_abs: float = 1e-7, tol_rel: float = 2e-4):
    """Analytic vs central-difference gradients in float64."""
    cfg = tiny_config()
    rng = np.random.default_rng(seed)
    net = Net.create(cfg, rng, dtype=np.float64)
    tokens = tiny_batch(rng, bsz=2, seq=9, vocab=cfg.vocab)

    if kind == "mlm":
        targets = np.full(tokens.shape, -1)
        real = np.argwhere(tokens != 0)
        for r, c in real[::3]:
            targets[r, c] = tokens[r, c]
        compute = lambda: net.loss_mlm(tokens, targets)
    else:
        labels = np.where(tokens != 0, 2, -1)
        labels[0, 0] = 0
        labels[0, 4] = 1
        labels[1, 2] = 0
        weights = np.array([5.0, 5.0, 0.5])
        compute = lambda: net.loss_cls(tokens, labels, weights)

    _, grads, _ = compute()
    eps = 1e-6
    check_rng = np.random.default_rng(seed + 1)
    for name, grad in grads.items():
        flat_p = net.params[name].reshape(-1)
        flat_g = grad.reshape(-1)
        picks = check_rng.choice(flat_p.size, size=min(5, flat_p.size), replace=False)
        for ix in picks:
            keep = flat_p[ix]
            flat_p[ix] = keep + eps
            up = compute()[0]
            flat_p[ix] = keep - eps
            down = compute()[0]
            flat_p[ix] = keep
            numeric = (up - down) / (2 * eps)
            err = abs(numeric - flat_g[ix])
            assert err <= tol_abs + tol_rel * (abs(numeric) + abs(flat_g[ix])), (
                f"{name}[{ix}]: numeric {numeric} analytic {flat_g[ix]}"
            )


def test_gradients_match_numeric_mlm():
    grad_check("mlm")


def test_gradients_match_numeric_cls():
    grad_check("cls")


def test_hidden_gradient_zero_at_unscored_positions():
    cfg = tiny_config()
    rng = np.random.default_rng(3)
    net = Net.create(cfg, rng, dtype=np.float64)
    tokens = tiny_batch(rng, bsz=2, seq=10, vocab=cfg.vocab)
    targets = np.full(tokens.shape, -1)
    targets[0, 1] = tokens[0, 1]
    targets[1, 3] = tokens[1, 3]
    h, _ = net.hidden_states(tokens)
    _, dh, _, _ = net.head_loss(h, "mlm.w", "mlm.b", targets)
    scored = targets >= 0
    assert np.all(dh[~scored] == 0.0)
    assert np.any(dh[scored] != 0.0)


def test_no_scored_positions_yields_all_zero_gradients():
    cfg = tiny_config()
    rng = np.random.default_rng(4)
    net = Net.create(cfg, rng)
    tokens = tiny_batch(rng, vocab=cfg.vocab)
    targets = np.full(tokens.shape, -1)
    loss, grads, tally = net.loss_mlm(tokens, targets)
    assert loss == 0.0
    assert tally == (0, 0)
    assert all(np.all(g == 0.0) for g in grads.values())


def test_adam_ignores_zero_gradients():
    cfg = tiny_config()
    rng = np.random.default_rng(5)
    net = Net.create(cfg, rng)
    before = {k: v.copy() for k, v in net.params.items()}
    adam = Adam(lr=0.1)
    adam.step(net.params, {k: np.zeros_like(v) for k, v in net.params.items()})
    assert all(np.array_equal(before[k], net.params[k]) for k in before)


def test_adam_rejects_nonfinite_gradients():
    cfg = tiny_config()
    rng = np.random.default_rng(6)
    net = Net.create(cfg, rng)
    grads = {"embed.tok": np.full_like(net.params["embed.tok"], np.nan)}
    with pytest.raises(DivergedLoss):
        Adam(lr=0.1).step(net.params, grads)


def test_pad_positions_never_attended():
    # a padded tail must not change real positions' hidden states
    cfg = tiny_config(max_seq=16)
    rng = np.random.default_rng(7)
    net = Net.create(cfg, rng)
    short = tiny_batch(rng, bsz=1, seq=8, vocab=cfg.vocab, pad_tail=0)
    padded = np.zeros((1, 16), dtype=np.int64)
    padded[0, :8] = short[0]
    h_short, _ = net.hidden_states(short)
    h_padded, _ = net.hidden_states(padded)
    np.testing.assert_allclose(h_padded[0, :8], h_short[0], rtol=1e-5, atol=1e-6)


def test_window_longer_than_max_seq_rejected():
    cfg = tiny_config(max_seq=8)
    net = Net.create(cfg, np.random.default_rng(8))
    with pytest.raises(ValueError):
        net.hidden_states(np.ones((1, 9), dtype=np.int64))


def test_class_weights_change_the_loss():
    cfg = tiny_config()
    rng = np.random.default_rng(9)
    net = Net.create(cfg, rng)
    tokens = tiny_batch(rng, vocab=cfg.vocab)
    labels = np.where(tokens != 0, 2, -1)
    labels[0, 0] = 0
    plain, _, _ = net.loss_cls(tokens, labels)
    skewed, _, _ = net.loss_cls(tokens, labels, np.array([50.0, 1.0, 0.1]))
    assert plain != skewed
