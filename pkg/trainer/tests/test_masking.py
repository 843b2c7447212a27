import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smvtrain import MaskingPlan, apply_plan, draw_plan
from smvtrain.protocol import MASK, PAD, RESERVED, VOCAB_SIZE


def window(n_real: int, seq: int = 64) -> np.ndarray:
    tokens = np.zeros(seq, dtype=np.int64)
    tokens[:n_real] = np.arange(n_real) % 256 + RESERVED
    return tokens


def test_selected_count_is_quarter_of_real():
    rng = np.random.default_rng(0)
    for n in (1, 2, 3, 7, 40, 64):
        plan = draw_plan(rng, window(n))
        assert len(plan.selected) == round(0.25 * n)


def test_selected_positions_are_real_and_sorted():
    rng = np.random.default_rng(1)
    tokens = window(40)
    plan = draw_plan(rng, tokens)
    assert list(plan.selected) == sorted(set(plan.selected))
    assert all(tokens[p] != PAD for p in plan.selected)


def test_subsets_partition_selected():
    rng = np.random.default_rng(2)
    plan = draw_plan(rng, window(41))
    assert plan.mask_subset | plan.random_subset == set(plan.selected)
    assert not plan.mask_subset & plan.random_subset


def test_partition_validated_on_construction():
    with pytest.raises(ValueError):
        MaskingPlan((1, 2), frozenset({1}), frozenset({1, 2}))


def test_apply_plan_corruption_and_targets():
    rng = np.random.default_rng(3)
    tokens = window(48)
    plan = draw_plan(rng, tokens)
    corrupted, targets = apply_plan(rng, tokens, plan)
    for pos in range(len(tokens)):
        if pos in plan.mask_subset:
            assert corrupted[pos] == MASK
            assert targets[pos] == tokens[pos]
        elif pos in plan.random_subset:
            assert RESERVED <= corrupted[pos] < VOCAB_SIZE
            assert targets[pos] == tokens[pos]
        else:
            assert corrupted[pos] == tokens[pos]
            assert targets[pos] == -1


def test_plans_differ_across_epochs():
    # the same window sees fresh corruption every epoch
    rng = np.random.default_rng(4)
    tokens = window(40)
    picks = [draw_plan(rng, tokens).selected for _ in range(10)]
    assert len(set(picks)) > 1


def test_selection_statistics():
    # long-run behavior over many draws: a quarter selected, split evenly
    rng = np.random.default_rng(5)
    sel_fracs = []
    mask_count = rand_count = 0
    for i in range(1000):
        tokens = window(40 + i % 25)
        plan = draw_plan(rng, tokens)
        sel_fracs.append(len(plan.selected) / int((tokens != PAD).sum()))
        mask_count += len(plan.mask_subset)
        rand_count += len(plan.random_subset)
    assert abs(np.mean(sel_fracs) - 0.25) < 0.01
    split = mask_count / (mask_count + rand_count)
    assert abs(split - 0.5) < 0.02


@given(n_real=st.integers(0, 64), seed=st.integers(0, 2**31))
@settings(max_examples=60, deadline=None)
def test_plan_shape_invariants(n_real, seed):
    rng = np.random.default_rng(seed)
    tokens = window(n_real)
    plan = draw_plan(rng, tokens)
    assert len(plan.selected) == round(0.25 * n_real)
    assert set(plan.selected) <= set(np.flatnonzero(tokens != PAD).tolist())
    assert abs(len(plan.mask_subset) - len(plan.random_subset)) <= 1
