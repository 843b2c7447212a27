"""Dynamic masking for the denoising pretrain objective.

A fresh plan is drawn every time a window is visited, so the same
window sees different corruption across epochs.  A quarter of the real
(non-pad) positions are selected; half of those are overwritten with
the mask token and half with a random byte token, while the model is
scored on recovering the originals at every selected position.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .protocol import MASK, PAD, RESERVED, VOCAB_SIZE

SELECT_FRACTION = 0.25


@dataclass(frozen=True)
class MaskingPlan:
    """Positions chosen for corruption in one window visit."""

    selected: tuple[int, ...]
    mask_subset: frozenset[int]
    random_subset: frozenset[int]

    def __post_init__(self) -> None:
        sel = set(self.selected)
        if self.mask_subset | self.random_subset != sel or self.mask_subset & self.random_subset:
            raise ValueError("mask and random subsets must partition selected")


def draw_plan(rng: np.random.Generator, tokens: np.ndarray) -> MaskingPlan:
    real = np.flatnonzero(tokens != PAD)
    k = int(round(SELECT_FRACTION * real.size))
    picked = rng.choice(real, size=k, replace=False) if k else np.empty(0, dtype=np.int64)
    picked = np.sort(picked)
    order = rng.permutation(k)
    half = k // 2 + (int(rng.integers(2)) if k % 2 else 0)
    mask_part = frozenset(int(picked[i]) for i in order[:half])
    rand_part = frozenset(int(picked[i]) for i in order[half:])
    return MaskingPlan(tuple(int(p) for p in picked), mask_part, rand_part)


def apply_plan(rng: np.random.Generator, tokens: np.ndarray, plan: MaskingPlan) -> tuple[np.ndarray, np.ndarray]:
    """Corrupt a window under a plan.

    Returns (corrupted tokens, targets) where targets holds the original
    token at selected positions and -1 elsewhere.
    """
    corrupted = tokens.copy()
    targets = np.full(tokens.shape, -1, dtype=np.int64)
    for pos in plan.selected:
        targets[pos] = tokens[pos]
    for pos in plan.mask_subset:
        corrupted[pos] = MASK
    for pos in plan.random_subset:
        corrupted[pos] = int(rng.integers(RESERVED, VOCAB_SIZE))
    return corrupted, targets
