"""Cross-validation fold plans: disjoint test blocks plus a validation carve-out."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import CohortTooSmall


@dataclass(frozen=True)
class Fold:
    train: tuple
    val: tuple
    test: tuple


@dataclass(frozen=True)
class FoldPlan:
    folds: tuple
    seed: int

    def __len__(self):
        return len(self.folds)

    def __iter__(self):
        return iter(self.folds)

    def __getitem__(self, i):
        return self.folds[i]

    def sizes(self):
        return [(len(f.train), len(f.val), len(f.test)) for f in self.folds]

    def to_dict(self):
        return {
            "seed": self.seed,
            "folds": [{"train": list(f.train), "val": list(f.val), "test": list(f.test)} for f in self.folds],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(Fold(tuple(f["train"]), tuple(f["val"]), tuple(f["test"])) for f in d["folds"]), d["seed"])


def make_folds(case_ids, seed=0, k=5, val_fraction=0.1) -> FoldPlan:
    """Seeded shuffle into ``k`` test blocks; the rest of each fold is split train/validation.

    The validation count is ``max(1, floor(val_fraction * n))`` (10 of 105),
    drawn from a further seeded shuffle of the non-test cases.
    """
    ids = list(case_ids)
    n = len(ids)
    if len(set(ids)) != n:
        raise ValueError("case ids must be unique")
    if n < 10 or n < 2 * k:
        raise CohortTooSmall(f"{n} cases is too few for {k}-fold cross-validation")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    blocks = np.array_split(perm, k)
    n_val = max(1, int(np.floor(val_fraction * n)))
    folds = []
    for b in blocks:
        test = set(b.tolist())
        rest = np.array([i for i in perm if i not in test])
        rest = rest[rng.permutation(rest.size)]
        folds.append(Fold(
            train=tuple(ids[i] for i in rest[n_val:]),
            val=tuple(ids[i] for i in rest[:n_val]),
            test=tuple(ids[i] for i in b),
        ))
    return FoldPlan(tuple(folds), seed)


def check_no_leakage(fold: Fold, **training_side):
    """Raise if any test id appears in the fold's training-side id collections."""
    test = set(fold.test)
    sides = {"train": fold.train, "val": fold.val, **training_side}
    for name, ids in sides.items():
        overlap = test & set(ids)
        if overlap:
            raise AssertionError(f"test cases leaked into {name}: {sorted(overlap)[:5]}")
    if set(fold.train) & set(fold.val):
        raise AssertionError("train and validation sets overlap")
