"""Subject-disjoint dataset splitting."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .errors import SplitError
from .metrics import SKIN_TONES
from .synth import Session


@dataclass(frozen=True)
class Folds:
    train: List[Session]
    val: List[Session]
    test: List[Session]

    def tone_counts(self) -> Dict[str, Dict[str, int]]:
        """Per-fold subject counts by skin tone."""
        out = {}
        for name, fold in (("train", self.train), ("val", self.val), ("test", self.test)):
            subjects = {}
            for s in fold:
                subjects[s.subject_id] = s.skin_tone
            counts = {tone: 0 for tone in SKIN_TONES}
            for tone in subjects.values():
                counts[tone] += 1
            out[name] = counts
        return out


def _fold_sizes(n_subjects: int, fractions: Tuple[float, float, float]) -> Tuple[int, int, int]:
    n_train = max(1, int(np.floor(n_subjects * fractions[0])))
    n_val = max(1, int(np.floor(n_subjects * fractions[1])))
    n_test = n_subjects - n_train - n_val
    if n_test < 1:
        n_train -= 1 - n_test
        n_test = 1
    if min(n_train, n_val, n_test) < 1:
        raise SplitError(f"cannot build three non-empty subject folds from {n_subjects} subjects")
    return n_train, n_val, n_test


def split_dataset(sessions: Sequence[Session], scheme: str = "random", seed: int = 0,
                  fractions: Tuple[float, float, float] = (0.8, 0.1, 0.1)) -> Folds:
    """Split sessions into subject-disjoint train/val/test folds.

    ``random`` shuffles subjects with the given seed; ``stratified`` allocates
    subjects tone by tone so each fold's skin-tone mix stays within one
    subject of the global proportions. Deterministic for a fixed seed.
    """
    if len(sessions) < 3:
        raise SplitError(f"need at least 3 sessions to split, got {len(sessions)}")
    if scheme not in ("random", "stratified"):
        raise SplitError(f"unknown split scheme {scheme!r}")
    by_subject: Dict[str, List[Session]] = {}
    for s in sessions:
        by_subject.setdefault(s.subject_id, []).append(s)
    subjects = sorted(by_subject)
    if len(subjects) < 3:
        raise SplitError(f"need at least 3 subjects for disjoint folds, got {len(subjects)}")
    n_train, n_val, n_test = _fold_sizes(len(subjects), fractions)
    rng = np.random.default_rng(seed)

    assignment: Dict[str, str] = {}
    if scheme == "random":
        order = [subjects[i] for i in rng.permutation(len(subjects))]
        for i, subj in enumerate(order):
            assignment[subj] = ("train" if i < n_train
                                else "val" if i < n_train + n_val else "test")
    else:
        # Fill folds in proportion-deficit order, one subject at a time per tone.
        quota = {"train": n_train, "val": n_val, "test": n_test}
        filled = {"train": 0, "val": 0, "test": 0}
        for tone in SKIN_TONES:
            tone_subjects = [s for s in subjects if by_subject[s][0].skin_tone == tone]
            tone_subjects = [tone_subjects[i] for i in rng.permutation(len(tone_subjects))]
            for subj in tone_subjects:
                fold = min(quota, key=lambda f: (filled[f] / quota[f], f))
                assignment[subj] = fold
                filled[fold] += 1

    folds = {"train": [], "val": [], "test": []}
    for subj in subjects:
        folds[assignment[subj]].extend(by_subject[subj])
    return Folds(train=folds["train"], val=folds["val"], test=folds["test"])
