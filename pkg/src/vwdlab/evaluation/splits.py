"""Patient-level split plans and training-side class rebalancing."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ..cohort import Label
from ..errors import ConfigInvalid, EmptySide, SingleClass, UnbalancedCohort


class SplitScheme(str, Enum):
    KFOLD = "kfold"
    RANDOM_KFOLD = "random_kfold"
    HOLDOUT = "holdout"
    BOOTSTRAP = "bootstrap"


@dataclass(frozen=True)
class Assignment:
    """One train/test partition. ``train`` may repeat ids (bootstrap draws)."""

    train: tuple[str, ...]
    test: tuple[str, ...]

    def to_dict(self) -> dict:
        return {"train": list(self.train), "test": list(self.test)}


@dataclass(frozen=True)
class SplitPlan:
    scheme: SplitScheme
    assignments: tuple[tuple[Assignment, ...], ...]  # [trial][fold]
    params: dict = field(default_factory=dict)
    seed: int = 0

    @property
    def n_trials(self) -> int:
        return len(self.assignments)

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme.value,
            "params": dict(self.params),
            "seed": self.seed,
            "assignments": [[a.to_dict() for a in trial] for trial in self.assignments],
        }


def _by_class(patients) -> dict[Label, list[str]]:
    """Sorted patient ids per class from a mapping or ``(id, label)`` pairs."""
    items = patients.items() if isinstance(patients, dict) else patients
    out: dict[Label, list[str]] = {Label.ARDS: [], Label.NON_ARDS: []}
    for pid, label in items:
        lab = label if isinstance(label, Label) else (Label.from_y(label) if isinstance(label, (int, np.integer)) else Label(label))
        out[lab].append(str(pid))
    for ids in out.values():
        ids.sort()
    return out


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def stratified_kfold(patients, k: int, seed) -> tuple[Assignment, ...]:
    """``k`` folds whose test sets hold the same number of patients of each class."""
    if k < 2:
        raise ConfigInvalid("k must be >= 2")
    groups = _by_class(patients)
    for label, ids in groups.items():
        if len(ids) % k:
            raise UnbalancedCohort(f"{len(ids)} {label.value} patients cannot be split evenly into {k} folds")
    rng = _rng(seed)
    chunks = {}
    for label in (Label.ARDS, Label.NON_ARDS):
        ids = groups[label]
        perm = [ids[i] for i in rng.permutation(len(ids))]
        size = len(ids) // k
        chunks[label] = [perm[f * size : (f + 1) * size] for f in range(k)]
    every = sorted(groups[Label.ARDS] + groups[Label.NON_ARDS])
    folds = []
    for f in range(k):
        test = sorted(chunks[Label.ARDS][f] + chunks[Label.NON_ARDS][f])
        held = set(test)
        folds.append(Assignment(tuple(p for p in every if p not in held), tuple(test)))
    return tuple(folds)


def holdout_split(patients, train_fraction: float, seed) -> Assignment:
    """Class-stratified random split with ``round(fraction * n_class)`` training patients per class."""
    if not 0 < train_fraction < 1:
        raise ConfigInvalid("train_fraction must lie strictly between 0 and 1")
    rng = _rng(seed)
    train, test = [], []
    for label, ids in _by_class(patients).items():
        n_train = int(round(train_fraction * len(ids)))
        if n_train == 0 or n_train == len(ids):
            raise EmptySide(f"{label.value}: {len(ids)} patients leave an empty side at fraction {train_fraction}")
        perm = [ids[i] for i in rng.permutation(len(ids))]
        train += perm[:n_train]
        test += perm[n_train:]
    return Assignment(tuple(sorted(train)), tuple(sorted(test)))


def bootstrap_split(patients, train_fraction: float, seed) -> Assignment:
    """Per class, draw ``floor(fraction * n)`` patients with replacement; test = never drawn."""
    if not 0 < train_fraction < 1:
        raise ConfigInvalid("train_fraction must lie strictly between 0 and 1")
    rng = _rng(seed)
    train, test = [], []
    for label, ids in _by_class(patients).items():
        n_draw = math.floor(train_fraction * len(ids))
        if n_draw == 0:
            raise EmptySide(f"{label.value}: no training draws from {len(ids)} patients")
        drawn = rng.integers(0, len(ids), size=n_draw)
        left = sorted(set(range(len(ids))) - set(drawn.tolist()))
        if not left:
            raise EmptySide(f"{label.value}: every patient was drawn, test side empty")
        train += [ids[i] for i in drawn]
        test += [ids[i] for i in left]
    return Assignment(tuple(train), tuple(sorted(test)))


def make_split_plan(
    patients,
    scheme: SplitScheme | str = SplitScheme.KFOLD,
    trials: int = 10,
    k: int = 5,
    train_fraction: float | None = None,
    seed: int = 0,
) -> SplitPlan:
    """Assignments for every trial.

    KFold keeps one fold assignment for all trials (trials differ by model seed);
    RandomKFold redraws the stratified folds each trial; Holdout and Bootstrap redraw
    their single split each trial.
    """
    scheme = SplitScheme(scheme)
    if trials < 1:
        raise ConfigInvalid("trials must be >= 1")
    per_trial = []
    if scheme is SplitScheme.KFOLD:
        folds = stratified_kfold(patients, k, [seed, 0])
        per_trial = [folds] * trials
        params = {"k": k}
    elif scheme is SplitScheme.RANDOM_KFOLD:
        per_trial = [stratified_kfold(patients, k, [seed, t]) for t in range(trials)]
        params = {"k": k}
    elif scheme is SplitScheme.HOLDOUT:
        frac = 0.7 if train_fraction is None else train_fraction
        per_trial = [(holdout_split(patients, frac, [seed, t]),) for t in range(trials)]
        params = {"train_fraction": frac}
    else:
        frac = 0.8 if train_fraction is None else train_fraction
        per_trial = [(bootstrap_split(patients, frac, [seed, t]),) for t in range(trials)]
        params = {"train_fraction": frac}
    return SplitPlan(scheme, tuple(per_trial), params, seed)


def oversample_indices(y, rng) -> np.ndarray:
    """Indices keeping every row once plus random minority duplicates up to class parity."""
    y = np.asarray(y, dtype=np.int64)
    classes, counts = np.unique(y, return_counts=True)
    if classes.size < 2:
        raise SingleClass("oversampling needs both classes present")
    rng = rng if isinstance(rng, np.random.Generator) else _rng(rng)
    base = np.arange(y.size)
    if counts[0] == counts[1]:
        return base
    minority = classes[np.argmin(counts)]
    pool = np.flatnonzero(y == minority)
    extra = rng.choice(pool, size=int(abs(counts[1] - counts[0])), replace=True)
    return np.concatenate([base, extra])


def oversample_instances(instances, seed) -> list:
    """Balance a list of objects carrying a ``label`` attribute by duplicating the minority."""
    y = np.array([inst.label.y for inst in instances], dtype=np.int64)
    return [instances[i] for i in oversample_indices(y, seed)]
