"""Incremental training over permutations of splits A-D.

A permutation fixes the order in which split train halves are fed to the
model. After every phase the model is scored on the cumulative member set
(training accuracy), on the paradigm's test set, and by a membership
inference attack against held-out examples.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np

from . import attack
from .data import SPLIT_NAMES, Dataset, SplitSet
from .errors import ConfigurationError, DriftBenchError, PhaseError
from .model import ModelState, accuracy, param_digest
from .seeding import derive_seed

PARADIGMS = ("uniform", "additive")
NUM_PHASES = len(SPLIT_NAMES)

Trainer = Callable[[ModelState, List[int]], ModelState]


@dataclass(frozen=True)
class PhasePlan:
    permutation: Tuple[str, ...]
    paradigm: str = "uniform"

    def __post_init__(self):
        object.__setattr__(self, "permutation", tuple(self.permutation))
        if sorted(self.permutation) != list(SPLIT_NAMES):
            raise ConfigurationError(f"{self.permutation} is not a permutation of {SPLIT_NAMES}")
        if self.paradigm not in PARADIGMS:
            raise ConfigurationError(f"unknown paradigm {self.paradigm!r}")

    @property
    def label(self) -> str:
        return "".join(self.permutation)


@dataclass(frozen=True)
class PhaseMetrics:
    phase_index: int
    train_accuracy: float
    test_accuracy: float
    mia_auc: float
    member_count: int
    nonmember_count: int
    param_digest: str = ""


def enumerate_permutations(count: int = 8, seed: int = 0) -> List[Tuple[str, ...]]:
    """``count`` distinct orderings of A-D, sampled without replacement from all 24."""
    everything = list(itertools.permutations(SPLIT_NAMES))
    if not 1 <= count <= len(everything):
        raise ConfigurationError(f"permutation count must lie in [1, {len(everything)}], got {count}")
    picks = np.random.default_rng(seed).choice(len(everything), size=count, replace=False)
    return [everything[i] for i in picks]


def _check_phase(phase_index):
    if not 0 <= phase_index < NUM_PHASES:
        raise ConfigurationError(f"phase_index must lie in [0, {NUM_PHASES}), got {phase_index}")


def test_set_for_phase(splitset: SplitSet, plan: PhasePlan, phase_index: int) -> List[int]:
    _check_phase(phase_index)
    names = SPLIT_NAMES if plan.paradigm == "uniform" else plan.permutation[:phase_index + 1]
    return sorted(i for s in names for i in splitset.test(s))


# pytest would otherwise try to collect the function above
test_set_for_phase.__test__ = False


def member_set_for_phase(splitset: SplitSet, plan: PhasePlan, phase_index: int) -> List[int]:
    _check_phase(phase_index)
    return sorted(i for s in plan.permutation[:phase_index + 1] for i in splitset.train(s))


def nonmember_pool(splitset: SplitSet) -> List[int]:
    """Test halves of every split; never trained on in any phase."""
    return sorted(i for s in SPLIT_NAMES for i in splitset.test(s))


def evaluate_phase(model, dataset: Dataset, splitset: SplitSet, plan: PhasePlan, phase_index: int,
                   per_side_cap: int, attack_seed: int, matching: str = "class",
                   nonmembers: str = "all_test") -> PhaseMetrics:
    """Train accuracy on the cumulative members, test accuracy, and MIA AUC after one phase.

    ``nonmembers="all_test"`` draws non-members from every split's test half;
    ``"phase_test"`` restricts them to the paradigm's test set for this phase.
    """
    members = member_set_for_phase(splitset, plan, phase_index)
    test_ids = test_set_for_phase(splitset, plan, phase_index)
    if nonmembers == "all_test":
        pool = nonmember_pool(splitset)
    elif nonmembers == "phase_test":
        pool = test_ids
    else:
        raise ConfigurationError(f"unknown non-member pool {nonmembers!r}")
    if matching == "class":
        records = attack.build_matched_records(model, dataset, members, pool, per_side_cap, attack_seed)
    elif matching == "none":
        per_side = min(len(members), len(pool), per_side_cap)
        records = attack.build_eval_records(model, dataset, members, pool, per_side, attack_seed)
    else:
        raise ConfigurationError(f"unknown attack matching {matching!r}")
    auc = attack.roc_auc(records)
    return PhaseMetrics(
        phase_index=phase_index,
        train_accuracy=accuracy(model, dataset.subset(members)),
        test_accuracy=accuracy(model, dataset.subset(test_ids)),
        mia_auc=auc.auc,
        member_count=auc.num_members,
        nonmember_count=auc.num_nonmembers,
        param_digest=param_digest(model),
    )


def run_incremental(initial_model: ModelState, dataset: Dataset, splitset: SplitSet, plan: PhasePlan,
                    trainer: Trainer, per_side_cap: int = 1000, attack_seed: int = 0,
                    on_phase=None, matching: str = "class",
                    nonmembers: str = "all_test") -> List[PhaseMetrics]:
    """Train through the four phases of ``plan``, carrying the model forward.

    ``trainer(model, train_ids)`` receives the current split's train ids.
    ``on_phase(phase_index, model_before, model_after)``, if given, is called
    after each phase; the acceptance suite uses it to check model continuity.
    Errors from the trainer or evaluation are re-raised as :class:`PhaseError`.
    """
    model = initial_model
    out = []
    for k, name in enumerate(plan.permutation):
        try:
            trained = trainer(model, list(splitset.train(name)))
            metrics = evaluate_phase(trained, dataset, splitset, plan, k, per_side_cap,
                                     derive_seed(attack_seed, k), matching, nonmembers)
        except DriftBenchError as exc:
            raise PhaseError(plan.permutation, k, exc) from exc
        if on_phase is not None:
            on_phase(k, model, trained)
        model = trained
        out.append(metrics)
    return out


def identity_trainer(model, train_ids):
    return model
