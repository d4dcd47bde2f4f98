"""Domain types and the sequential query loop for active learning with abstention.

A labeler is queried one example at a time from a fixed pool under a fixed
budget. For every query the labeler either returns the example's label (an
integer in ``1..num_labels``) or abstains (the reserved feedback value 0).
Abstentions consume budget like any other query, and the labeler's decision
per example is persistent, so a queried example is removed from the candidate
set whether or not it was labeled.

Beliefs are immutable: updates return new values, which keeps runs trivially
replayable and lets independent runs share a prior safely.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

ABSTAIN = 0


class AbstainALError(Exception):
    """Base class for errors raised by this package."""


class BudgetExceedsPoolError(AbstainALError):
    """Budget is larger than the number of distinct candidates."""


class EmptyCandidatesError(AbstainALError):
    """A policy was asked to select from an empty candidate set."""


@dataclass(frozen=True)
class LabelSpace:
    """The labels are the integers ``1..num_labels``; 0 is reserved for abstention."""

    num_labels: int

    def __post_init__(self):
        if self.num_labels < 2:
            raise ValueError(f"need at least 2 labels, got {self.num_labels}")

    @property
    def labels(self) -> range:
        return range(1, self.num_labels + 1)

    def is_valid_label(self, y: int) -> bool:
        return 1 <= y <= self.num_labels

    def is_valid_feedback(self, value: int) -> bool:
        return 0 <= value <= self.num_labels


@dataclass(frozen=True)
class Example:
    """A pool example with sparse features.

    ``features`` is a tuple of ``(feature_index, value)`` pairs with strictly
    increasing non-negative indices. Redundant examples carry no target label
    (``true_label is None``); they exist so a labeler can refuse them.
    """

    index: int
    features: tuple[tuple[int, float], ...]
    true_label: int | None = None
    redundant: bool = False

    def __post_init__(self):
        prev = -1
        for i, v in self.features:
            if i <= prev:
                raise ValueError(
                    f"example {self.index}: feature indices must be strictly increasing"
                )
            if i < 0:
                raise ValueError(f"example {self.index}: negative feature index {i}")
            if not np.isfinite(v):
                raise ValueError(f"example {self.index}: non-finite feature value")
            prev = i
        if self.redundant != (self.true_label is None):
            raise ValueError(
                f"example {self.index}: redundant examples must have no label and "
                "labeled examples must have one"
            )

    @classmethod
    def from_dense(cls, index, values, true_label=None, redundant=False):
        feats = tuple((i, float(v)) for i, v in enumerate(values) if v != 0.0)
        return cls(index, feats, true_label, redundant)

    @property
    def feature_dim(self) -> int:
        return self.features[-1][0] + 1 if self.features else 0

    def dense(self, dim: int) -> np.ndarray:
        out = np.zeros(dim)
        for i, v in self.features:
            if i < dim:
                out[i] = v
        return out


class Dataset:
    """An indexed pool of examples; ``example.index`` equals its position."""

    def __init__(self, examples, label_space: LabelSpace, name: str = ""):
        self.examples = tuple(examples)
        self.label_space = label_space
        self.name = name
        if not self.examples:
            raise ValueError("dataset must contain at least one example")
        for pos, ex in enumerate(self.examples):
            if ex.index != pos:
                raise ValueError(f"example at position {pos} has index {ex.index}")
            if ex.true_label is not None and not label_space.is_valid_label(ex.true_label):
                raise ValueError(f"example {pos}: label {ex.true_label} out of range")
        self._dense_cache: dict[int, np.ndarray] = {}

    def __len__(self):
        return len(self.examples)

    def __getitem__(self, index: int) -> Example:
        return self.examples[index]

    def __iter__(self):
        return iter(self.examples)

    @property
    def num_labels(self) -> int:
        return self.label_space.num_labels

    @property
    def feature_dim(self) -> int:
        return max((ex.feature_dim for ex in self.examples), default=0)

    @property
    def num_redundant(self) -> int:
        return sum(1 for ex in self.examples if ex.redundant)

    def dense_matrix(self, dim: int | None = None) -> np.ndarray:
        """Dense ``(n, dim)`` feature matrix, cached per requested width."""
        if dim is None:
            dim = self.feature_dim
        if dim not in self._dense_cache:
            mat = np.zeros((len(self.examples), dim))
            for pos, ex in enumerate(self.examples):
                for i, v in ex.features:
                    if i < dim:
                        mat[pos, i] = v
            mat.flags.writeable = False
            self._dense_cache[dim] = mat
        return self._dense_cache[dim]

    def true_labels(self) -> np.ndarray:
        """Labels as an int array; redundant examples appear as 0."""
        return np.array(
            [0 if ex.true_label is None else ex.true_label for ex in self.examples]
        )


@dataclass(frozen=True)
class QueryRecord:
    iteration: int
    example_index: int
    feedback: int
    accuracy: float


@dataclass(frozen=True)
class RunTrace:
    """Per-query record of one completed active-learning run."""

    records: tuple[QueryRecord, ...]
    seed: int
    policy: str
    scenario: str
    budget: int

    def accuracies(self) -> np.ndarray:
        return np.array([r.accuracy for r in self.records])

    def queried_indices(self) -> list[int]:
        return [r.example_index for r in self.records]

    def num_abstained(self) -> int:
        return sum(1 for r in self.records if r.feedback == ABSTAIN)


class Belief(ABC):
    """Posterior state over label behaviour and abstention rates.

    Implementations must be immutable: the update methods return new values.
    """

    @property
    @abstractmethod
    def num_labels(self) -> int: ...

    @abstractmethod
    def predictive_pmf(self, example) -> np.ndarray:
        """Posterior predictive label distribution, index ``i`` = label ``i+1``."""

    @abstractmethod
    def estimated_rate(self, example) -> float:
        """Posterior mean abstention probability for the example."""

    @abstractmethod
    def update_on_label(self, example, label: int) -> "Belief":
        """Condition on the example being labeled ``label`` (and not abstained)."""

    @abstractmethod
    def update_on_abstain(self, example) -> "Belief":
        """Condition on the labeler abstaining on the example."""

    def predict(self, example) -> int:
        """Most probable label; ties go to the lowest label."""
        return int(np.argmax(self.predictive_pmf(example))) + 1

    def pmf_matrix(self, dataset: Dataset, indices) -> np.ndarray:
        return np.stack([self.predictive_pmf(dataset[i]) for i in indices])

    def rate_vector(self, dataset: Dataset, indices) -> np.ndarray:
        return np.array([self.estimated_rate(dataset[i]) for i in indices])

    def predict_labels(self, dataset: Dataset) -> np.ndarray:
        return np.array([self.predict(ex) for ex in dataset])


def evaluate_accuracy(belief: Belief, test_set: Dataset) -> float:
    """Fraction of test examples whose predicted label matches the truth."""
    if any(ex.redundant for ex in test_set):
        raise ValueError("test set must not contain redundant examples")
    predicted = belief.predict_labels(test_set)
    return float(np.mean(predicted == test_set.true_labels()))


def run_active_learning(
    policy,
    labeler,
    pool: Dataset,
    budget: int,
    belief: Belief,
    test_set: Dataset,
    rng_seed: int,
    scenario: str = "",
) -> RunTrace:
    """Run ``budget`` sequential queries and record accuracy after each one.

    Every query consumes one unit of budget whether or not the labeler
    answered, and the queried example leaves the candidate set either way
    (re-querying a persistent labeler yields nothing new). A returned label
    updates the belief with both the label and the fact that the labeler did
    not abstain; an abstention updates only the abstention-rate side.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    if budget > len(pool):
        raise BudgetExceedsPoolError(
            f"budget {budget} exceeds pool size {len(pool)}"
        )
    rng = np.random.default_rng(rng_seed)
    candidates = set(range(len(pool)))
    records = []
    for i in range(budget):
        x = policy.select(belief, candidates, pool, rng)
        feedback = int(labeler.query(x))
        if not pool.label_space.is_valid_feedback(feedback):
            raise ValueError(f"labeler returned invalid feedback {feedback}")
        example = pool[x]
        if feedback == ABSTAIN:
            belief = belief.update_on_abstain(example)
        else:
            belief = belief.update_on_label(example, feedback)
        candidates.discard(x)
        accuracy = evaluate_accuracy(belief, test_set)
        records.append(QueryRecord(i, x, feedback, accuracy))
    return RunTrace(tuple(records), rng_seed, policy.name, scenario, budget)
