"""Simulated labelers with persistent abstention decisions.

Every labeler materializes its full answer table at construction time, so a
repeated query always returns the same feedback. Three deterministic
scenarios mirror common labeler behaviour, plus a generic stochastic one:

- unrelated: abstain exactly on the pool's redundant examples (data from
  outside the target classes);
- easy: fit a reference model to the fully labeled pool and abstain on the
  requested fraction of examples whose predicted probability is farthest
  from 0.5 (the easy ones, far from the decision boundary);
- hard: same statistic, but abstain on the examples closest to 0.5;
- stochastic: abstain on each example independently with probability given
  by a rate function, realized once per seed.
"""

import math
from dataclasses import dataclass

import numpy as np

from .core import ABSTAIN, Dataset, Example
from .map_models import fit_map, sigmoid


class SimulatedLabeler:
    """A frozen pool-index -> feedback table."""

    def __init__(self, answers: dict, kind: str = ""):
        self.answers = dict(answers)
        self.kind = kind

    def query(self, index: int) -> int:
        return self.answers[index]

    def abstention_pattern(self, pool: Dataset) -> np.ndarray:
        """0/1 vector over the pool; 1 where this labeler abstains."""
        return np.array([1 if self.answers[ex.index] == ABSTAIN else 0 for ex in pool])

    @property
    def num_abstentions(self) -> int:
        return sum(1 for fb in self.answers.values() if fb == ABSTAIN)


def _abstain_count(fraction: float, pool_size: int) -> int:
    # ceil(fraction * size), guarding against float dust at exact integers.
    return math.ceil(fraction * pool_size - 1e-9)


def make_unrelated(pool: Dataset) -> SimulatedLabeler:
    """Abstain on every redundant example, label every target example."""
    if all(ex.redundant for ex in pool):
        raise ValueError("pool has no target examples")
    answers = {
        ex.index: ABSTAIN if ex.redundant else ex.true_label for ex in pool
    }
    return SimulatedLabeler(answers, "unrelated")


def _boundary_distances(pool: Dataset, sigma2: float) -> np.ndarray:
    if any(ex.redundant for ex in pool):
        raise ValueError("distance-based scenarios need a fully labeled pool")
    observations = [(ex, 1 if ex.true_label == 2 else 0) for ex in pool]
    model = fit_map(observations, sigma2, pool.feature_dim)
    probs = np.asarray(sigmoid(model.decision_matrix(pool.dense_matrix())))
    return np.abs(probs - 0.5)


def _distance_labeler(pool, fraction, sigma2, largest, kind) -> SimulatedLabeler:
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("abstention fraction must be in [0, 1]")
    distances = _boundary_distances(pool, sigma2)
    count = _abstain_count(fraction, len(pool))
    key = -distances if largest else distances
    # lexsort: primary key last; ties go to the lowest example index.
    order = np.lexsort((np.arange(len(pool)), key))
    abstain = set(int(i) for i in order[:count])
    answers = {
        ex.index: ABSTAIN if ex.index in abstain else ex.true_label for ex in pool
    }
    return SimulatedLabeler(answers, kind)


def make_easy_abstain(pool: Dataset, fraction: float, sigma2: float = 0.5) -> SimulatedLabeler:
    """Abstain on the fraction of the pool farthest from the decision boundary."""
    return _distance_labeler(pool, fraction, sigma2, largest=True, kind="easy")


def make_hard_abstain(pool: Dataset, fraction: float, sigma2: float = 0.5) -> SimulatedLabeler:
    """Abstain on the fraction of the pool closest to the decision boundary."""
    return _distance_labeler(pool, fraction, sigma2, largest=False, kind="hard")


def make_stochastic(pool: Dataset, rate_fn, seed: int) -> SimulatedLabeler:
    """Draw each example's abstention once from its rate; fixed thereafter."""
    if any(ex.redundant for ex in pool):
        raise ValueError("stochastic scenario needs a fully labeled pool")
    rng = np.random.default_rng(seed)
    draws = rng.random(len(pool))
    answers = {}
    for ex, u in zip(pool, draws):
        rate = float(rate_fn(ex))
        if not 0.0 <= rate <= 1.0:
            raise ValueError(f"rate {rate} outside [0, 1] at example {ex.index}")
        answers[ex.index] = ABSTAIN if u < rate else ex.true_label
    return SimulatedLabeler(answers, "stochastic")


def swap_in_redundant(
    pool: Dataset, redundant_pool: Dataset, fraction: float, seed: int
) -> Dataset:
    """Replace a seeded fraction of the pool with redundant examples.

    Keeps the pool size constant, so abstention percentage is varied by
    composition rather than by growing the pool.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must be in [0, 1]")
    count = _abstain_count(fraction, len(pool))
    if count > len(redundant_pool):
        raise ValueError(
            f"need {count} redundant examples, pool only has {len(redundant_pool)}"
        )
    rng = np.random.default_rng(seed)
    positions = set(
        int(i) for i in rng.choice(len(pool), size=count, replace=False)
    )
    sources = rng.choice(len(redundant_pool), size=count, replace=False)
    examples = []
    source_iter = iter(sources)
    for pos in range(len(pool)):
        if pos in positions:
            donor = redundant_pool[int(next(source_iter))]
            examples.append(Example(pos, donor.features, None, True))
        else:
            old = pool[pos]
            examples.append(Example(pos, old.features, old.true_label, old.redundant))
    return Dataset(examples, pool.label_space, name=f"{pool.name}+redundant")


SCENARIO_KINDS = ("unrelated", "easy", "hard", "stochastic")


@dataclass(frozen=True)
class Scenario:
    """How the simulated labeler for a run is constructed."""

    kind: str
    fraction: float
    generator_sigma2: float = 0.5

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise ValueError(f"unknown scenario {self.kind!r}")
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError("abstention fraction must be in [0, 1]")

    def build_labeler(self, pool: Dataset, seed: int) -> SimulatedLabeler:
        if self.kind == "unrelated":
            return make_unrelated(pool)
        if self.kind == "easy":
            return make_easy_abstain(pool, self.fraction, self.generator_sigma2)
        if self.kind == "hard":
            return make_hard_abstain(pool, self.fraction, self.generator_sigma2)
        return make_stochastic(pool, lambda ex: self.fraction, seed)
