"""Exact Bayesian inference over finite hypothesis and abstention-rate sets.

The belief is a pair of weight vectors: one over a finite set of
probabilistic label hypotheses, one over a finite set of abstention-rate
functions. The joint stays a product of the two marginals because every
observation's likelihood factorizes: a label multiplies the hypothesis
weights by the label probability and the rate weights by the non-abstention
probability, while an abstention touches only the rate weights. All updates
are exact Bayes steps in linear space with renormalization.
"""

from dataclasses import dataclass

import numpy as np

from .core import AbstainALError, Belief

_NORM_TOL = 1e-12


class ZeroPosteriorMassError(AbstainALError):
    """An observation has probability zero under the belief's support."""


def _example_index(x) -> int:
    """Accept either a bare pool index or an Example."""
    return x.index if hasattr(x, "index") else int(x)


@dataclass(frozen=True)
class ProbHypothesis:
    """Per-example categorical label distributions.

    ``pmfs`` maps a pool index to a probability vector whose entry ``i`` is
    the probability of label ``i + 1``. Labels at distinct examples are
    independent under a fixed hypothesis.
    """

    pmfs: dict[int, tuple[float, ...]]

    def __post_init__(self):
        for x, pmf in self.pmfs.items():
            arr = np.asarray(pmf)
            if np.any(arr < 0) or abs(arr.sum() - 1.0) > _NORM_TOL:
                raise ValueError(f"pmf at example {x} is not a probability vector")

    @property
    def num_labels(self) -> int:
        return len(next(iter(self.pmfs.values())))

    def pmf(self, x) -> np.ndarray:
        idx = _example_index(x)
        if idx not in self.pmfs:
            raise KeyError(f"hypothesis has no distribution for example {idx}")
        return np.asarray(self.pmfs[idx])

    def label_prob(self, x, y: int) -> float:
        return float(self.pmf(x)[y - 1])


@dataclass(frozen=True)
class RateFunction:
    """Per-example abstention probabilities in ``[0, 1]``."""

    rates: dict[int, float]

    def __post_init__(self):
        for x, r in self.rates.items():
            if not 0.0 <= r <= 1.0:
                raise ValueError(f"rate at example {x} is {r}, outside [0, 1]")

    def rate(self, x) -> float:
        idx = _example_index(x)
        if idx not in self.rates:
            raise KeyError(f"rate function has no value for example {idx}")
        return float(self.rates[idx])


class FiniteBelief(Belief):
    """Posterior weights over explicit hypothesis and rate sets.

    Weights are normalized at construction and after every update; a zero
    weight can never become positive again (support only shrinks). Instances
    are immutable value objects.
    """

    def __init__(self, hypotheses, hypothesis_weights, rates, rate_weights):
        self.hypotheses = tuple(hypotheses)
        self.rates = tuple(rates)
        self.hypothesis_weights = self._normalized(hypothesis_weights, "hypothesis")
        self.rate_weights = self._normalized(rate_weights, "rate")
        if len(self.hypotheses) != len(self.hypothesis_weights):
            raise ValueError("hypothesis weight vector has wrong length")
        if len(self.rates) != len(self.rate_weights):
            raise ValueError("rate weight vector has wrong length")
        labels = {h.num_labels for h in self.hypotheses}
        if len(labels) != 1:
            raise ValueError("hypotheses disagree on the number of labels")
        self._num_labels = labels.pop()

    @staticmethod
    def _normalized(weights, what: str) -> np.ndarray:
        arr = np.array(weights, dtype=float)
        if arr.ndim != 1 or np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise ValueError(f"{what} weights must be non-negative finite")
        total = arr.sum()
        if total <= 0:
            raise ValueError(f"{what} weights sum to zero")
        arr = arr / total
        arr.flags.writeable = False
        return arr

    @property
    def num_labels(self) -> int:
        return self._num_labels

    def predictive_pmf(self, x) -> np.ndarray:
        pmfs = np.stack([h.pmf(x) for h in self.hypotheses])
        return self.hypothesis_weights @ pmfs

    def estimated_rate(self, x) -> float:
        values = np.array([r.rate(x) for r in self.rates])
        return float(self.rate_weights @ values)

    def update_on_label(self, x, y: int) -> "FiniteBelief":
        if not 1 <= y <= self._num_labels:
            raise ValueError(f"label {y} out of range 1..{self._num_labels}")
        h_like = np.array([h.label_prob(x, y) for h in self.hypotheses])
        r_like = np.array([1.0 - r.rate(x) for r in self.rates])
        return self._reweighted(h_like, r_like)

    def update_on_abstain(self, x) -> "FiniteBelief":
        r_like = np.array([r.rate(x) for r in self.rates])
        return self._reweighted(np.ones(len(self.hypotheses)), r_like)

    def _reweighted(self, h_like, r_like) -> "FiniteBelief":
        new_h = self.hypothesis_weights * h_like
        new_r = self.rate_weights * r_like
        if new_h.sum() <= 0.0 or new_r.sum() <= 0.0:
            raise ZeroPosteriorMassError(
                "observation has zero probability under the belief"
            )
        return FiniteBelief(self.hypotheses, new_h, self.rates, new_r)


def uniform_belief(hypotheses, rates) -> FiniteBelief:
    """Belief with uniform weights over the given hypotheses and rates."""
    hypotheses = tuple(hypotheses)
    rates = tuple(rates)
    return FiniteBelief(
        hypotheses,
        np.full(len(hypotheses), 1.0 / len(hypotheses)),
        rates,
        np.full(len(rates), 1.0 / len(rates)),
    )
