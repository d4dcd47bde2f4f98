"""Small builders shared across test modules."""

import numpy as np

from abstain_al import (
    Dataset,
    Example,
    FiniteBelief,
    LabelSpace,
    ProbHypothesis,
    RateFunction,
)


def binary_hypothesis(p_label1):
    """Hypothesis over examples 0..m-1 with the given P(label 1 | x) values."""
    return ProbHypothesis({x: (p, 1.0 - p) for x, p in enumerate(p_label1)})


def rate_function(rates):
    return RateFunction(dict(enumerate(rates)))


def binary_belief(p_label1_rows, rates_rows, h_weights=None, r_weights=None):
    """FiniteBelief over a pool of len(row) examples; uniform weights by default."""
    hypotheses = [binary_hypothesis(row) for row in p_label1_rows]
    rates = [rate_function(row) for row in rates_rows]
    if h_weights is None:
        h_weights = np.full(len(hypotheses), 1.0 / len(hypotheses))
    if r_weights is None:
        r_weights = np.full(len(rates), 1.0 / len(rates))
    return FiniteBelief(hypotheses, h_weights, rates, r_weights)


def point_belief(pmf_rows, rate_row):
    """Single-hypothesis, single-rate belief: predictive pmf equals the rows."""
    hypotheses = [ProbHypothesis({x: tuple(pmf) for x, pmf in enumerate(pmf_rows)})]
    return FiniteBelief(hypotheses, [1.0], [rate_function(rate_row)], [1.0])


def index_pool(size, num_labels=2, labels=None):
    """A pool whose examples carry a single indicator feature; labels default to 1."""
    if labels is None:
        labels = [1] * size
    examples = [Example(i, ((i, 1.0),), labels[i]) for i in range(size)]
    return Dataset(examples, LabelSpace(num_labels), name="index-pool")


class ScriptedLabeler:
    """Answers from a fixed table; also counts queries for persistence checks."""

    def __init__(self, answers):
        self.answers = dict(answers)
        self.queries = []

    def query(self, index):
        self.queries.append(index)
        return self.answers[index]
