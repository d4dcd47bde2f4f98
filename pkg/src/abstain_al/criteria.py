"""Selection policies: passive, Gibbs-error, and the two rate-aware criteria.

Four policy kinds are supported. ``pl`` picks uniformly at random. ``alg``
maximizes the Gibbs error of the predictive label distribution and ignores
abstention entirely. ``ala`` (average-case) maximizes

    1 - r^2 - (1 - r)^2 * sum_y pmf(y)^2

which is the Gibbs error of the (l+1)-outcome feedback distribution, so it
trades label uncertainty against the estimated abstention probability ``r``.
``alw`` (worst-case) minimizes

    max(r, (1 - r) * max_y pmf(y))

the largest single feedback-outcome probability. Both rate-aware policies can
read ``r`` from the evolving belief (learned) or from a frozen rate function
(the ``-known`` variants). Ties are always broken toward the lowest example
index so runs are reproducible.
"""

from dataclasses import dataclass

import numpy as np

from .core import Belief, Dataset, EmptyCandidatesError

POLICY_NAMES = ("pl", "alg", "ala", "alw", "ala-known", "alw-known")


def score_gibbs(pmf):
    """Gibbs error ``1 - sum_y pmf(y)^2``; higher means less confident."""
    pmf = np.asarray(pmf)
    return 1.0 - np.sum(np.square(pmf), axis=-1)


def score_avg(pmf, rate):
    """Average-case selection score; the policy maximizes it."""
    pmf = np.asarray(pmf)
    rate = np.asarray(rate)
    return 1.0 - np.square(rate) - np.square(1.0 - rate) * np.sum(np.square(pmf), axis=-1)


def score_worst(pmf, rate):
    """Worst-case selection score (largest outcome probability); minimized."""
    pmf = np.asarray(pmf)
    rate = np.asarray(rate)
    return np.maximum(rate, (1.0 - rate) * np.max(pmf, axis=-1))


LEARNED_RATE = "learned"


@dataclass(frozen=True)
class Policy:
    """A selection rule; ``rate_source`` is None, "learned", or a fixed predictor."""

    kind: str
    rate_source: object = None
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("pl", "alg", "ala", "alw"):
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.kind in ("pl", "alg") and self.rate_source is not None:
            raise ValueError(f"policy {self.kind} does not use an abstention rate")
        if self.kind in ("ala", "alw") and self.rate_source is None:
            raise ValueError(f"policy {self.kind} needs a rate source")
        if not self.name:
            object.__setattr__(self, "name", self.kind)

    def select(self, belief: Belief, candidates, pool: Dataset, rng) -> int:
        return select(self, belief, candidates, pool, rng)


def make_policy(name: str, fixed_rate=None) -> Policy:
    """Build a policy from its config string.

    The ``-known`` variants wrap the same scorers around a frozen rate
    predictor instead of the belief's learned estimate.
    """
    if name not in POLICY_NAMES:
        raise ValueError(f"unknown policy {name!r}; expected one of {POLICY_NAMES}")
    if name in ("pl", "alg"):
        return Policy(name, None, name)
    if name.endswith("-known"):
        if fixed_rate is None:
            raise ValueError(f"policy {name} requires a fixed rate function")
        return Policy(name[: -len("-known")], fixed_rate, name)
    return Policy(name, LEARNED_RATE, name)


def _candidate_rates(policy: Policy, belief: Belief, pool: Dataset, order) -> np.ndarray:
    if policy.rate_source == LEARNED_RATE:
        return belief.rate_vector(pool, order)
    return policy.rate_source.rate_vector(pool, order)


def select(policy: Policy, belief: Belief, candidates, pool: Dataset, rng) -> int:
    """Choose the next query among ``candidates``.

    Candidates are visited in ascending index order, which makes the random
    draw of ``pl`` independent of how the caller stores the set and sends all
    score ties to the lowest index.
    """
    order = sorted(candidates)
    if not order:
        raise EmptyCandidatesError("no candidates left to select from")
    if policy.kind == "pl":
        return order[int(rng.integers(len(order)))]
    pmf = belief.pmf_matrix(pool, order)
    if policy.kind == "alg":
        scores = score_gibbs(pmf)
        pick = int(np.argmax(scores))
    elif policy.kind == "ala":
        scores = score_avg(pmf, _candidate_rates(policy, belief, pool, order))
        pick = int(np.argmax(scores))
    else:  # alw
        scores = score_worst(pmf, _candidate_rates(policy, belief, pool, order))
        pick = int(np.argmin(scores))
    return order[pick]
