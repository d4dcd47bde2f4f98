"""Exhaustive small-instance machinery certifying greedy near-optimality.

A finite belief over probabilistic hypotheses and rate functions induces a
prior over the space of deterministic labelings of the pool and, separately,
over deterministic abstention patterns (one 0/1 value per example). On pools
small enough to enumerate both spaces we can:

- score any adaptive policy tree exactly, under the average-case objective
  (expected version-space reduction of the selected set) or the worst-case
  objective (minimum over realizations the prior admits);
- compute the optimal adaptive policy by dynamic programming over query
  histories;
- replay both greedy criteria as policy trees with exact posterior updates;
- check the greedy values against the (1 - 1/e) factor of the optimum.

The utility of a selected set S under a realization (f, k) is the version
space reduction of everything the policy observed: one minus the prior
probability of seeing exactly that feedback, i.e.

    1 - P[labeling agrees with f on the answered part of S]
        * P[pattern agrees with k on S]

with both marginals taken under the induced prior. Labels hidden by an
abstention never reach the learner, so they contribute no reduction; the
pattern itself (who answered, who abstained) is observed in full. Branches
and the worst-case minimum are restricted to realizations with positive
prior mass, since the others can never occur.
"""

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from .core import ABSTAIN, AbstainALError
from .criteria import score_avg, score_worst
from .finite_bayes import FiniteBelief, ProbHypothesis, RateFunction

GREEDY_FACTOR = 1.0 - 1.0 / math.e
BOUND_SLACK = 1e-9

ENUMERATION_LIMIT = 10**6
MAX_DP_BUDGET = 4


class InstanceTooLargeError(AbstainALError):
    """The instance cannot be enumerated within the configured guards."""


class InstanceFormatError(AbstainALError):
    """An instance file does not parse."""


@dataclass
class PolicyTreeNode:
    """One query in an adaptive policy; children are keyed by feedback value.

    A ``None`` child marks a feedback value that cannot occur given the
    history (zero posterior probability) or the end of the budget.
    """

    example: int
    children: dict


class InducedPrior:
    """Explicit weights over all labelings and all abstention patterns."""

    def __init__(self, num_examples, num_labels, labelings, qf, patterns, qk):
        self.num_examples = num_examples
        self.num_labels = num_labels
        self.labelings = labelings  # (|F|, m) int array, values 1..l
        self.qf = qf
        self.patterns = patterns  # (|K|, m) int array, values 0/1
        self.qk = qk
        self._label_cache: dict = {}
        self._pattern_cache: dict = {}

    def label_marginal(self, sites, values) -> float:
        """Prior probability that the pool labeling matches ``values`` on ``sites``."""
        key = (tuple(sites), tuple(values))
        if key not in self._label_cache:
            mask = np.all(self.labelings[:, list(sites)] == list(values), axis=1)
            self._label_cache[key] = float(self.qf[mask].sum())
        return self._label_cache[key]

    def pattern_marginal(self, sites, values) -> float:
        key = (tuple(sites), tuple(values))
        if key not in self._pattern_cache:
            mask = np.all(self.patterns[:, list(sites)] == list(values), axis=1)
            self._pattern_cache[key] = float(self.qk[mask].sum())
        return self._pattern_cache[key]


def _pool_indices(belief: FiniteBelief):
    indices = sorted(belief.hypotheses[0].pmfs.keys())
    if indices != list(range(len(indices))):
        raise ValueError("induced instances need contiguous pool indices 0..m-1")
    return indices


def induce_qf(belief: FiniteBelief):
    """Weights over every deterministic labeling of the pool."""
    indices = _pool_indices(belief)
    m, num_labels = len(indices), belief.num_labels
    if num_labels ** m > ENUMERATION_LIMIT:
        raise InstanceTooLargeError(
            f"{num_labels}^{m} labelings exceed the enumeration limit"
        )
    labelings = np.array(
        list(itertools.product(range(1, num_labels + 1), repeat=m)), dtype=int
    ).reshape(-1, m)
    qf = np.zeros(len(labelings))
    cols = np.arange(m)
    for h, w in zip(belief.hypotheses, belief.hypothesis_weights):
        pmf = np.stack([h.pmf(x) for x in indices])  # (m, l)
        qf += w * pmf[cols, labelings - 1].prod(axis=1)
    return labelings, qf


def induce_qk(belief: FiniteBelief):
    """Weights over every abstention pattern of the pool."""
    indices = _pool_indices(belief)
    m = len(indices)
    if 2 ** m > ENUMERATION_LIMIT:
        raise InstanceTooLargeError(f"2^{m} patterns exceed the enumeration limit")
    patterns = np.array(list(itertools.product((0, 1), repeat=m)), dtype=int).reshape(-1, m)
    qk = np.zeros(len(patterns))
    for r, w in zip(belief.rates, belief.rate_weights):
        rates = np.array([r.rate(x) for x in indices])
        qk += w * np.where(patterns == 1, rates, 1.0 - rates).prod(axis=1)
    return patterns, qk


def induce(belief: FiniteBelief) -> InducedPrior:
    labelings, qf = induce_qf(belief)
    patterns, qk = induce_qk(belief)
    return InducedPrior(
        len(labelings[0]), belief.num_labels, labelings, qf, patterns, qk
    )


def utility_g(induced: InducedPrior, sites, labels, pattern) -> float:
    """Version-space reduction from querying ``sites`` under a realization.

    ``labels`` and ``pattern`` give the realization's values on ``sites``.
    The reduction counts only what the learner saw: the full pattern, but
    labels only where the pattern answered (``pattern == 0``). Label values
    at abstained positions are ignored.
    """
    if len(sites) == 0:
        return 0.0
    answered = [(x, y) for x, y, z in zip(sites, labels, pattern) if z == 0]
    label_mass = induced.label_marginal(
        tuple(x for x, _ in answered), tuple(y for _, y in answered)
    )
    return 1.0 - label_mass * induced.pattern_marginal(sites, pattern)


def _walk(tree, f, k):
    """Examples a policy tree selects when the realization is ``(f, k)``."""
    selected = []
    node = tree
    while node is not None:
        x = node.example
        selected.append(x)
        feedback = ABSTAIN if k[x] == 1 else int(f[x])
        node = node.children.get(feedback)
    return selected


def _realization_utility(induced, sites, f, k) -> float:
    order = sorted(sites)
    return utility_g(
        induced, order, tuple(int(f[x]) for x in order), tuple(int(k[x]) for x in order)
    )


def _support_pairs(induced):
    f_support = np.flatnonzero(induced.qf > 0.0)
    k_support = np.flatnonzero(induced.qk > 0.0)
    return f_support, k_support


def eval_policy_avg(tree, induced: InducedPrior) -> float:
    """Expected utility of the tree's selection over the induced prior."""
    f_support, k_support = _support_pairs(induced)
    total = 0.0
    for fi in f_support:
        f = induced.labelings[fi]
        for ki in k_support:
            k = induced.patterns[ki]
            weight = induced.qf[fi] * induced.qk[ki]
            sites = _walk(tree, f, k)
            total += weight * _realization_utility(induced, sites, f, k)
    return total


def eval_policy_worst(tree, induced: InducedPrior) -> float:
    """Minimum utility over realizations with positive prior mass."""
    f_support, k_support = _support_pairs(induced)
    worst = math.inf
    for fi in f_support:
        f = induced.labelings[fi]
        for ki in k_support:
            k = induced.patterns[ki]
            sites = _walk(tree, f, k)
            worst = min(worst, _realization_utility(induced, sites, f, k))
    return worst if worst is not math.inf else 0.0


def greedy_policy_tree(belief: FiniteBelief, budget: int, objective: str):
    """Unroll a greedy criterion into a policy tree with exact Bayes updates.

    ``objective`` is "avg" (maximize the average-case score) or "worst"
    (minimize the worst-case score). Children with zero posterior probability
    are pruned; they can never be reached by a realization the prior admits.
    """
    if objective not in ("avg", "worst"):
        raise ValueError(f"unknown objective {objective!r}")
    indices = _pool_indices(belief)
    if budget > len(indices):
        raise ValueError("budget exceeds pool size")

    def build(current: FiniteBelief, candidates, depth):
        if depth == 0:
            return None
        pmfs = np.stack([current.predictive_pmf(x) for x in candidates])
        rates = np.array([current.estimated_rate(x) for x in candidates])
        if objective == "avg":
            pick = int(np.argmax(score_avg(pmfs, rates)))
        else:
            pick = int(np.argmin(score_worst(pmfs, rates)))
        x = candidates[pick]
        remaining = candidates[:pick] + candidates[pick + 1 :]
        rate = current.estimated_rate(x)
        pmf = current.predictive_pmf(x)
        children = {}
        children[ABSTAIN] = (
            build(current.update_on_abstain(x), remaining, depth - 1)
            if rate > 0.0
            else None
        )
        for y in range(1, current.num_labels + 1):
            if (1.0 - rate) * pmf[y - 1] > 0.0:
                children[y] = build(current.update_on_label(x, y), remaining, depth - 1)
            else:
                children[y] = None
        return PolicyTreeNode(x, children)

    return build(belief, tuple(indices), budget)


def optimal_policy(objective: str, induced: InducedPrior, budget: int):
    """Optimal adaptive policy by exhaustive dynamic programming.

    States are histories (sets of ``(example, feedback)`` pairs: order does
    not matter because likelihoods multiply). A complete history pins down
    everything the learner observed, so every realization consistent with it
    has the same utility and the terminal value is that constant; interior
    nodes take the posterior-weighted expectation over feedback outcomes for
    "avg" and the minimum over reachable outcomes for "worst". Returns
    ``(tree, value)``.
    """
    if objective not in ("avg", "worst"):
        raise ValueError(f"unknown objective {objective!r}")
    if budget > MAX_DP_BUDGET:
        raise InstanceTooLargeError(
            f"budget {budget} exceeds the exhaustive-search guard {MAX_DP_BUDGET}"
        )
    m = induced.num_examples
    if budget > m:
        raise ValueError("budget exceeds pool size")
    labelings, patterns = induced.labelings, induced.patterns

    def posterior(history):
        wf = induced.qf.copy()
        wk = induced.qk.copy()
        for x, feedback in history:
            if feedback == ABSTAIN:
                wk *= patterns[:, x] == 1
            else:
                wk *= patterns[:, x] == 0
                wf *= labelings[:, x] == feedback
        return wf, wk

    def terminal(history):
        by_site = sorted(history)
        sites = tuple(x for x, _ in by_site)
        zvals = tuple(1 if fb == ABSTAIN else 0 for _, fb in by_site)
        answered = [(x, fb) for x, fb in by_site if fb != ABSTAIN]
        label_mass = induced.label_marginal(
            tuple(x for x, _ in answered), tuple(fb for _, fb in answered)
        )
        return 1.0 - label_mass * induced.pattern_marginal(sites, zvals)

    memo = {}

    def value(history):
        if history in memo:
            return memo[history]
        if len(history) == budget:
            result = (terminal(history), None)
            memo[history] = result
            return result
        wf, wk = posterior(history)
        queried = {x for x, _ in history}
        f_total = wf.sum()
        k_total = wk.sum()
        best = (-math.inf, None)
        for x in range(m):
            if x in queried:
                continue
            p_abstain = wk[patterns[:, x] == 1].sum() / k_total
            outcome_probs = [(ABSTAIN, p_abstain)]
            p_answer = 1.0 - p_abstain
            for y in range(1, induced.num_labels + 1):
                p_label = wf[labelings[:, x] == y].sum() / f_total
                outcome_probs.append((y, p_answer * p_label))
            if objective == "avg":
                v = sum(
                    p * value(history | {(x, o)})[0]
                    for o, p in outcome_probs
                    if p > 0.0
                )
            else:
                v = min(
                    value(history | {(x, o)})[0] for o, p in outcome_probs if p > 0.0
                )
            if v > best[0]:
                best = (v, x)
        memo[history] = best
        return best

    def build(history):
        if len(history) == budget:
            return None
        _, x = value(history)
        wf, wk = posterior(history)
        k_total = wk.sum()
        f_total = wf.sum()
        children = {}
        p_abstain = wk[patterns[:, x] == 1].sum() / k_total
        children[ABSTAIN] = build(history | {(x, ABSTAIN)}) if p_abstain > 0 else None
        p_answer = 1.0 - p_abstain
        for y in range(1, induced.num_labels + 1):
            p_label = wf[labelings[:, x] == y].sum() / f_total
            if p_answer * p_label > 0:
                children[y] = build(history | {(x, y)})
            else:
                children[y] = None
        return PolicyTreeNode(x, children)

    root = frozenset()
    top_value, _ = value(root)
    return build(root), top_value


def _apply_history(belief: FiniteBelief, history) -> FiniteBelief:
    for x, feedback in history:
        if feedback == ABSTAIN:
            belief = belief.update_on_abstain(x)
        else:
            belief = belief.update_on_label(x, feedback)
    return belief


def _outcome_probs(belief: FiniteBelief, x):
    """Feedback-outcome probabilities at ``x`` via the induced enumeration.

    This is the deliberately roundabout route: rebuild the labeling and
    pattern spaces from the belief and read the outcome masses off them,
    independently of the belief's own predictive quantities.
    """
    induced = induce(belief)
    p_abstain = induced.pattern_marginal((x,), (1,))
    p_answer = induced.pattern_marginal((x,), (0,))
    probs = [p_abstain]
    for y in range(1, belief.num_labels + 1):
        probs.append(p_answer * induced.label_marginal((x,), (y,)))
    return probs


def expected_one_step_gain(belief: FiniteBelief, history, x) -> float:
    """Expected version-space reduction from querying ``x`` after ``history``.

    Enumerates the l+1 feedback outcomes; each outcome of probability p
    removes 1 - p of the observable version space, so the expectation is
    ``sum_o p_o * (1 - p_o)``.
    """
    probs = _outcome_probs(_apply_history(belief, history), x)
    return float(sum(p * (1.0 - p) for p in probs))


def worst_case_one_step_gain(belief: FiniteBelief, history, x) -> float:
    """Largest feedback-outcome probability at ``x`` after ``history``.

    This is the version-space mass the least favourable feedback leaves
    behind; the worst-case greedy queries the candidate minimizing it.
    """
    probs = _outcome_probs(_apply_history(belief, history), x)
    return float(max(probs))


@dataclass(frozen=True)
class CertificationResult:
    """Greedy and optimal objective values for one enumerable instance."""

    instance: str
    budget: int
    g_avg_greedy: float
    g_avg_opt: float
    g_worst_greedy: float
    g_worst_opt: float

    @property
    def avg_ok(self) -> bool:
        return self.g_avg_greedy >= GREEDY_FACTOR * self.g_avg_opt - BOUND_SLACK

    @property
    def worst_ok(self) -> bool:
        return self.g_worst_greedy >= GREEDY_FACTOR * self.g_worst_opt - BOUND_SLACK

    @property
    def passed(self) -> bool:
        return self.avg_ok and self.worst_ok

    def to_record(self) -> dict:
        def ratio(greedy, opt):
            return greedy / opt if opt > 0 else 1.0

        return {
            "instance": self.instance,
            "budget": self.budget,
            "g_avg_greedy": self.g_avg_greedy,
            "g_avg_opt": self.g_avg_opt,
            "ratio_avg": ratio(self.g_avg_greedy, self.g_avg_opt),
            "g_worst_greedy": self.g_worst_greedy,
            "g_worst_opt": self.g_worst_opt,
            "ratio_worst": ratio(self.g_worst_greedy, self.g_worst_opt),
            "passed": self.passed,
        }


def certify_instance(belief: FiniteBelief, budget: int) -> CertificationResult:
    """Compare both greedy trees against the exhaustive optimum on one instance."""
    induced = induce(belief)
    avg_tree = greedy_policy_tree(belief, budget, "avg")
    worst_tree = greedy_policy_tree(belief, budget, "worst")
    _, avg_opt = optimal_policy("avg", induced, budget)
    _, worst_opt = optimal_policy("worst", induced, budget)
    return CertificationResult(
        instance=format_instance(belief),
        budget=budget,
        g_avg_greedy=eval_policy_avg(avg_tree, induced),
        g_avg_opt=avg_opt,
        g_worst_greedy=eval_policy_worst(worst_tree, induced),
        g_worst_opt=worst_opt,
    )


def random_finite_belief(
    rng, pool_size=3, num_labels=2, max_hypotheses=3, max_rates=2
) -> FiniteBelief:
    """A random enumerable instance, for certification sweeps."""
    num_h = int(rng.integers(1, max_hypotheses + 1))
    num_r = int(rng.integers(1, max_rates + 1))
    hypotheses = []
    for _ in range(num_h):
        pmfs = {}
        for x in range(pool_size):
            probs = rng.dirichlet(np.ones(num_labels))
            pmfs[x] = tuple(probs)
        hypotheses.append(ProbHypothesis(pmfs))
    rates = [
        RateFunction({x: float(rng.uniform()) for x in range(pool_size)})
        for _ in range(num_r)
    ]
    return FiniteBelief(
        hypotheses, rng.dirichlet(np.ones(num_h)), rates, rng.dirichlet(np.ones(num_r))
    )


def certify_bounds(
    pool_size=3,
    budget=2,
    trials=200,
    seed=0,
    num_labels=2,
    max_hypotheses=3,
    max_rates=2,
):
    """Run the bound check over ``trials`` random instances; returns a report dict."""
    rng = np.random.default_rng(seed)
    results = []
    failures = 0
    for _ in range(trials):
        belief = random_finite_belief(
            rng, pool_size, num_labels, max_hypotheses, max_rates
        )
        result = certify_instance(belief, budget)
        results.append(result)
        if not result.passed:
            failures += 1
    return {
        "trials": trials,
        "pool_size": pool_size,
        "budget": budget,
        "seed": seed,
        "factor": GREEDY_FACTOR,
        "failures": failures,
        "all_passed": failures == 0,
        "results": results,
    }


def report_to_json(report: dict) -> str:
    payload = dict(report)
    payload["results"] = [r.to_record() for r in report["results"]]
    return json.dumps(payload, indent=2, sort_keys=True)


# Instance files: a plain-text, line-oriented format for binary-label pools.
#   pool <m> labels 2
#   h <weight> <p(label 1 | x_0)> ... <p(label 1 | x_{m-1})>
#   r <weight> <rate(x_0)> ... <rate(x_{m-1})>


def format_instance(belief: FiniteBelief) -> str:
    if belief.num_labels != 2:
        raise ValueError("instance files support binary labels only")
    indices = _pool_indices(belief)
    lines = [f"pool {len(indices)} labels 2"]
    for h, w in zip(belief.hypotheses, belief.hypothesis_weights):
        probs = " ".join(f"{h.pmf(x)[0]:.17g}" for x in indices)
        lines.append(f"h {w:.17g} {probs}")
    for r, w in zip(belief.rates, belief.rate_weights):
        rates = " ".join(f"{r.rate(x):.17g}" for x in indices)
        lines.append(f"r {w:.17g} {rates}")
    return "\n".join(lines) + "\n"


def parse_instance(text: str) -> FiniteBelief:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise InstanceFormatError("empty instance")
    header = lines[0].split()
    if len(header) != 4 or header[0] != "pool" or header[2] != "labels":
        raise InstanceFormatError(f"bad header: {lines[0]!r}")
    try:
        m, num_labels = int(header[1]), int(header[3])
    except ValueError as err:
        raise InstanceFormatError(f"bad header: {lines[0]!r}") from err
    if num_labels != 2:
        raise InstanceFormatError("instance files support binary labels only")
    hypotheses, h_weights, rates, r_weights = [], [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if parts[0] not in ("h", "r") or len(parts) != m + 2:
            raise InstanceFormatError(f"line {lineno}: expected {m + 2} fields")
        try:
            weight = float(parts[1])
            values = [float(p) for p in parts[2:]]
        except ValueError as err:
            raise InstanceFormatError(f"line {lineno}: bad number") from err
        if parts[0] == "h":
            hypotheses.append(
                ProbHypothesis({x: (v, 1.0 - v) for x, v in enumerate(values)})
            )
            h_weights.append(weight)
        else:
            rates.append(RateFunction(dict(enumerate(values))))
            r_weights.append(weight)
    if not hypotheses or not rates:
        raise InstanceFormatError("instance needs at least one h line and one r line")
    return FiniteBelief(hypotheses, h_weights, rates, r_weights)


def load_instance(path) -> FiniteBelief:
    with open(path, encoding="utf-8") as fh:
        return parse_instance(fh.read())
