"""MAP logistic-regression plugin beliefs for dataset-scale runs.

At dataset scale the exact finite-space posterior is replaced by point
estimates: an L2-regularized (Gaussian-prior) logistic regression fitted to
the accumulated label observations stands in for the label posterior, and a
second one fitted to the accumulated abstain/answer observations stands in
for the abstention-rate posterior. Both models are refit from scratch on
every observation, so the belief state is always the exact per-iteration MAP
and runs are deterministic.

The fitter is a damped Newton method on the regularized negative
log-likelihood with an Armijo backtracking line search. The objective is
strongly convex (the Gaussian prior contributes ``1/sigma2`` to the Hessian
everywhere), so the iteration converges globally; it stops once the gradient
2-norm drops to 1e-6, with a hard cap of 500 iterations.
"""

from dataclasses import dataclass

import numpy as np

from .core import AbstainALError, Belief, Dataset, Example

GRAD_TOL = 1e-6
MAX_NEWTON_ITERS = 500
DEFAULT_SIGMA2 = 0.5

# |z| <= 36 keeps sigmoid strictly inside (0, 1) in float64.
_SIGMOID_CLIP = 36.0


class BadInputError(AbstainALError):
    """Observations contain non-finite values or invalid targets."""


def sigmoid(z):
    """Numerically stable logistic function, strictly inside (0, 1).

    Computed from exp(-|z|) so that sigmoid(-z) == 1 - sigmoid(z) holds
    exactly in floating point.
    """
    zc = np.clip(z, -_SIGMOID_CLIP, _SIGMOID_CLIP)
    t = np.exp(-np.abs(zc))
    pos = 1.0 / (1.0 + t)
    return np.where(zc >= 0, pos, 1.0 - pos)


@dataclass(frozen=True, eq=False)
class LinearModel:
    """Logistic model: probability = sigmoid(weights . x + intercept)."""

    weights: np.ndarray
    intercept: float
    prior_variance: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.weights)) or not np.isfinite(self.intercept):
            raise ValueError("model parameters must be finite")

    def decision(self, example: Example) -> float:
        w = self.weights
        z = self.intercept
        for i, v in example.features:
            if i < len(w):
                z += w[i] * v
        return z

    def decision_matrix(self, features: np.ndarray) -> np.ndarray:
        d = min(features.shape[1], len(self.weights))
        return features[:, :d] @ self.weights[:d] + self.intercept


def predict_proba(model: LinearModel, example: Example) -> float:
    """Probability of the positive class for one example."""
    return float(sigmoid(model.decision(example)))


def _design_matrix(observations, dim: int | None):
    feats = []
    targets = []
    for features, target in observations:
        if hasattr(features, "features"):
            features = features.features
        if target not in (0, 1):
            raise BadInputError(f"target {target} is not binary")
        feats.append(features)
        targets.append(target)
    if dim is None:
        dim = max((f[-1][0] + 1 for f in feats if f), default=0)
    x = np.zeros((len(feats), dim))
    for row, features in enumerate(feats):
        for i, v in features:
            if not np.isfinite(v):
                raise BadInputError("non-finite feature value")
            if i < dim:
                x[row, i] = v
    return x, np.array(targets, dtype=float), dim


def map_objective(theta, x, t, sigma2):
    """Regularized log-likelihood (the quantity fit_map maximizes) and gradient.

    ``theta`` stacks the weights followed by the intercept; the intercept is a
    parameter like any other and is penalized identically.
    """
    z = x @ theta[:-1] + theta[-1]
    # log Bernoulli(t | sigmoid(z)) = t*z - log(1 + e^z), stably via logaddexp
    loglik = float(np.sum(t * z - np.logaddexp(0.0, z)))
    penalty = float(theta @ theta) / (2.0 * sigma2)
    p = sigmoid(z)
    grad = np.empty_like(theta)
    grad[:-1] = x.T @ (t - p) - theta[:-1] / sigma2
    grad[-1] = np.sum(t - p) - theta[-1] / sigma2
    return loglik - penalty, grad


def fit_map(observations, sigma2: float = DEFAULT_SIGMA2, dim: int | None = None) -> LinearModel:
    """MAP estimate of a logistic model under independent N(0, sigma2) priors.

    With no observations the prior mode (all-zero parameters) is returned, so
    every predicted probability is 0.5. Otherwise damped Newton iterations run
    until the objective gradient 2-norm is at most 1e-6.
    """
    if sigma2 <= 0:
        raise ValueError("prior variance must be positive")
    observations = list(observations)
    if not observations:
        return LinearModel(np.zeros(dim or 0), 0.0, sigma2)
    x, t, dim = _design_matrix(observations, dim)
    theta = np.zeros(dim + 1)
    value, grad = map_objective(theta, x, t, sigma2)
    for _ in range(MAX_NEWTON_ITERS):
        if np.linalg.norm(grad) <= GRAD_TOL:
            break
        z = x @ theta[:-1] + theta[-1]
        p = sigmoid(z)
        s = p * (1.0 - p)
        xa = np.hstack([x, np.ones((len(t), 1))])
        hessian = xa.T @ (xa * s[:, None])
        hessian[np.diag_indices_from(hessian)] += 1.0 / sigma2
        step = np.linalg.solve(hessian, grad)
        # Backtracking keeps the ascent globally convergent.
        slope = float(grad @ step)
        alpha = 1.0
        for _ in range(60):
            cand = theta + alpha * step
            cand_value, cand_grad = map_objective(cand, x, t, sigma2)
            if cand_value >= value + 1e-4 * alpha * slope:
                break
            alpha *= 0.5
        theta, value, grad = cand, cand_value, cand_grad
    weights = theta[:-1].copy()
    weights.flags.writeable = False
    return LinearModel(weights, float(theta[-1]), sigma2)


class FixedRate:
    """An immutable abstention-rate predictor built once and never refitted."""

    def __init__(self, model: LinearModel):
        self.model = model

    def __call__(self, example: Example) -> float:
        return predict_proba(self.model, example)

    def rate_vector(self, dataset: Dataset, indices) -> np.ndarray:
        features = dataset.dense_matrix(max(len(self.model.weights), 1))
        z = self.model.decision_matrix(features[np.asarray(indices, dtype=int)])
        return np.asarray(sigmoid(z))


def fixed_rate_estimator(pattern, sigma2: float = DEFAULT_SIGMA2, dim: int | None = None) -> FixedRate:
    """Fit a rate predictor to a whole-pool abstention pattern and freeze it.

    ``pattern`` is a sequence of ``(features, z)`` pairs with ``z = 1`` where
    the labeler abstains. An empty pattern yields the prior mode (rate 0.5
    everywhere).
    """
    return FixedRate(fit_map(pattern, sigma2, dim))


class PluginBelief(Belief):
    """Belief backed by per-iteration MAP refits instead of exact posteriors.

    Binary label spaces use a single model for label 2 versus label 1; larger
    label spaces use one-vs-rest models with normalized scores. Every queried
    example contributes exactly one abstain observation (0 if it was labeled,
    1 if not); labeled examples additionally contribute a label observation.
    """

    def __init__(
        self,
        num_labels: int,
        feature_dim: int,
        sigma2_label: float = DEFAULT_SIGMA2,
        sigma2_abstain: float = DEFAULT_SIGMA2,
        label_observations=(),
        abstain_observations=(),
        label_models=None,
        abstain_model=None,
    ):
        if num_labels < 2:
            raise ValueError("need at least 2 labels")
        self._num_labels = num_labels
        self.feature_dim = feature_dim
        self.sigma2_label = sigma2_label
        self.sigma2_abstain = sigma2_abstain
        self.label_observations = tuple(label_observations)
        self.abstain_observations = tuple(abstain_observations)
        if label_models is None:
            label_models = self._fit_label_models()
        if abstain_model is None:
            abstain_model = self._fit_abstain_model()
        self.label_models = label_models
        self.abstain_model = abstain_model

    def _fit_label_models(self):
        if self._num_labels == 2:
            obs = [(ex, 1 if y == 2 else 0) for ex, y in self.label_observations]
            return (fit_map(obs, self.sigma2_label, self.feature_dim),)
        models = []
        for label in range(1, self._num_labels + 1):
            obs = [(ex, 1 if y == label else 0) for ex, y in self.label_observations]
            models.append(fit_map(obs, self.sigma2_label, self.feature_dim))
        return tuple(models)

    def _fit_abstain_model(self):
        return fit_map(
            self.abstain_observations, self.sigma2_abstain, self.feature_dim
        )

    def _replace(self, label_observations=None, abstain_observations=None):
        refit_labels = label_observations is not None
        refit_abstain = abstain_observations is not None
        return PluginBelief(
            self._num_labels,
            self.feature_dim,
            self.sigma2_label,
            self.sigma2_abstain,
            self.label_observations if not refit_labels else label_observations,
            self.abstain_observations if not refit_abstain else abstain_observations,
            None if refit_labels else self.label_models,
            None if refit_abstain else self.abstain_model,
        )

    @property
    def num_labels(self) -> int:
        return self._num_labels

    def predictive_pmf(self, example) -> np.ndarray:
        if self._num_labels == 2:
            p = predict_proba(self.label_models[0], example)
            return np.array([1.0 - p, p])
        scores = np.array([predict_proba(m, example) for m in self.label_models])
        return scores / scores.sum()

    def estimated_rate(self, example) -> float:
        return predict_proba(self.abstain_model, example)

    def update_on_label(self, example, label: int) -> "PluginBelief":
        if not 1 <= label <= self._num_labels:
            raise ValueError(f"label {label} out of range 1..{self._num_labels}")
        return self._replace(
            label_observations=self.label_observations + ((example, label),),
            abstain_observations=self.abstain_observations + ((example, 0),),
        )

    def update_on_abstain(self, example) -> "PluginBelief":
        return self._replace(
            abstain_observations=self.abstain_observations + ((example, 1),),
        )

    # Vectorized paths used by policies and accuracy evaluation.

    def pmf_matrix(self, dataset: Dataset, indices) -> np.ndarray:
        features = dataset.dense_matrix(max(self.feature_dim, 1))
        rows = features[np.asarray(indices, dtype=int)]
        if self._num_labels == 2:
            p = np.asarray(sigmoid(self.label_models[0].decision_matrix(rows)))
            return np.column_stack([1.0 - p, p])
        scores = np.column_stack(
            [np.asarray(sigmoid(m.decision_matrix(rows))) for m in self.label_models]
        )
        return scores / scores.sum(axis=1, keepdims=True)

    def rate_vector(self, dataset: Dataset, indices) -> np.ndarray:
        features = dataset.dense_matrix(max(self.feature_dim, 1))
        rows = features[np.asarray(indices, dtype=int)]
        return np.asarray(sigmoid(self.abstain_model.decision_matrix(rows)))

    def predict_labels(self, dataset: Dataset) -> np.ndarray:
        pmf = self.pmf_matrix(dataset, range(len(dataset)))
        return np.argmax(pmf, axis=1) + 1
