"""Linear squashed policy, running observation statistics and perturbations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import ContractError, check_positive, check_vector

STD_FLOOR = 1e-8


@dataclass
class RunningStats:
    """Welford accumulator for per-component mean and population std.

    With ``count == 0`` the statistics read as zero mean and unit std, so
    a fresh accumulator normalizes as the identity.
    """

    count: int
    mean: np.ndarray
    m2: np.ndarray

    @classmethod
    def empty(cls, dim: int) -> "RunningStats":
        return cls(0, np.zeros(dim), np.zeros(dim))

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @property
    def var(self) -> np.ndarray:
        if self.count == 0:
            return np.ones(self.dim)
        return self.m2 / self.count

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.var)

    def copy(self) -> "RunningStats":
        return RunningStats(self.count, self.mean.copy(), self.m2.copy())

    def push(self, obs) -> None:
        """In-place update with one observation."""
        x = np.asarray(obs, dtype=float)
        if x.shape != self.mean.shape:
            raise ContractError(f"observation shape {x.shape} != stats shape {self.mean.shape}")
        if not np.all(np.isfinite(x)):
            raise ContractError("non-finite observation")
        self.count += 1
        d = x - self.mean
        self.mean = self.mean + d / self.count
        self.m2 = self.m2 + d * (x - self.mean)

    def merged(self, other: "RunningStats") -> "RunningStats":
        """Pooled statistics of two disjoint samples (Chan et al. update)."""
        if other.dim != self.dim:
            raise ContractError("cannot merge statistics of different dimension")
        if other.count == 0:
            return self.copy()
        if self.count == 0:
            return other.copy()
        n = self.count + other.count
        d = other.mean - self.mean
        mean = self.mean + d * (other.count / n)
        m2 = self.m2 + other.m2 + d * d * (self.count * other.count / n)
        return RunningStats(n, mean, m2)

    def scale(self) -> np.ndarray:
        """Divisor used by :func:`normalize` (std with tiny values replaced by 1)."""
        s = self.std
        return np.where(s < STD_FLOOR, 1.0, s)


def update_stats(stats: RunningStats, obs) -> RunningStats:
    """Return a new accumulator that also includes ``obs``."""
    out = stats.copy()
    out.push(obs)
    return out


def normalize(obs, stats: RunningStats) -> np.ndarray:
    x = np.asarray(obs, dtype=float)
    if x.shape != stats.mean.shape:
        raise ContractError(f"observation shape {x.shape} != stats shape {stats.mean.shape}")
    return (x - stats.mean) / stats.scale()


@dataclass
class PolicyParams:
    """Weights of ``a = low + (high - low) * (tanh(W z) + 1) / 2``.

    ``z`` is the normalized observation, extended with a trailing constant 1
    when ``bias`` is set, so ``weights`` has shape
    ``(action_dim, obs_dim + bias)``.
    """

    weights: np.ndarray
    action_low: np.ndarray | float = -0.2
    action_high: np.ndarray | float = 0.0
    bias: bool = True

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.ndim != 2:
            raise ContractError("policy weights must be a 2-D matrix")
        if not np.all(np.isfinite(self.weights)):
            raise ContractError("policy weights must be finite")
        if not np.all(np.asarray(self.action_low) < np.asarray(self.action_high)):
            raise ContractError("action_low must be below action_high")

    @property
    def action_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def obs_dim(self) -> int:
        return self.weights.shape[1] - int(self.bias)

    def with_weights(self, weights: np.ndarray) -> "PolicyParams":
        return PolicyParams(weights, self.action_low, self.action_high, self.bias)


def initial_params(
    action_dim: int,
    obs_dim: int,
    rng: np.random.Generator,
    *,
    scale: float = 0.01,
    action_low=-0.2,
    action_high=0.0,
    bias: bool = True,
) -> PolicyParams:
    """Small i.i.d. normal starting weights."""
    w = rng.normal(0.0, scale, size=(action_dim, obs_dim + int(bias)))
    return PolicyParams(w, action_low, action_high, bias)


def act(params: PolicyParams, normalized_obs) -> np.ndarray:
    z = check_vector(normalized_obs, "observation", size=params.obs_dim)
    if params.bias:
        raw = params.weights[:, :-1] @ z + params.weights[:, -1]
    else:
        raw = params.weights @ z
    return squash(raw, params.action_low, params.action_high)


def squash(raw, low, high) -> np.ndarray:
    a = low + (high - low) * (np.tanh(raw) + 1.0) * 0.5
    # tanh rounding can land a hair outside the box
    return np.clip(a, low, high)


def perturb(params: PolicyParams, delta: np.ndarray, nu: float, sign: int) -> PolicyParams:
    """Antithetic copy ``weights + sign * nu * delta``; ``params`` is untouched."""
    check_positive(nu, "nu")
    if sign not in (1, -1):
        raise ContractError("sign must be +1 or -1")
    delta = np.asarray(delta, dtype=float)
    if delta.shape != params.weights.shape:
        raise ContractError("perturbation shape must match the policy weights")
    return params.with_weights(params.weights + sign * nu * delta)


class ObservationNormalizer(TransformerMixin, BaseEstimator):
    """Streaming standardizer over observation rows.

    ``fit`` restarts the statistics, ``partial_fit`` keeps accumulating, and
    ``transform`` applies ``(x - mean) / std`` with the identity used for an
    empty accumulator.
    """

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        self.stats_ = RunningStats.empty(X.shape[1])
        return self.partial_fit(X)

    def partial_fit(self, X, y=None):
        X = check_array(X, dtype=float)
        if not hasattr(self, "stats_"):
            self.stats_ = RunningStats.empty(X.shape[1])
        if X.shape[1] != self.stats_.dim:
            raise ValueError(
                f"X has {X.shape[1]} features, normalizer was fitted with {self.stats_.dim}"
            )
        for row in X:
            self.stats_.push(row)
        self.n_features_in_ = self.stats_.dim
        return self

    @property
    def mean_(self) -> np.ndarray:
        check_is_fitted(self, "stats_")
        return self.stats_.mean

    @property
    def scale_(self) -> np.ndarray:
        check_is_fitted(self, "stats_")
        return self.stats_.scale()

    def transform(self, X):
        check_is_fitted(self, "stats_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.stats_.dim:
            raise ValueError(
                f"X has {X.shape[1]} features, normalizer was fitted with {self.stats_.dim}"
            )
        return (X - self.stats_.mean) / self.stats_.scale()
