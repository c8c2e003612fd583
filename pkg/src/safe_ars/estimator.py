"""scikit-learn style front end for safe and standard ARS."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .checkpoint import Checkpoint
from .policy import squash
from .trainer import IterationRecord, TrainerConfig, evaluate, train


class SafeARS(BaseEstimator):
    """Linear-policy augmented random search with a safety multiplier.

    ``fit`` takes an environment factory and a task list instead of a data
    matrix; ``predict`` maps raw observation rows to actions. Setting
    ``multiplier="none"`` gives standard ARS (multiplier fixed at zero).

    Parameters
    ----------
    n_iter : int
        Total iterations. With ``warm_start=True`` a refit continues from
        the current iteration up to ``n_iter``.
    step_size, noise : float
        Initial step size and exploration noise; both decay by ``decay``
        every iteration.
    n_directions, n_top, n_rollouts : int
        Directions per iteration, directions kept for the update, and
        rollouts (tasks) per side of each direction.
    multiplier : {"heuristic", "dual", "none"}
        How the safety multiplier moves between iterations.
    random_state : int
        Master seed. Every random stream is derived from it and the
        iteration counter.
    n_jobs : int
        Rollout worker processes. Results do not depend on it.
    """

    def __init__(
        self,
        n_iter: int = 100,
        step_size: float = 0.02,
        n_directions: int = 8,
        n_top: int = 4,
        n_rollouts: int = 1,
        noise: float = 0.03,
        decay: float = 1.0,
        lambda_init: float = 1.0,
        multiplier: str = "heuristic",
        dual_step: float = 1.0,
        lambda_min: float = 1 / 64,
        lambda_max: float = 1024.0,
        gamma: float = 1.0,
        init_scale: float = 0.01,
        bias: bool = True,
        random_state: int = 0,
        n_jobs: int = 1,
        warm_start: bool = False,
    ):
        self.n_iter = n_iter
        self.step_size = step_size
        self.n_directions = n_directions
        self.n_top = n_top
        self.n_rollouts = n_rollouts
        self.noise = noise
        self.decay = decay
        self.lambda_init = lambda_init
        self.multiplier = multiplier
        self.dual_step = dual_step
        self.lambda_min = lambda_min
        self.lambda_max = lambda_max
        self.gamma = gamma
        self.init_scale = init_scale
        self.bias = bias
        self.random_state = random_state
        self.n_jobs = n_jobs
        self.warm_start = warm_start

    def trainer_config(self) -> TrainerConfig:
        if not isinstance(self.random_state, numbers.Integral):
            raise ValueError("random_state must be an integer seed")
        return TrainerConfig(
            step_size=self.step_size,
            n_directions=self.n_directions,
            noise=self.noise,
            n_top=self.n_top,
            n_rollouts=self.n_rollouts,
            decay=self.decay,
            n_iter=self.n_iter,
            lambda_init=self.lambda_init,
            multiplier=self.multiplier,
            dual_step=self.dual_step,
            lambda_min=self.lambda_min,
            lambda_max=self.lambda_max,
            gamma=self.gamma,
            seed=int(self.random_state),
            init_scale=self.init_scale,
            bias=self.bias,
        )

    def fit(self, env_factory, tasks, *, callback=None, config_hash: str = ""):
        config = self.trainer_config()
        start = None
        if self.warm_start and hasattr(self, "checkpoint_"):
            start = self.checkpoint_
        state, records = train(
            config, env_factory, list(tasks),
            start=start, parallelism=self.n_jobs, callback=callback,
            config_hash=config_hash,
        )
        history = list(self.history_) if start is not None else []
        self._set_state(state, history + records)
        return self

    def _set_state(self, state: Checkpoint, history: list[IterationRecord]):
        self.checkpoint_ = state
        self.coef_ = state.weights
        self.stats_ = state.stats
        self.lambda_ = state.lam
        self.n_iter_ = state.iteration
        self.history_ = history
        self.n_features_in_ = state.stats.dim

    @classmethod
    def from_checkpoint(cls, checkpoint: Checkpoint, **params) -> "SafeARS":
        est = cls(random_state=checkpoint.seed, bias=checkpoint.bias, **params)
        est._set_state(checkpoint, [])
        return est

    def predict(self, X) -> np.ndarray:
        """Actions for raw (unnormalized) observation rows."""
        check_is_fitted(self, "checkpoint_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, policy expects {self.n_features_in_}"
            )
        Z = (X - self.stats_.mean) / self.stats_.scale()
        W = self.coef_
        raw = Z @ W[:, :-1].T + W[:, -1] if self.checkpoint_.bias else Z @ W.T
        ck = self.checkpoint_
        return squash(raw, ck.action_low, ck.action_high)

    def evaluate(self, env_factory, scenarios, *, seed: int = 12345, record: bool = False):
        check_is_fitted(self, "checkpoint_")
        return evaluate(self.checkpoint_, env_factory, list(scenarios), seed=seed,
                        record=record, parallelism=self.n_jobs)

    def score(self, env_factory, scenarios, *, seed: int = 12345) -> float:
        """Mean undiscounted plain-reward return over ``scenarios``."""
        results = self.evaluate(env_factory, scenarios, seed=seed)
        return float(np.mean([r.total_plain for r in results]))
