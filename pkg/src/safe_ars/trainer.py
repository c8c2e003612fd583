"""Safety-constrained augmented random search.

Each iteration samples ``N`` Gaussian directions and evaluates the
antithetic pair ``theta +/- nu * delta`` on ``m`` tasks with the combined
objective ``reward + lam * safety``. The top ``b`` directions, ranked by
``max(R+, R-)``, drive a reward-std-normalized step. Then ``alpha`` and
``nu`` decay and the safety multiplier is updated. Standard ARS is the same
loop with the multiplier pinned at zero.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from ._validation import ContractError, check_int, check_positive
from .checkpoint import Checkpoint
from .policy import RunningStats, initial_params, perturb
from .rollout import EnvFactory, RolloutEngine, RolloutResult, RolloutSpec, derive_seed

logger = logging.getLogger(__name__)

SIGMA_FLOOR = 1e-8
MULTIPLIERS = ("heuristic", "dual", "none")

# spawn-key tags that keep the seed streams of different purposes apart
_INIT_KEY = 0x1A17
_DELTA_KEY = 0
_TASK_KEY = 1
_ROLLOUT_KEY = 2


@dataclass(frozen=True)
class TrainerConfig:
    step_size: float = 0.02
    n_directions: int = 8
    noise: float = 0.03
    n_top: int = 4
    n_rollouts: int = 1
    decay: float = 1.0
    n_iter: int = 100
    lambda_init: float = 1.0
    multiplier: str = "heuristic"
    dual_step: float = 1.0
    lambda_min: float = 1 / 64
    lambda_max: float = 1024.0
    gamma: float = 1.0  # kept for completeness; rollout returns are undiscounted
    seed: int = 0
    init_scale: float = 0.01
    bias: bool = True

    def __post_init__(self):
        check_positive(self.step_size, "step_size")
        check_positive(self.noise, "noise")
        check_positive(self.lambda_init, "lambda_init")
        check_positive(self.dual_step, "dual_step")
        check_positive(self.lambda_min, "lambda_min")
        check_positive(self.init_scale, "init_scale", allow_zero=True)
        check_int(self.n_directions, "n_directions", minimum=1)
        check_int(self.n_top, "n_top", minimum=1)
        check_int(self.n_rollouts, "n_rollouts", minimum=1)
        check_int(self.n_iter, "n_iter", minimum=0)
        check_int(self.seed, "seed", minimum=0)
        if self.n_top > self.n_directions:
            raise ContractError("n_top must not exceed n_directions")
        if not 0 < self.decay <= 1:
            raise ContractError("decay must lie in (0, 1]")
        if self.lambda_max < self.lambda_min:
            raise ContractError("lambda_max must be >= lambda_min")
        if self.multiplier not in MULTIPLIERS:
            raise ContractError(f"multiplier must be one of {MULTIPLIERS}")
        if not 0 < self.gamma <= 1:
            raise ContractError("gamma must lie in (0, 1]")

    @property
    def safe(self) -> bool:
        return self.multiplier != "none"


@dataclass(frozen=True)
class DirectionResult:
    index: int
    reward_plus: float
    reward_minus: float
    violations: tuple[bool, ...] = ()
    mean_safety: tuple[float, ...] = ()

    @property
    def best(self) -> float:
        return max(self.reward_plus, self.reward_minus)


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    lam: float
    alpha: float
    nu: float
    best_combined: float
    mean_combined: float
    mean_plain: float
    violation_count: int
    mean_safety: float
    wall_clock: float = field(default=0.0, compare=False)

    def metrics(self) -> dict:
        """Deterministic fields only (wall-clock excluded)."""
        d = asdict(self)
        d.pop("wall_clock")
        return d


class RolloutError(RuntimeError):
    def __init__(self, failures: Sequence[RolloutResult]):
        self.failures = list(failures)
        first = self.failures[0]
        super().__init__(
            f"{len(self.failures)} rollout(s) failed; first at "
            f"(iteration, direction, side, rollout)={first.identity}: {first.error}"
        )


def select_top_b(results: Sequence[DirectionResult], b: int) -> tuple[list[int], float]:
    """Positions of the ``b`` best directions (ascending) and their reward std."""
    if not results:
        raise ContractError("no direction results to select from")
    if not 1 <= b <= len(results):
        raise ContractError(f"b must lie in [1, {len(results)}], got {b}")
    order = sorted(range(len(results)), key=lambda i: (-results[i].best, results[i].index))
    chosen = sorted(order[:b], key=lambda i: results[i].index)
    values = [r for i in chosen for r in (results[i].reward_plus, results[i].reward_minus)]
    sigma = float(np.std(values))
    if sigma < SIGMA_FLOOR:
        sigma = 1.0
    return chosen, sigma


def update_weights(
    theta: np.ndarray,
    selected: Sequence[DirectionResult],
    deltas: Sequence[np.ndarray],
    sigma_b: float,
    alpha: float,
) -> np.ndarray:
    """``theta + alpha / (b * sigma_b) * sum (R+ - R-) delta`` over ``selected``."""
    if not sigma_b > 0:
        raise ContractError("sigma_b must be positive")
    step = np.zeros_like(theta, dtype=float)
    for res, delta in zip(selected, deltas):
        diff = res.reward_plus - res.reward_minus
        if not np.isfinite(diff):
            raise ContractError(f"non-finite reward for direction {res.index}")
        step = step + diff * np.asarray(delta, dtype=float)
    return theta + (alpha / (len(selected) * sigma_b)) * step


def decay(alpha: float, nu: float, eps: float) -> tuple[float, float]:
    if not 0 < eps <= 1:
        raise ContractError("decay rate must lie in (0, 1]")
    return eps * alpha, eps * nu


def update_multiplier_heuristic(
    lam: float, any_violation: bool, lambda_min: float = 1 / 64, lambda_max: float = 1024.0
) -> float:
    """Double on violation, halve otherwise, clamped to the guard interval."""
    check_positive(lam, "lambda")
    lam = 2.0 * lam if any_violation else lam / 2.0
    return min(max(lam, lambda_min), lambda_max)


def update_multiplier_dual(
    lam: float, mean_safety: float, step: float, lambda_min: float = 1 / 64
) -> float:
    """One descent step on the dual; the gradient in lambda is the mean safety."""
    check_positive(lam, "lambda")
    check_positive(step, "dual step")
    return max(lambda_min, lam - step * mean_safety)


def sample_directions(seed: int, iteration: int, n: int, shape) -> list[np.ndarray]:
    return [
        np.random.default_rng(derive_seed(seed, iteration, d, _DELTA_KEY)).standard_normal(shape)
        for d in range(n)
    ]


def assign_tasks(seed: int, iteration: int, direction: int, m: int, n_tasks: int) -> list[int]:
    """Task positions for the ``m`` rollouts of one direction (shared by both sides)."""
    perm = np.random.default_rng(derive_seed(seed, iteration, direction, _TASK_KEY)).permutation(n_tasks)
    return [int(perm[k % n_tasks]) for k in range(m)]


def initial_checkpoint(config: TrainerConfig, env, config_hash: str = "") -> Checkpoint:
    rng = np.random.default_rng(derive_seed(config.seed, _INIT_KEY))
    params = initial_params(
        env.action_dim, env.obs_dim, rng,
        scale=config.init_scale,
        action_low=env.action_low, action_high=env.action_high,
        bias=config.bias,
    )
    return Checkpoint(
        iteration=0,
        weights=params.weights,
        stats=RunningStats.empty(env.obs_dim),
        lam=config.lambda_init if config.safe else 0.0,
        alpha=config.step_size,
        nu=config.noise,
        seed=config.seed,
        action_low=float(env.action_low),
        action_high=float(env.action_high),
        bias=config.bias,
        config_hash=config_hash,
    )


def train_iteration(
    state: Checkpoint,
    config: TrainerConfig,
    tasks: Sequence,
    engine,
    direction_sampler: Callable = sample_directions,
) -> tuple[Checkpoint, IterationRecord]:
    """Run one iteration and return the new state; raises before any update on failure."""
    t0 = time.perf_counter()
    i = state.iteration
    policy = state.policy()
    deltas = direction_sampler(config.seed, i, config.n_directions, policy.weights.shape)
    specs = []
    for d, delta in enumerate(deltas):
        task_ids = assign_tasks(config.seed, i, d, config.n_rollouts, len(tasks))
        for side in (1, -1):
            candidate = perturb(policy, delta, state.nu, side)
            for k, task in enumerate(task_ids):
                specs.append(RolloutSpec(
                    iteration=i, direction=d, side=side, rollout=k,
                    scenario=tasks[task], policy=candidate, stats=state.stats,
                    lam=state.lam, seed=derive_seed(config.seed, i, d, _ROLLOUT_KEY, k),
                ))
    results = engine.execute_batch(specs)
    failures = [r for r in results if not r.ok]
    if failures:
        raise RolloutError(failures)

    by_id = {r.identity: r for r in results}
    m = config.n_rollouts
    dir_results = []
    for d in range(config.n_directions):
        plus = [by_id[(i, d, 1, k)] for k in range(m)]
        minus = [by_id[(i, d, -1, k)] for k in range(m)]
        # fixed order keeps the sums reproducible
        both = plus + minus
        dir_results.append(DirectionResult(
            index=d,
            reward_plus=sum(r.total_combined for r in plus) / m,
            reward_minus=sum(r.total_combined for r in minus) / m,
            violations=tuple(r.violation for r in both),
            mean_safety=tuple(r.mean_safety for r in both),
        ))

    chosen, sigma_b = select_top_b(dir_results, config.n_top)
    weights = update_weights(
        policy.weights, [dir_results[c] for c in chosen], [deltas[c] for c in chosen],
        sigma_b, state.alpha,
    )
    alpha, nu = decay(state.alpha, state.nu, config.decay)

    n_viol = sum(r.violation for r in results)
    mean_safety = float(sum(r.mean_safety for r in results) / len(results))
    if config.multiplier == "heuristic":
        lam = update_multiplier_heuristic(state.lam, n_viol > 0, config.lambda_min, config.lambda_max)
    elif config.multiplier == "dual":
        lam = update_multiplier_dual(state.lam, mean_safety, config.dual_step, config.lambda_min)
    else:
        lam = 0.0

    stats = state.stats
    for res in results:  # ordered by (direction, side, rollout)
        stats = stats.merged(res.stats_delta)

    combined = [r.total_combined for r in results]
    record = IterationRecord(
        iteration=i + 1,
        lam=lam,
        alpha=alpha,
        nu=nu,
        best_combined=float(max(combined)),
        mean_combined=float(sum(combined) / len(combined)),
        mean_plain=float(sum(r.total_plain for r in results) / len(results)),
        violation_count=int(n_viol),
        mean_safety=mean_safety,
        wall_clock=time.perf_counter() - t0,
    )
    new_state = state.replace(
        iteration=i + 1, weights=weights, stats=stats, lam=lam, alpha=alpha, nu=nu
    )
    return new_state, record


def train(
    config: TrainerConfig,
    env_factory: EnvFactory,
    tasks: Sequence,
    *,
    start: Checkpoint | None = None,
    parallelism: int = 1,
    engine=None,
    direction_sampler: Callable = sample_directions,
    callback: Callable[[Checkpoint, IterationRecord], None] | None = None,
    config_hash: str = "",
) -> tuple[Checkpoint, list[IterationRecord]]:
    """Run iterations ``start.iteration + 1 .. config.n_iter``.

    ``engine`` overrides the rollout engine (anything with
    ``execute_batch(specs)``). ``callback`` sees every new state and record.
    """
    if not tasks:
        raise ContractError("task set must be non-empty")
    state = start if start is not None else initial_checkpoint(config, env_factory(), config_hash)
    records: list[IterationRecord] = []
    own_engine = engine is None
    if own_engine:
        engine = RolloutEngine(env_factory, parallelism).__enter__()
    try:
        while state.iteration < config.n_iter:
            state, record = train_iteration(state, config, tasks, engine, direction_sampler)
            records.append(record)
            logger.info(
                "iter %d lam=%.4g mean=%.4f best=%.4f viol=%d",
                record.iteration, record.lam, record.mean_combined,
                record.best_combined, record.violation_count,
            )
            if callback is not None:
                callback(state, record)
    finally:
        if own_engine:
            engine.close()
    return state, records


def evaluate(
    state: Checkpoint,
    env_factory: EnvFactory,
    scenarios: Sequence,
    *,
    seed: int = 12345,
    record: bool = False,
    parallelism: int = 1,
) -> list[RolloutResult]:
    """Unperturbed rollouts of the current policy with frozen statistics.

    The multiplier is irrelevant here; totals are plain rewards.
    """
    policy = state.policy()
    specs = [
        RolloutSpec(
            iteration=state.iteration, direction=0, side=0, rollout=k, scenario=sc,
            policy=policy, stats=state.stats, lam=0.0,
            seed=derive_seed(seed, k), record=record,
        )
        for k, sc in enumerate(scenarios)
    ]
    with RolloutEngine(env_factory, parallelism) as engine:
        results = engine.execute_batch(specs)
    failures = [r for r in results if not r.ok]
    if failures:
        raise RolloutError(failures)
    return results

