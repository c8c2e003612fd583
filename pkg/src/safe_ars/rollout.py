"""Rollout execution: learner -> workers -> actors.

One actor runs one episode for one perturbed policy on one task. Workers
own all rollouts of a direction and run their actors in turn. Worker
batches are spread over a process pool when ``parallelism > 1``. Rollouts
are pure functions of their spec, so neither the worker count nor the
completion order can change any result.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .policy import PolicyParams, RunningStats, act

logger = logging.getLogger(__name__)

EnvFactory = Callable[[], Any]


def derive_seed(master_seed: int, *key: int) -> int:
    """64-bit seed that depends only on ``master_seed`` and ``key``."""
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class RolloutSpec:
    iteration: int
    direction: int
    side: int  # +1 / -1, or 0 for an unperturbed evaluation rollout
    rollout: int
    scenario: Any
    policy: PolicyParams
    stats: RunningStats
    lam: float
    seed: int
    record: bool = False

    @property
    def identity(self) -> tuple[int, int, int, int]:
        return (self.iteration, self.direction, self.side, self.rollout)


@dataclass
class RolloutResult:
    identity: tuple[int, int, int, int]
    total_combined: float = 0.0
    total_plain: float = 0.0
    safety_trace: tuple[float, ...] = ()
    violation: bool = False
    blackout: bool = False
    n_steps: int = 0
    stats_delta: RunningStats | None = None
    trajectory: list | None = field(default=None, repr=False)
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def mean_safety(self) -> float:
        if not self.safety_trace:
            return 0.0
        return float(sum(self.safety_trace) / len(self.safety_trace))


def run_rollout(spec: RolloutSpec, env_factory: EnvFactory) -> RolloutResult:
    """Run one episode with frozen normalization statistics.

    Environment or policy failures come back as an error result carrying
    the spec identity instead of propagating.
    """
    try:
        return _run(spec, env_factory)
    except Exception as exc:  # noqa: BLE001 - isolate actor failures
        logger.debug("rollout %s failed", spec.identity, exc_info=True)
        return RolloutResult(spec.identity, error=f"{type(exc).__name__}: {exc}")


def _run(spec: RolloutSpec, env_factory: EnvFactory) -> RolloutResult:
    env = env_factory()
    obs = env.reset(spec.scenario, seed=spec.seed)
    mean, scale = spec.stats.mean, spec.stats.scale()
    seen = []
    plain = 0.0
    trace: list[float] = []
    rows = [] if spec.record else None
    blackout = False
    n = 0
    done = False
    while not done:
        action = act(spec.policy, (obs - mean) / scale)
        obs, reward, safety, done, info = env.step(action)
        n += 1
        seen.append(obs)
        plain += reward
        if safety is not None:
            trace.append(safety)
        if info.get("blackout"):
            blackout = True
        if rows is not None:
            rows.append((obs, action, reward, safety, info))
    combined = plain + spec.lam * sum(trace)
    X = np.asarray(seen, dtype=float)
    mu = X.mean(axis=0)
    delta = RunningStats(len(seen), mu, ((X - mu) ** 2).sum(axis=0))
    return RolloutResult(
        identity=spec.identity,
        total_combined=combined,
        total_plain=plain,
        safety_trace=tuple(trace),
        violation=bool(trace) and min(trace) < 0,
        blackout=blackout,
        n_steps=n,
        stats_delta=delta,
        trajectory=rows,
    )


def _worker(specs: Sequence[RolloutSpec], env_factory: EnvFactory) -> list[RolloutResult]:
    # each spec is handed to its own actor; actors of one worker run in turn
    return [run_rollout(s, env_factory) for s in specs]


def _assign(specs: Sequence[RolloutSpec], n_workers: int) -> list[list[int]]:
    """Static round-robin of directions over workers; returns spec positions."""
    batches: list[list[int]] = [[] for _ in range(n_workers)]
    for pos, spec in enumerate(specs):
        batches[spec.direction % n_workers].append(pos)
    return [b for b in batches if b]


class RolloutEngine:
    """Executes batches of rollout specs with a fixed degree of parallelism.

    Use as a context manager so the process pool is shared across the
    iterations of a training run.
    """

    def __init__(self, env_factory: EnvFactory, parallelism: int = 1):
        if parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        self.env_factory = env_factory
        self.parallelism = parallelism
        self._pool: ProcessPoolExecutor | None = None
        self.n_resets = 0

    def __enter__(self):
        if self.parallelism > 1:
            self._pool = ProcessPoolExecutor(max_workers=self.parallelism)
        return self

    def __exit__(self, *exc):
        self.close()

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def execute_batch(self, specs: Sequence[RolloutSpec]) -> list[RolloutResult]:
        """One result per spec, in the order of ``specs``."""
        specs = list(specs)
        self.n_resets += len(specs)
        if not specs:
            return []
        if self.parallelism == 1:
            return _worker(specs, self.env_factory)
        batches = _assign(specs, self.parallelism)
        if self._pool is None:
            with ProcessPoolExecutor(max_workers=self.parallelism) as pool:
                outs = list(pool.map(_worker, [[specs[i] for i in b] for b in batches],
                                     [self.env_factory] * len(batches)))
        else:
            futures = [self._pool.submit(_worker, [specs[i] for i in b], self.env_factory)
                       for b in batches]
            outs = [f.result() for f in futures]
        results: list[RolloutResult | None] = [None] * len(specs)
        for batch, out in zip(batches, outs):
            for pos, res in zip(batch, out):
                results[pos] = res
        return results  # type: ignore[return-value]


def execute_batch(
    specs: Sequence[RolloutSpec], env_factory: EnvFactory, parallelism: int = 1
) -> list[RolloutResult]:
    with RolloutEngine(env_factory, parallelism) as engine:
        return engine.execute_batch(specs)
