"""Constrained point-mass benchmark for validating the optimizer.

A 2-D point moves ``x' = x + a * dt`` with ``a`` in ``[-1, 1]^2`` towards a
goal. A circular hazard sits on the straight start-goal segment, so the
unconstrained optimum crosses it. Per-step reward is ``-|x' - goal|^2``. The safety value
``min(|x' - hazard|^2, cap^2) - radius^2`` is negative inside the hazard and
saturates at ``cap`` so that, like the grid safety function, it is bounded
above and does not reward running away from the hazard.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import ContractError


@dataclass(frozen=True)
class ToyScenario:
    start: tuple[float, float] = (0.0, 0.0)
    jitter: float = 0.02


@dataclass(frozen=True)
class ToyParams:
    goal: tuple[float, float] = (0.8, 0.0)
    hazard_center: tuple[float, float] = (0.4, 0.0)
    hazard_radius: float = 0.1
    safety_cap: float = 0.2
    dt: float = 0.1
    horizon: int = 50

    def __post_init__(self):
        if self.hazard_radius <= 0 or self.dt <= 0 or self.horizon < 1:
            raise ContractError("hazard_radius, dt must be positive and horizon >= 1")
        if self.safety_cap < self.hazard_radius:
            raise ContractError("safety_cap must be >= hazard_radius")


@dataclass(frozen=True)
class ToyState:
    step: int
    x: tuple[float, float]


def toy_reset(scenario: ToyScenario, params: ToyParams = ToyParams(), rng=None) -> ToyState:
    x = np.asarray(scenario.start, dtype=float)
    if rng is not None and scenario.jitter > 0:
        x = x + rng.uniform(-scenario.jitter, scenario.jitter, size=2)
    return ToyState(0, (float(x[0]), float(x[1])))


def toy_observe(state: ToyState, params: ToyParams = ToyParams()) -> np.ndarray:
    return np.array(state.x) - np.array(params.goal)


def toy_step(state: ToyState, action, params: ToyParams = ToyParams()):
    """Returns ``(state, reward, safety, done)``."""
    if state.step >= params.horizon:
        raise ContractError("episode already finished")
    a = np.clip(np.asarray(action, dtype=float), -1.0, 1.0)
    x = (state.x[0] + a[0] * params.dt, state.x[1] + a[1] * params.dt)
    gx, gy = params.goal
    hx, hy = params.hazard_center
    reward = -((x[0] - gx) ** 2 + (x[1] - gy) ** 2)
    d2 = (x[0] - hx) ** 2 + (x[1] - hy) ** 2
    safety = min(d2, params.safety_cap ** 2) - params.hazard_radius ** 2
    new = ToyState(state.step + 1, x)
    return new, reward, safety, new.step >= params.horizon


class ToyEnv:
    obs_dim = 2
    action_dim = 2
    action_low = -1.0
    action_high = 1.0

    def __init__(self, params: ToyParams | None = None):
        self.params = params or ToyParams()
        self.state: ToyState | None = None

    def reset(self, scenario: ToyScenario, seed=None) -> np.ndarray:
        rng = None if seed is None else np.random.default_rng(seed)
        self.state = toy_reset(scenario, self.params, rng)
        return toy_observe(self.state, self.params)

    def step(self, action):
        if self.state is None:
            raise ContractError("reset() must be called before step()")
        self.state, reward, safety, done = toy_step(self.state, action, self.params)
        return toy_observe(self.state, self.params), reward, safety, done, {}
