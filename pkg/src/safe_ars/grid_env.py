"""Surrogate of fault-induced delayed voltage recovery on four monitored buses.

The model is deliberately small. A fault clamps the monitored voltages
according to their electrical proximity to the faulted bus. On clearing,
each bus carries a "stall" level proportional to fault duration, and
``V_i = 1 - stall_i``. Stall decays first-order with a time constant that
grows with the load still served nearby, so shedding load speeds recovery.
That reproduces the qualitative FIDVR picture without a transient
simulator.

Monitored buses are 4, 7, 8, 18 and controllable load buses are 4, 7, 18.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from ._validation import ContractError
from .envelope import (
    RewardWeights,
    SafetyWindowSpec,
    StepOutcome,
    safety_value,
    step_reward,
)

MONITORED_BUSES = (4, 7, 8, 18)
LOAD_BUSES = (4, 7, 18)
TRAINING_FAULT_BUSES = (4, 15, 21)
TRAINING_DURATIONS = (0.0, 0.15, 0.28)
INVALID_ACTION_TOL = 1e-9
_TIME_TOL = 1e-9


def _default_prox() -> dict[int, tuple[float, ...]]:
    # Columns follow MONITORED_BUSES. 1.0 on the faulted bus itself, 0.55 on
    # electrically adjacent monitored buses, 0.35 elsewhere. Bus 7 is the
    # held-out fault used for generalization checks.
    return {
        4: (1.0, 0.35, 0.55, 0.55),
        15: (0.55, 0.35, 0.35, 0.35),
        21: (0.35, 0.35, 0.35, 0.35),
        7: (0.35, 1.0, 0.55, 0.35),
    }


def _default_coupling() -> tuple[tuple[float, ...], ...]:
    return tuple((1 / 3, 1 / 3, 1 / 3) for _ in MONITORED_BUSES)


@dataclass(frozen=True)
class FaultScenario:
    fault_bus: int
    duration: float
    fault_start: float = 1.0

    def __post_init__(self):
        if self.duration < 0:
            raise ContractError("fault duration must be >= 0")
        if self.fault_start < 0:
            raise ContractError("fault start must be >= 0")

    @property
    def t_pf(self) -> float:
        return self.fault_start + self.duration

    def label(self) -> str:
        return f"bus{self.fault_bus}-d{self.duration:g}"


def default_task_set() -> tuple[FaultScenario, ...]:
    return tuple(
        FaultScenario(bus, d) for bus in TRAINING_FAULT_BUSES for d in TRAINING_DURATIONS
    )


@dataclass(frozen=True)
class SurrogateParams:
    prox: Mapping[int, Sequence[float]] = field(default_factory=_default_prox)
    coupling: Sequence[Sequence[float]] = field(default_factory=_default_coupling)
    depression_gain: float = 0.8
    fault_floor: float = 0.2
    stall_gain: float = 6.0
    tau0: float = 1.2
    eps0: float = 0.1
    h: float = 0.02
    action_interval: float = 0.1
    episode_length: float = 10.0

    def __post_init__(self):
        for name in ("depression_gain", "stall_gain", "tau0", "eps0", "h",
                     "action_interval", "episode_length"):
            if not getattr(self, name) > 0:
                raise ContractError(f"{name} must be positive")
        for bus, col in self.prox.items():
            if len(col) != len(MONITORED_BUSES) or min(col) < 0:
                raise ContractError(f"prox[{bus}] must hold {len(MONITORED_BUSES)} nonnegative weights")
        if len(self.coupling) != len(MONITORED_BUSES) or any(
            len(row) != len(LOAD_BUSES) or min(row) < 0 for row in self.coupling
        ):
            raise ContractError("coupling must be a 4x3 nonnegative matrix")
        _check_divides(self.h, self.action_interval, "h", "action_interval")
        _check_divides(self.action_interval, self.episode_length, "action_interval", "episode_length")
        if self.h >= self.tau0 * self.eps0:
            # explicit Euler decay factor would leave (0, 1)
            raise ContractError("h must be below tau0 * eps0 for a stable stall decay")

    @property
    def substeps(self) -> int:
        return round(self.action_interval / self.h)

    @property
    def n_actions(self) -> int:
        return round(self.episode_length / self.action_interval)


def _check_divides(small: float, big: float, a: str, b: str) -> None:
    ratio = big / small
    if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
        raise ContractError(f"{a} must divide {b}")


@dataclass(frozen=True)
class GridState:
    k: int  # integration substeps taken; t = k * h
    t: float
    voltages: tuple[float, ...]
    load_fractions: tuple[float, ...]
    stall: tuple[float, ...]
    cleared: bool = False
    action_clipped: bool = False


def reset(scenario: FaultScenario, params: SurrogateParams = SurrogateParams()) -> GridState:
    """Flat start: nominal voltages, full load, no stall."""
    if scenario.fault_bus not in params.prox:
        raise ContractError(f"fault bus {scenario.fault_bus} is not in the surrogate topology")
    n = len(MONITORED_BUSES)
    return GridState(0, 0.0, (1.0,) * n, (1.0,) * len(LOAD_BUSES), (0.0,) * n)


def observe(state: GridState) -> np.ndarray:
    """``[V4, V7, V8, V18, p4, p7, p18]``."""
    return np.array(state.voltages + state.load_fractions)


def step(
    state: GridState,
    action: Sequence[float],
    scenario: FaultScenario,
    params: SurrogateParams = SurrogateParams(),
) -> tuple[GridState, StepOutcome]:
    """Apply one shed action, then integrate one action interval."""
    if state.t >= params.episode_length - _TIME_TOL:
        raise ContractError("episode already finished")
    try:
        prox = params.prox[scenario.fault_bus]
    except KeyError:
        raise ContractError(f"fault bus {scenario.fault_bus} is not in the surrogate topology") from None

    clipped = False
    loads = list(state.load_fractions)
    shed = [0.0] * len(loads)
    invalid = 0
    for j, a in enumerate(action):
        a = float(a)
        if a < -0.2 or a > 0.0:
            clipped = True
            a = min(max(a, -0.2), 0.0)
        if a < -INVALID_ACTION_TOL and loads[j] <= 0.0:
            invalid += 1
        new = loads[j] + a
        if new <= INVALID_ACTION_TOL:
            new = 0.0  # rounding residue of repeated full sheds
        shed[j] = loads[j] - new
        loads[j] = new

    t_fault, t_pf = scenario.fault_start, scenario.t_pf
    h = params.h
    taus = [
        params.tau0 * (params.eps0 + sum(w * p for w, p in zip(row, loads)))
        for row in params.coupling
    ]
    v = state.voltages
    stall = state.stall
    cleared = state.cleared
    k = state.k
    phase = None  # what the last integrated piece was: "fault" or "post"
    for _ in range(params.substeps):
        lo, hi = k * h, (k + 1) * h
        k += 1
        if hi <= t_fault + _TIME_TOL:
            continue
        cuts = [lo]
        for edge in (t_fault, t_pf):
            if lo + _TIME_TOL < edge < hi - _TIME_TOL and edge not in cuts:
                cuts.append(edge)
        cuts.append(hi)
        for a, b in zip(cuts, cuts[1:]):
            mid = 0.5 * (a + b)
            if mid < t_fault:
                continue
            if mid < t_pf:
                phase = "fault"
                continue
            phase = "post"
            if not cleared:
                stall = tuple(params.stall_gain * scenario.duration * x for x in prox)
                cleared = True
            dt = b - a
            stall = tuple(st * (1.0 - dt / tau) for st, tau in zip(stall, taus))
    if phase == "fault":
        v = tuple(max(params.fault_floor, 1.0 - params.depression_gain * x) for x in prox)
    elif phase == "post":
        v = tuple(min(1.0, max(0.0, 1.0 - st)) for st in stall)

    new_state = GridState(k, k * h, v, tuple(loads), stall, cleared, clipped)
    return new_state, StepOutcome(new_state.t, new_state.voltages, tuple(shed), invalid)


class GridEnv:
    """Episode wrapper that scores each step with the reward and safety function.

    ``step`` returns ``(obs, reward, safety, done, info)`` where ``safety``
    is ``None`` until the fault has cleared.
    """

    obs_dim = len(MONITORED_BUSES) + len(LOAD_BUSES)
    action_dim = len(LOAD_BUSES)
    action_low = -0.2
    action_high = 0.0

    def __init__(
        self,
        params: SurrogateParams | None = None,
        weights: RewardWeights | None = None,
        safety: SafetyWindowSpec | None = None,
    ):
        self.params = params or SurrogateParams()
        self.weights = weights or RewardWeights()
        self.safety = safety or SafetyWindowSpec()
        self.state: GridState | None = None
        self.scenario: FaultScenario | None = None

    def reset(self, scenario: FaultScenario, seed=None) -> np.ndarray:
        self.scenario = scenario
        self.state = reset(scenario, self.params)
        return observe(self.state)

    def step(self, action):
        if self.state is None:
            raise ContractError("reset() must be called before step()")
        self.state, outcome = step(self.state, action, self.scenario, self.params)
        t_pf = self.scenario.t_pf
        reward, blackout = step_reward(outcome, t_pf, self.weights)
        safety = None
        if outcome.t > t_pf + _TIME_TOL:
            safety = safety_value(outcome.voltages, outcome.t, t_pf, self.safety)
        done = blackout or self.state.t >= self.params.episode_length - _TIME_TOL
        info = {
            "outcome": outcome,
            "blackout": blackout,
            "clipped": self.state.action_clipped,
            "t_pf": t_pf,
        }
        return observe(self.state), reward, safety, done, info


def simulate(
    scenario: FaultScenario,
    actions,
    params: SurrogateParams = SurrogateParams(),
) -> list[StepOutcome]:
    """Open-loop run; ``actions`` is a callable of the state or a fixed 3-vector."""
    state = reset(scenario, params)
    out = []
    for _ in range(params.n_actions):
        a = actions(state) if callable(actions) else actions
        state, outcome = step(state, a, scenario, params)
        out.append(outcome)
    return out


def with_params(params: SurrogateParams, **changes) -> SurrogateParams:
    return replace(params, **changes)
