"""Post-fault voltage recovery envelope, step reward and safety function.

Every quantity here is a pure function of the voltages at one sample time
and the fault clearing instant ``t_pf``. Time inside the envelope is always
measured as the offset ``s = t - t_pf``; windows are left-open and
right-closed, so ``s = 0.33`` still belongs to the first window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from ._validation import ContractError

__all__ = [
    "RecoveryEnvelope",
    "RECOVERY_ENVELOPE",
    "CRITERION",
    "SafetyWindowSpec",
    "RewardWeights",
    "StepOutcome",
    "RecoveryReport",
    "InsufficientHorizonError",
    "window_index",
    "safety_value",
    "delta_v",
    "step_reward",
    "combined_reward",
    "check_recovery_criterion",
]

# Right edges of the four post-fault windows (seconds after clearing).
WINDOW_EDGES = (0.33, 0.5, 1.5, math.inf)
# Offsets within this distance of an edge count as on it: ``t - t_pf`` is
# rarely exact (1.48 - 1.15 = 0.33000000000000007).
EDGE_TOL = 1e-9


def window_index(s: float) -> int:
    """Index of the post-fault window that contains offset ``s > 0``."""
    for k, edge in enumerate(WINDOW_EDGES):
        if s <= edge + EDGE_TOL:
            return k
    return len(WINDOW_EDGES) - 1


@dataclass(frozen=True)
class RecoveryEnvelope:
    """Time-dependent lower voltage bound plus a fixed 1.5 p.u. ceiling.

    ``thresholds`` pairs each window-start offset with the lower bound used
    from that offset on.
    """

    thresholds: tuple[tuple[float, float], ...] = (
        (0.0, 0.7),
        (0.33, 0.8),
        (0.5, 0.9),
        (1.5, 0.95),
    )
    upper_bound: float = 1.5

    def __post_init__(self):
        offsets = [o for o, _ in self.thresholds]
        bounds = [b for _, b in self.thresholds]
        if not offsets or offsets[0] != 0.0:
            raise ContractError("envelope must start at offset 0")
        if any(b <= a for a, b in zip(offsets, offsets[1:])):
            raise ContractError("envelope offsets must be strictly increasing")
        if any(b < a for a, b in zip(bounds, bounds[1:])):
            raise ContractError("envelope lower bounds must be non-decreasing")

    def lower_bound(self, s: float) -> float | None:
        """Lower bound at offset ``s``; ``None`` before clearing."""
        if s <= 0:
            return None
        current = self.thresholds[0][1]
        for offset, bound in self.thresholds[1:]:
            if s > offset + EDGE_TOL:
                current = bound
        return current


RECOVERY_ENVELOPE = RecoveryEnvelope()

# Bounds the recovery criterion enforces: nothing in the first 0.33 s except
# the ceiling, then 0.8 / 0.9 / 0.95.
CRITERION = RecoveryEnvelope(
    thresholds=((0.0, 0.0), (0.33, 0.8), (0.5, 0.9), (1.5, 0.95))
)


@dataclass(frozen=True)
class SafetyWindowSpec:
    """Per-window (radius, center) pairs of the safety function.

    ``f = radius**2 - max_i (V_i - center)**2``, so ``f >= 0`` exactly when
    every voltage lies in ``[center - radius, center + radius]``.
    """

    radii: tuple[float, ...] = (0.4, 0.35, 0.3, 0.275)
    centers: tuple[float, ...] = (1.1, 1.15, 1.2, 1.225)

    def __post_init__(self):
        if len(self.radii) != len(WINDOW_EDGES) or len(self.centers) != len(WINDOW_EDGES):
            raise ContractError(f"need exactly {len(WINDOW_EDGES)} safety windows")
        if any(r <= 0 for r in self.radii):
            raise ContractError("safety radii must be positive")

    def corridor(self, k: int) -> tuple[float, float]:
        r, c = self.radii[k], self.centers[k]
        return c - r, c + r


@dataclass(frozen=True)
class RewardWeights:
    c1: float = 1.0
    c2: float = 0.5
    c3: float = 1.0
    blackout_penalty: float = -1000.0
    blackout_deadline: float = 4.0
    blackout_voltage: float = 0.95

    def __post_init__(self):
        if min(self.c1, self.c2, self.c3) <= 0:
            raise ContractError("reward weights c1, c2, c3 must be positive")
        if self.blackout_penalty >= 0:
            raise ContractError("blackout_penalty must be negative")


@dataclass(frozen=True)
class StepOutcome:
    """What the environment reports after one action interval."""

    t: float
    voltages: tuple[float, ...]
    shed_amounts: tuple[float, ...] = ()
    invalid_count: int = 0

    def __post_init__(self):
        if not self.voltages:
            raise ContractError("voltages must be non-empty")
        if any(v < 0 for v in self.voltages):
            raise ContractError("voltages must be >= 0")
        if any(p < 0 for p in self.shed_amounts):
            raise ContractError("shed amounts must be >= 0")
        if self.invalid_count < 0:
            raise ContractError("invalid_count must be >= 0")


def safety_value(
    voltages: Sequence[float],
    t: float,
    t_pf: float,
    spec: SafetyWindowSpec = SafetyWindowSpec(),
) -> float:
    """Safety function value at post-fault time ``t``.

    Non-negative iff every voltage sits inside the window's corridor.
    """
    if t <= t_pf:
        raise ContractError(f"safety is only defined after clearing (t={t}, t_pf={t_pf})")
    if len(voltages) == 0:
        raise ContractError("voltages must be non-empty")
    k = window_index(t - t_pf)
    r, c = spec.radii[k], spec.centers[k]
    worst = max((v - c) ** 2 for v in voltages)
    return r * r - worst


# Lower bounds of the per-bus voltage-deviation reward, one per window.
_DELTA_V_BOUNDS = (0.7, 0.8, 0.9, 0.95)


def delta_v(voltage: float, t: float, t_pf: float) -> float:
    """Shortfall of one bus voltage below its window bound (always <= 0)."""
    if t <= t_pf:
        raise ContractError(f"delta_v is only defined after clearing (t={t}, t_pf={t_pf})")
    return min(voltage - _DELTA_V_BOUNDS[window_index(t - t_pf)], 0.0)


def step_reward(
    outcome: StepOutcome, t_pf: float, weights: RewardWeights = RewardWeights()
) -> tuple[float, bool]:
    """Reward for one step and whether the blackout branch fired.

    Before clearing the voltage term contributes nothing; shed and invalid
    action costs apply at all times.
    """
    t = outcome.t
    if t > t_pf + weights.blackout_deadline and any(
        v < weights.blackout_voltage for v in outcome.voltages
    ):
        return weights.blackout_penalty, True
    dv = 0.0
    if t > t_pf:
        bound = _DELTA_V_BOUNDS[window_index(t - t_pf)]
        dv = sum(min(v - bound, 0.0) for v in outcome.voltages)
    shed = sum(outcome.shed_amounts)
    reward = weights.c1 * dv - weights.c2 * shed - weights.c3 * outcome.invalid_count
    return reward, False


def combined_reward(reward: float, safety: float, lam: float) -> float:
    """Lagrangian combination ``reward + lam * safety``; ``lam`` must be > 0."""
    if not lam > 0:
        raise ContractError(f"multiplier must be positive, got {lam}")
    return reward + lam * safety


class InsufficientHorizonError(ContractError):
    pass


@dataclass(frozen=True)
class RecoveryReport:
    passed: bool
    first_violation_time: float | None = None
    violating_bus: int | None = None
    n_violating_samples: int = 0


def check_recovery_criterion(
    trajectory: Sequence[StepOutcome],
    t_pf: float,
    envelope: RecoveryEnvelope = CRITERION,
    tol: float = 1e-12,
) -> RecoveryReport:
    """Check every post-fault sample against the recovery criterion.

    ``violating_bus`` is the position of the offending voltage inside
    ``StepOutcome.voltages``. ``n_violating_samples`` counts samples with at
    least one bus outside the envelope. ``tol`` absorbs rounding in bounds
    such as ``1.15 - 0.35``.
    """
    if not trajectory or max(o.t for o in trajectory) < t_pf + 1.5:
        raise InsufficientHorizonError(
            f"trajectory must cover at least t_pf + 1.5 s (t_pf={t_pf})"
        )
    first_t = first_bus = None
    n_bad = 0
    for outcome in trajectory:
        s = outcome.t - t_pf
        if s <= 0:
            continue
        low = envelope.lower_bound(s)
        bad = [
            i
            for i, v in enumerate(outcome.voltages)
            if v < low - tol or v > envelope.upper_bound + tol
        ]
        if bad:
            n_bad += 1
            if first_t is None:
                first_t, first_bus = outcome.t, bad[0]
    return RecoveryReport(first_t is None, first_t, first_bus, n_bad)
