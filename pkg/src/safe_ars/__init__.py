"""Safety-constrained augmented random search for emergency load shedding."""

from .checkpoint import Checkpoint
from .envelope import (
    RecoveryEnvelope,
    RewardWeights,
    SafetyWindowSpec,
    StepOutcome,
    check_recovery_criterion,
    combined_reward,
    delta_v,
    safety_value,
    step_reward,
)
from .estimator import SafeARS
from .grid_env import FaultScenario, GridEnv, SurrogateParams, default_task_set
from .policy import ObservationNormalizer, PolicyParams, RunningStats
from .toy_env import ToyEnv, ToyParams, ToyScenario
from .trainer import TrainerConfig, evaluate, train

__all__ = [
    "Checkpoint",
    "FaultScenario",
    "GridEnv",
    "ObservationNormalizer",
    "PolicyParams",
    "RecoveryEnvelope",
    "RewardWeights",
    "RunningStats",
    "SafeARS",
    "SafetyWindowSpec",
    "StepOutcome",
    "SurrogateParams",
    "ToyEnv",
    "ToyParams",
    "ToyScenario",
    "TrainerConfig",
    "check_recovery_criterion",
    "combined_reward",
    "default_task_set",
    "delta_v",
    "evaluate",
    "safety_value",
    "step_reward",
    "train",
]

__version__ = "0.1.0"
