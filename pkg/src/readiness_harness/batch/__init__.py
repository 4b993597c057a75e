"""Batch evaluation runs: sampling, providers, checkpoints, spans."""

from .checkpoint import Checkpoint, CheckpointMismatch
from .plan import RunPlan
from .runner import RunResult, call_infer, execute_plan
from .sampling import sample_dataset
from .sim import SimEvaluator, SimProvider

__all__ = [
    "Checkpoint",
    "CheckpointMismatch",
    "RunPlan",
    "RunResult",
    "SimEvaluator",
    "SimProvider",
    "call_infer",
    "execute_plan",
    "sample_dataset",
]
