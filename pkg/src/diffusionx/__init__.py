"""Edge-cloud collaborative text-to-image orchestration (DiffusionX control plane).

Fast edge previews during multi-round prompt refinement, learned
noise-strength predictors on both tiers, skip-step denoising plans, and a
bandwidth-aware hand-off of the finalized draft to a cloud refiner — all
runnable at desk scale against a deterministic mock generation backend.
"""

__version__ = "0.1.0"

from .core import (
    CandidateSet,
    LatencyBreakdown,
    Phase,
    RoundRecord,
    SessionState,
    Tier,
    clip_strength,
    default_grid,
    transition,
)
from .scheduler import DenoisePlan, contiguous_schedule, skip_schedule, steps_for_strength

__all__ = [
    "CandidateSet",
    "DenoisePlan",
    "LatencyBreakdown",
    "Phase",
    "RoundRecord",
    "SessionState",
    "Tier",
    "clip_strength",
    "contiguous_schedule",
    "default_grid",
    "skip_schedule",
    "steps_for_strength",
    "transition",
    "__version__",
]
