"""Shared domain types: the candidate strength grid, strength clipping,
per-round latency accounting, and the multi-round session state machine.

Strengths are plain floats in [grid.min, grid.max]; every externally visible
strength goes through :func:`clip_strength`. Session objects are immutable
value types; :func:`transition` is a pure function over them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterator, Optional, Tuple

GRID_MIN = 0.40
GRID_MAX = 0.90
GRID_STEP = 0.05
LATENCY_SUM_TOL = 1e-9


class InvalidStrength(ValueError):
    """A strength value is NaN or otherwise unusable (corrupt predictor output)."""


class NegativeComponent(ValueError):
    """A latency component was negative."""


class IllegalTransition(Exception):
    """The event is not allowed in the session's current phase."""

    def __init__(self, phase: "Phase", event: "EventKind"):
        super().__init__(f"event {event.value!r} not allowed in phase {phase.value!r}")
        self.phase = phase
        self.event = event


@dataclass(frozen=True)
class CandidateSet:
    """Ascending, duplicate-free grid of candidate strengths."""

    values: Tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.values:
            raise ValueError("candidate set must be non-empty")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ValueError("candidate strengths must be strictly ascending")

    @property
    def min(self) -> float:
        return self.values[0]

    @property
    def max(self) -> float:
        return self.values[-1]

    def __iter__(self) -> Iterator[float]:
        return iter(self.values)

    def __len__(self) -> int:
        return len(self.values)


def default_grid() -> CandidateSet:
    """The default 11-point grid: 0.40, 0.45, ..., 0.90."""
    n = int(round((GRID_MAX - GRID_MIN) / GRID_STEP)) + 1
    return CandidateSet(tuple(round(GRID_MIN + i * GRID_STEP, 2) for i in range(n)))


def clip_strength(raw: float, grid: CandidateSet) -> float:
    """Clip a raw predictor output to the grid's continuous range.

    Clipping targets the range [grid.min, grid.max], never the lattice
    points themselves.
    """
    raw = float(raw)
    if math.isnan(raw):
        raise InvalidStrength("strength is NaN")
    return min(max(raw, grid.min), grid.max)


@dataclass(frozen=True)
class LatencyBreakdown:
    """Per-round predict / generate / transmit accounting, in seconds."""

    predict_s: float
    generate_s: float
    transmit_s: float
    total_s: float

    def __post_init__(self) -> None:
        parts = (self.predict_s, self.generate_s, self.transmit_s)
        if any(p < 0 for p in parts):
            raise NegativeComponent(f"latency components must be >= 0, got {parts}")
        if abs(self.total_s - math.fsum(parts)) > LATENCY_SUM_TOL:
            raise ValueError("total_s must equal the sum of its components")

    @classmethod
    def build(cls, predict_s: float, generate_s: float, transmit_s: float) -> "LatencyBreakdown":
        return cls(predict_s, generate_s, transmit_s, math.fsum((predict_s, generate_s, transmit_s)))

    def to_dict(self) -> dict:
        return {
            "predict_s": self.predict_s,
            "generate_s": self.generate_s,
            "transmit_s": self.transmit_s,
            "total_s": self.total_s,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LatencyBreakdown":
        return cls(d["predict_s"], d["generate_s"], d["transmit_s"], d["total_s"])


class Tier(str, Enum):
    EDGE = "edge"
    CLOUD = "cloud"


class Phase(str, Enum):
    CREATED = "created"
    PREVIEW_READY = "preview_ready"
    CLOUD_REFINING = "cloud_refining"
    REFINED = "refined"
    CLOSED = "closed"


class EventKind(str, Enum):
    SUBMIT_PROMPT = "submit_prompt"
    FINALIZE = "finalize"
    CLOUD_DONE = "cloud_done"
    CLOSE = "close"


@dataclass(frozen=True)
class SessionEvent:
    kind: EventKind
    prompt: Optional[str] = None


@dataclass(frozen=True)
class RoundRecord:
    """One generation round: what ran, at what strength, and how long it took."""

    round_index: int
    prompt: str
    predicted_strength: Optional[float]
    steps_executed: int
    latency: LatencyBreakdown
    tier: Tier
    image_digest: Optional[str] = None

    def __post_init__(self) -> None:
        if self.steps_executed < 1:
            raise ValueError("steps_executed must be >= 1 for a generation round")

    def to_dict(self) -> dict:
        return {
            "round_index": self.round_index,
            "prompt": self.prompt,
            "predicted_strength": self.predicted_strength,
            "steps_executed": self.steps_executed,
            "latency": self.latency.to_dict(),
            "tier": self.tier.value,
            "image_digest": self.image_digest,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RoundRecord":
        return cls(
            round_index=d["round_index"],
            prompt=d["prompt"],
            predicted_strength=d["predicted_strength"],
            steps_executed=d["steps_executed"],
            latency=LatencyBreakdown.from_dict(d["latency"]),
            tier=Tier(d["tier"]),
            image_digest=d.get("image_digest"),
        )


@dataclass(frozen=True)
class SessionState:
    """State of one interactive session.

    ``round_index`` equals the number of accepted prompt submissions;
    ``current_image`` is absent only while the session is still in
    ``Phase.CREATED`` (callers attach the image atomically with the
    transition that produced it).
    """

    session_id: str
    phase: Phase = Phase.CREATED
    round_index: int = 0
    current_prompt: str = ""
    current_image: Optional[str] = None
    history: Tuple[RoundRecord, ...] = ()

    def with_image(self, digest: str) -> "SessionState":
        return replace(self, current_image=digest)

    def with_record(self, record: RoundRecord) -> "SessionState":
        return replace(self, history=self.history + (record,))


def transition(state: SessionState, event: SessionEvent) -> SessionState:
    """Advance the session state machine by one event.

    Legal moves::

        Created       --SubmitPrompt--> PreviewReady   (round_index + 1)
        PreviewReady  --SubmitPrompt--> PreviewReady   (round_index + 1)
        PreviewReady  --Finalize-----> CloudRefining
        CloudRefining --CloudDone----> Refined
        any           --Close--------> Closed

    Anything else raises :class:`IllegalTransition`. Refined is terminal
    until Close; a refined session cannot be re-opened.
    """
    kind = event.kind
    if kind is EventKind.CLOSE:
        return replace(state, phase=Phase.CLOSED)
    if kind is EventKind.SUBMIT_PROMPT:
        if event.prompt is None or not event.prompt.strip():
            raise ValueError("SubmitPrompt requires a non-empty prompt")
        if state.phase in (Phase.CREATED, Phase.PREVIEW_READY):
            return replace(
                state,
                phase=Phase.PREVIEW_READY,
                round_index=state.round_index + 1,
                current_prompt=event.prompt,
            )
        raise IllegalTransition(state.phase, kind)
    if kind is EventKind.FINALIZE:
        if state.phase is Phase.PREVIEW_READY:
            return replace(state, phase=Phase.CLOUD_REFINING)
        raise IllegalTransition(state.phase, kind)
    if kind is EventKind.CLOUD_DONE:
        if state.phase is Phase.CLOUD_REFINING:
            return replace(state, phase=Phase.REFINED)
        raise IllegalTransition(state.phase, kind)
    raise IllegalTransition(state.phase, kind)
