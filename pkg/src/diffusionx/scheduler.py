"""Strength-to-denoising-plan mapping.

A strength controls how much noise is injected into the latent image and
therefore how many denoising steps run. The cloud refiner additionally
subsamples the full timestep ladder (a "skip" plan); the edge preview runs a
short contiguous ladder of its own (see :func:`contiguous_schedule`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

DEFAULT_T_MAX = 999


class InfeasibleSchedule(ValueError):
    """Requested more steps than the noise ladder has levels."""


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def steps_for_strength(strength: float, base_steps: int) -> int:
    """Number of denoising steps for a strength, given the tier's base step count.

    round(strength * base_steps) with half-up rounding, floored at 1.
    """
    if base_steps < 1:
        raise ValueError("base_steps must be >= 1")
    return max(1, _round_half_up(strength * base_steps))


@dataclass(frozen=True)
class DenoisePlan:
    """An executable denoising plan: strictly decreasing timestep subsequence.

    A 1-step plan is ``[t_start]`` and its sole step denoises straight to
    zero; multi-step plans always end at timestep 0.
    """

    strength: float
    steps: int
    timesteps: Tuple[int, ...]
    t_start: int

    def __post_init__(self) -> None:
        if self.steps < 1:
            raise ValueError("a plan needs at least one step")
        if len(self.timesteps) != self.steps:
            raise ValueError("plan length must equal steps")
        if self.timesteps[0] != self.t_start:
            raise ValueError("plan must start at t_start")
        if any(b >= a for a, b in zip(self.timesteps, self.timesteps[1:])):
            raise ValueError("timesteps must be strictly decreasing")
        if self.steps > 1 and self.timesteps[-1] != 0:
            raise ValueError("multi-step plans must end at timestep 0")
        if self.timesteps[-1] < 0:
            raise ValueError("timesteps must be non-negative")


def skip_schedule(strength: float, steps: int, t_max: int = DEFAULT_T_MAX) -> DenoisePlan:
    """Uniformly spaced descending timesteps from round(strength * t_max) to 0.

    Raises :class:`InfeasibleSchedule` when ``steps > t_start + 1`` (more
    steps than distinct levels available).
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    t_start = _round_half_up(strength * t_max)
    if steps > t_start + 1:
        raise InfeasibleSchedule(
            f"cannot fit {steps} strictly decreasing steps into levels [0, {t_start}]"
        )
    if steps == 1:
        timesteps: Tuple[int, ...] = (t_start,)
    else:
        timesteps = tuple(
            _round_half_up(t_start * (steps - 1 - i) / (steps - 1)) for i in range(steps)
        )
    return DenoisePlan(strength=strength, steps=steps, timesteps=timesteps, t_start=t_start)


def contiguous_schedule(strength: float, steps: int) -> DenoisePlan:
    """Consecutive descending timesteps on a tier-local ladder of exactly `steps` levels.

    The edge preview pipeline denoises every level of its own short ladder,
    so its plan is simply ``[steps-1, ..., 1, 0]``; only the cloud subsamples
    the long ladder via :func:`skip_schedule`.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    timesteps = tuple(range(steps - 1, -1, -1))
    return DenoisePlan(strength=strength, steps=steps, timesteps=timesteps, t_start=steps - 1)
