"""Link latency model, simulated generation cost, and table-shaped aggregation.

Transmission latency is the plain bits-over-bandwidth formula applied to
measured payload sizes. Aggregation reduces per-session summaries to one row
per scenario: mean per-round total latency, mean per-session hand-off
transmission, mean steps, and a percentage delta against a named baseline
scenario, ``(base - x) / base * 100`` rounded to one decimal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

from .backends import BackendCostModel
from .core import LatencyBreakdown, NegativeComponent, RoundRecord

DEFAULT_UPLINK_BPS = 20_000_000
DEFAULT_DOWNLINK_BPS = 20_000_000


class EmptyScenario(ValueError):
    """Aggregation was asked to summarize zero sessions."""


@dataclass(frozen=True)
class NetworkConfig:
    uplink_bps: int = DEFAULT_UPLINK_BPS
    downlink_bps: int = DEFAULT_DOWNLINK_BPS

    def __post_init__(self) -> None:
        if self.uplink_bps <= 0 or self.downlink_bps <= 0:
            raise ValueError("bandwidths must be positive")


def transmission_latency(payload_bytes: int, bps: float) -> float:
    """Seconds to push payload_bytes over a link of bps bits/second."""
    if bps <= 0:
        raise ValueError("bps must be positive")
    if payload_bytes < 0:
        raise ValueError("payload_bytes must be >= 0")
    return payload_bytes * 8 / bps


def simulate_generation_time(plan_steps: int, cost: BackendCostModel) -> float:
    """Cost-model generation time: fixed overhead plus per-step cost."""
    if plan_steps < 1:
        raise ValueError("plan_steps must be >= 1")
    return cost.base_overhead_s + plan_steps * cost.per_step_s


def assemble_round(predict_s: float, generate_s: float, transmit_s: float) -> LatencyBreakdown:
    """Build a validated per-round breakdown; raises NegativeComponent on bad input."""
    if min(predict_s, generate_s, transmit_s) < 0:
        raise NegativeComponent(
            f"latency components must be >= 0, got ({predict_s}, {generate_s}, {transmit_s})"
        )
    return LatencyBreakdown.build(predict_s, generate_s, transmit_s)


@dataclass(frozen=True)
class SessionStats:
    """Per-session reduction of its round records."""

    scenario: str
    n_rounds: int
    mean_total_s: float  # mean over this session's rounds
    transmit_s: float  # summed hand-off transmission for the session
    mean_steps: float


def session_stats(scenario: str, records: Sequence[RoundRecord]) -> SessionStats:
    if not records:
        raise EmptyScenario("a session summary needs at least one round")
    n = len(records)
    return SessionStats(
        scenario=scenario,
        n_rounds=n,
        mean_total_s=math.fsum(r.latency.total_s for r in records) / n,
        transmit_s=math.fsum(r.latency.transmit_s for r in records),
        mean_steps=math.fsum(r.steps_executed for r in records) / n,
    )


@dataclass(frozen=True)
class ScenarioRow:
    scenario: str
    mean_trans_s: float
    mean_total_s: float
    mean_steps: float
    n_sessions: int
    delta_pct: Optional[float] = None


@dataclass(frozen=True)
class MetricsReport:
    rows: Tuple[ScenarioRow, ...]
    baseline: Optional[str] = None


def aggregate(stats: Sequence[SessionStats], baseline: Optional[str] = None) -> MetricsReport:
    """Mean the per-session summaries within each scenario.

    math.fsum keeps the means exact enough to be invariant under session
    permutation. delta_pct is computed against the baseline scenario's mean
    total when a baseline is named and present.
    """
    if not stats:
        raise EmptyScenario("no completed sessions to aggregate")
    order = []
    grouped = {}
    for s in stats:
        if s.scenario not in grouped:
            grouped[s.scenario] = []
            order.append(s.scenario)
        grouped[s.scenario].append(s)

    means = {}
    for scenario in order:
        group = grouped[scenario]
        n = len(group)
        means[scenario] = (
            math.fsum(g.transmit_s for g in group) / n,
            math.fsum(g.mean_total_s for g in group) / n,
            math.fsum(g.mean_steps for g in group) / n,
            n,
        )

    base_total = means[baseline][1] if baseline in means else None
    rows = []
    for scenario in order:
        trans, total, steps, n = means[scenario]
        delta = None
        if base_total is not None and base_total != 0:
            delta = round((base_total - total) / base_total * 100, 1)
        rows.append(
            ScenarioRow(
                scenario=scenario,
                mean_trans_s=trans,
                mean_total_s=total,
                mean_steps=steps,
                n_sessions=n,
                delta_pct=delta,
            )
        )
    return MetricsReport(rows=tuple(rows), baseline=baseline if base_total is not None else None)


def report_json(report: MetricsReport) -> dict:
    """Machine-readable mirror with exactly the documented columns per row."""
    return {
        "baseline": report.baseline,
        "rows": [
            {
                "scenario": r.scenario,
                "trans_latency_s": r.mean_trans_s,
                "total_latency_s": r.mean_total_s,
                "delta_pct": r.delta_pct,
            }
            for r in report.rows
        ],
    }


def render_text(report: MetricsReport) -> str:
    """Aligned text table; zero transmission and absent deltas print as '-'."""
    headers = ("scenario", "trans_latency_s", "total_latency_s", "delta_pct")
    body = []
    for r in report.rows:
        body.append(
            (
                r.scenario,
                "-" if r.mean_trans_s == 0 else f"{r.mean_trans_s:.2f}",
                f"{r.mean_total_s:.2f}",
                "-" if r.delta_pct is None else f"{r.delta_pct:.1f}",
            )
        )
    widths = [max(len(h), *(len(row[i]) for row in body)) if body else len(h) for i, h in enumerate(headers)]
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)),
        "  ".join("-" * widths[i] for i in range(len(headers))),
    ]
    for row in body:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)))
    return "\n".join(lines)
