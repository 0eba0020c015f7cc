"""Deterministic replay of interactive-prompt datasets under simulated timing.

Replay never reads a wall clock: generation time comes from the per-tier
cost models, transmission from measured payload bytes over the configured
link, and predictor inference from a fixed cost constant. Three scenarios
are supported:

* ``CloudOnly``  — every round regenerates on the cloud at full base steps.
* ``EdgeOnly``   — likewise on the edge.
* ``DiffusionX`` — edge preview rounds, then one finalize that ships the
  draft to the cloud (the only place transmission shows up) and refines it
  at the predicted (or fixed) strength.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

from .backends import (
    DEFAULT_CLOUD_COST,
    DEFAULT_EDGE_COST,
    DEFAULT_RESOLUTION,
    DEFAULT_TARGET_PAYLOAD,
    BackendCostModel,
    CountingBackend,
    MockBackend,
)
from .core import RoundRecord, Tier, default_grid
from .embedding import (
    DEFAULT_CLOUD_TEXT_DIM,
    DEFAULT_EDGE_TEXT_DIM,
    DEFAULT_IMAGE_DIM,
    hash_provider,
)
from .netsim import (
    MetricsReport,
    NetworkConfig,
    SessionStats,
    aggregate,
    assemble_round,
    report_json,
    session_stats,
    simulate_generation_time,
    transmission_latency,
)
from .predictor import MlpParams, predict_cloud_strength, predict_edge_strength
from .scheduler import contiguous_schedule, skip_schedule, steps_for_strength
from .util import derive_seed

SCENARIO_CLOUD_ONLY = "CloudOnly"
SCENARIO_EDGE_ONLY = "EdgeOnly"
SCENARIO_DIFFUSIONX = "DiffusionX"
SCENARIOS = (SCENARIO_CLOUD_ONLY, SCENARIO_EDGE_ONLY, SCENARIO_DIFFUSIONX)

DEFAULT_PREDICT_COST_S = 0.01
DEFAULT_FIXED_STRENGTH = 0.90
DEFAULT_BASE_STEPS = 25


@dataclass(frozen=True)
class ReplayConfig:
    scenario: str
    predictor_on: bool = False
    seed: int = 0
    base_steps_edge: int = DEFAULT_BASE_STEPS
    base_steps_cloud: int = DEFAULT_BASE_STEPS
    t_max: int = 999
    fixed_strength: float = DEFAULT_FIXED_STRENGTH
    predict_cost_s: float = DEFAULT_PREDICT_COST_S
    edge_cost: BackendCostModel = DEFAULT_EDGE_COST
    cloud_cost: BackendCostModel = DEFAULT_CLOUD_COST
    network: NetworkConfig = field(default_factory=NetworkConfig)
    edge_dim: int = DEFAULT_EDGE_TEXT_DIM
    cloud_text_dim: int = DEFAULT_CLOUD_TEXT_DIM
    image_dim: int = DEFAULT_IMAGE_DIM
    resolution: int = DEFAULT_RESOLUTION
    target_payload_bytes: int = DEFAULT_TARGET_PAYLOAD

    def __post_init__(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.predictor_on and self.scenario != SCENARIO_DIFFUSIONX:
            raise ValueError("the strength predictor only applies to the DiffusionX scenario")


@dataclass
class ReplayResult:
    scenario_tag: str
    session_logs: List[Dict]
    stats: List[SessionStats]
    predictor_calls: int
    edge_steps: int
    cloud_steps: int


def scenario_tag(cfg: ReplayConfig) -> str:
    if cfg.scenario == SCENARIO_DIFFUSIONX:
        return f"{cfg.scenario}(predictor={'on' if cfg.predictor_on else 'off'})"
    return cfg.scenario


def replay_dataset(
    sessions: Sequence[Dict],
    cfg: ReplayConfig,
    edge_params: Optional[MlpParams] = None,
    cloud_params: Optional[MlpParams] = None,
) -> ReplayResult:
    if cfg.predictor_on and (edge_params is None or cloud_params is None):
        raise ValueError("predictor_on requires trained edge and cloud parameters")
    grid = default_grid()
    edge_text = hash_provider(cfg.edge_dim, seed=cfg.seed)
    cloud_text = hash_provider(cfg.cloud_text_dim, seed=cfg.seed)
    image_embedder = hash_provider(cfg.image_dim, seed=cfg.seed)
    # Both mock tiers share one latent space (the edge embedder's), so the
    # cloud can blend the edge's draft; the wider cloud text embedding only
    # feeds the cloud predictor.
    edge_backend = CountingBackend(
        MockBackend(edge_text, Tier.EDGE, cfg.resolution, cfg.target_payload_bytes)
    )
    cloud_backend = CountingBackend(
        MockBackend(edge_text, Tier.CLOUD, cfg.resolution, cfg.target_payload_bytes)
    )
    tag = scenario_tag(cfg)

    predictor_calls = 0
    logs: List[Dict] = []
    stats: List[SessionStats] = []

    for session in sessions:
        sid, rounds = session["id"], session["rounds"]
        records: List[RoundRecord] = []

        if cfg.scenario in (SCENARIO_CLOUD_ONLY, SCENARIO_EDGE_ONLY):
            on_cloud = cfg.scenario == SCENARIO_CLOUD_ONLY
            backend = cloud_backend if on_cloud else edge_backend
            cost = cfg.cloud_cost if on_cloud else cfg.edge_cost
            steps = cfg.base_steps_cloud if on_cloud else cfg.base_steps_edge
            for k, prompt in enumerate(rounds, start=1):
                backend.txt2img(prompt, steps, derive_seed(cfg.seed, sid, k))
                latency = assemble_round(0.0, simulate_generation_time(steps, cost), 0.0)
                records.append(
                    RoundRecord(
                        round_index=k,
                        prompt=prompt,
                        predicted_strength=None,
                        steps_executed=steps,
                        latency=latency,
                        tier=Tier.CLOUD if on_cloud else Tier.EDGE,
                    )
                )
        else:
            image = None
            for k, prompt in enumerate(rounds, start=1):
                round_seed = derive_seed(cfg.seed, sid, k)
                if k == 1:
                    steps = cfg.base_steps_edge
                    strength = None
                    predict_s = 0.0
                    image = edge_backend.txt2img(prompt, steps, round_seed)
                else:
                    if cfg.predictor_on:
                        h_prev = edge_text.embed_text(rounds[k - 2])
                        h_curr = edge_text.embed_text(prompt)
                        strength = predict_edge_strength(edge_params, h_prev, h_curr, grid)
                        predictor_calls += 1
                        predict_s = cfg.predict_cost_s
                    else:
                        strength = cfg.fixed_strength
                        predict_s = 0.0
                    steps = steps_for_strength(strength, cfg.base_steps_edge)
                    plan = contiguous_schedule(strength, steps)
                    image = edge_backend.img2img(image, prompt, plan, round_seed)
                latency = assemble_round(
                    predict_s, simulate_generation_time(steps, cfg.edge_cost), 0.0
                )
                records.append(
                    RoundRecord(
                        round_index=k,
                        prompt=prompt,
                        predicted_strength=strength,
                        steps_executed=steps,
                        latency=latency,
                        tier=Tier.EDGE,
                    )
                )

            # Finalize: ship the draft uplink, refine on the cloud.
            final_prompt = rounds[-1]
            transmit_s = transmission_latency(image.payload_bytes, cfg.network.uplink_bps)
            if cfg.predictor_on:
                h_cloud = cloud_text.embed_text(final_prompt)
                v_cloud = image_embedder.embed_image(image)
                cloud_strength = predict_cloud_strength(cloud_params, h_cloud, v_cloud, grid)
                predictor_calls += 1
                predict_s = cfg.predict_cost_s
            else:
                cloud_strength = cfg.fixed_strength
                predict_s = 0.0
            cloud_steps = steps_for_strength(cloud_strength, cfg.base_steps_cloud)
            plan = skip_schedule(cloud_strength, cloud_steps, cfg.t_max)
            cloud_backend.img2img(image, final_prompt, plan, derive_seed(cfg.seed, sid, "cloud"))
            latency = assemble_round(
                predict_s, simulate_generation_time(cloud_steps, cfg.cloud_cost), transmit_s
            )
            records.append(
                RoundRecord(
                    round_index=len(rounds),
                    prompt=final_prompt,
                    predicted_strength=cloud_strength,
                    steps_executed=cloud_steps,
                    latency=latency,
                    tier=Tier.CLOUD,
                )
            )

        logs.append({"id": sid, "scenario": tag, "records": [r.to_dict() for r in records]})
        stats.append(session_stats(tag, records))

    return ReplayResult(
        scenario_tag=tag,
        session_logs=logs,
        stats=stats,
        predictor_calls=predictor_calls,
        edge_steps=edge_backend.steps_executed,
        cloud_steps=cloud_backend.steps_executed,
    )


def build_report(results: Sequence[ReplayResult], baseline: Optional[str] = None) -> MetricsReport:
    stats: List[SessionStats] = []
    for result in results:
        stats.extend(result.stats)
    if baseline is None and results:
        baseline = results[0].scenario_tag
    return aggregate(stats, baseline=baseline)


def write_report(report: MetricsReport, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report_json(report), fh, sort_keys=True, indent=2)
        fh.write("\n")


def write_session_logs(results: Sequence[ReplayResult], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for result in results:
            for log in result.session_logs:
                fh.write(json.dumps(log, sort_keys=True) + "\n")
