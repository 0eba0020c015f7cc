"""The long-running orchestrator.

Wires the interactive loop end to end: edge preview rounds against the edge
backend, strength prediction (or the fixed-strength ablation path), plan
construction, and — on finalize — the bandwidth-accounted hand-off to the
cloud backend. Session events append to a JSONL log that is replayed on
startup, so a restart reproduces every completed event; image bytes live
under a content-addressed directory and are streamed by digest.

Per-session mutations are serialized with one lock per session; distinct
sessions proceed concurrently. Predict and generate timings are wall-clock
here (replay mode in :mod:`diffusionx.replay` simulates instead); the
transmit component always comes from the bandwidth formula over the draft's
measured payload size, since the uplink is modeled in any desk deployment.
"""

from __future__ import annotations

import argparse
import json
import os
import threading
import time
import uuid
from datetime import datetime, timezone
from typing import Dict, Optional

from fastapi import FastAPI, HTTPException, Response
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .backends import (
    BackendUnavailable,
    GeneratedImage,
    MockBackend,
    ProtocolError,
    Provenance,
    RemoteBackend,
    RemoteTimeout,
)
from .config import ConfigError, ServiceConfig, load_config
from .core import (
    EventKind,
    IllegalTransition,
    Phase,
    RoundRecord,
    SessionEvent,
    SessionState,
    Tier,
    default_grid,
    transition,
)
from .embedding import hash_provider
from .netsim import EmptyScenario, aggregate, assemble_round, report_json, session_stats, transmission_latency
from .predictor import load_weights, predict_cloud_strength, predict_edge_strength
from .raster import extract_semantic_vec
from .scheduler import contiguous_schedule, skip_schedule, steps_for_strength
from .util import derive_seed


class UnknownSession(KeyError):
    pass


class PromptBody(BaseModel):
    prompt: str


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


def _build_backend(selector: str, embedder, tier: Tier, config: ServiceConfig):
    if selector == "mock":
        return MockBackend(embedder, tier, config.resolution, config.target_payload_bytes)
    return RemoteBackend(selector)


class Orchestrator:
    def __init__(self, config: ServiceConfig):
        self.config = config
        self.grid = default_grid()
        self._edge_text = hash_provider(config.edge_dim, seed=config.seed)
        self._cloud_text = hash_provider(config.cloud_text_dim, seed=config.seed)
        self._image_embedder = hash_provider(config.image_dim, seed=config.seed)
        # Both tiers blend in the edge embedder's latent space; the wider
        # cloud text embedding feeds only the cloud predictor.
        self.edge_backend = _build_backend(config.edge_backend, self._edge_text, Tier.EDGE, config)
        self.cloud_backend = _build_backend(config.cloud_backend, self._edge_text, Tier.CLOUD, config)
        self._edge_params = None
        self._cloud_params = None
        if config.predictor_enabled:
            self._edge_params = load_weights(config.edge_weights)
            self._cloud_params = load_weights(config.cloud_weights)
        self.predictor_calls = 0
        self.scenario_tag = "predictor_on" if config.predictor_enabled else "predictor_off"

        self._sessions: Dict[str, SessionState] = {}
        self._locks: Dict[str, threading.Lock] = {}
        self._session_tags: Dict[str, str] = {}
        self._registry_lock = threading.Lock()

        os.makedirs(config.image_dir, exist_ok=True)
        os.makedirs(os.path.dirname(os.path.abspath(config.persistence_path)), exist_ok=True)
        self._replay_log()
        self._log = open(config.persistence_path, "a", encoding="utf-8")
        self._log_lock = threading.Lock()

    # ------------------------------------------------------------------ log

    def _replay_log(self) -> None:
        path = self.config.persistence_path
        if not os.path.exists(path):
            return
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                event = json.loads(line)
                sid = event["session"]
                kind = event["event"]
                if kind == "created":
                    self._sessions[sid] = SessionState(session_id=sid)
                    self._locks[sid] = threading.Lock()
                    self._session_tags[sid] = event.get("scenario", self.scenario_tag)
                    continue
                state = self._sessions[sid]
                record = RoundRecord.from_dict(event["record"])
                if kind == "prompt":
                    state = transition(state, SessionEvent(EventKind.SUBMIT_PROMPT, record.prompt))
                elif kind == "finalize":
                    state = transition(state, SessionEvent(EventKind.FINALIZE))
                    state = transition(state, SessionEvent(EventKind.CLOUD_DONE))
                else:
                    raise ValueError(f"unknown persisted event kind {kind!r}")
                if record.image_digest:
                    state = state.with_image(record.image_digest)
                self._sessions[sid] = state.with_record(record)

    def _persist(self, sid: str, kind: str, record: Optional[RoundRecord]) -> None:
        payload = {
            "ts": _now_iso(),
            "session": sid,
            "event": kind,
            "record": record.to_dict() if record else None,
        }
        if kind == "created":
            # creation-time tag survives restarts so metrics rows stay honest
            # even if the service is later relaunched with the other mode
            payload["scenario"] = self._session_tags[sid]
        line = json.dumps(payload)
        with self._log_lock:
            self._log.write(line + "\n")
            self._log.flush()
            os.fsync(self._log.fileno())

    def close(self) -> None:
        self._log.close()

    # --------------------------------------------------------------- images

    def _store_image(self, image) -> str:
        digest = image.digest
        path = os.path.join(self.config.image_dir, f"{digest}.png")
        if not os.path.exists(path):
            tmp = f"{path}.tmp-{uuid.uuid4().hex}"
            with open(tmp, "wb") as fh:
                fh.write(image.container_bytes)
            os.replace(tmp, path)
        return digest

    def image_bytes(self, digest: str) -> bytes:
        if not digest.replace("-", "").isalnum():
            raise UnknownSession(digest)
        path = os.path.join(self.config.image_dir, f"{digest}.png")
        if not os.path.exists(path):
            raise UnknownSession(digest)
        with open(path, "rb") as fh:
            return fh.read()

    # -------------------------------------------------------------- sessions

    def _lock_for(self, sid: str) -> threading.Lock:
        with self._registry_lock:
            if sid not in self._sessions:
                raise UnknownSession(sid)
            return self._locks[sid]

    def create_session(self) -> str:
        sid = uuid.uuid4().hex
        with self._registry_lock:
            self._sessions[sid] = SessionState(session_id=sid)
            self._locks[sid] = threading.Lock()
            self._session_tags[sid] = self.scenario_tag
        self._persist(sid, "created", None)
        return sid

    def submit_prompt(self, sid: str, prompt: str) -> dict:
        lock = self._lock_for(sid)
        with lock:
            state = self._sessions[sid]
            # Validate the transition up front so backend failures can't
            # leave the session half-advanced.
            next_state = transition(state, SessionEvent(EventKind.SUBMIT_PROMPT, prompt))
            round_index = next_state.round_index
            round_seed = derive_seed(self.config.seed, sid, round_index)

            predicted: Optional[float] = None
            predict_s = 0.0
            if round_index == 1:
                steps = self.config.base_steps_edge
                t0 = time.perf_counter()
                image = self.edge_backend.txt2img(prompt, steps, round_seed)
                generate_s = time.perf_counter() - t0
            else:
                t0 = time.perf_counter()
                if self.config.predictor_enabled:
                    h_prev = self._edge_text.embed_text(state.current_prompt)
                    h_curr = self._edge_text.embed_text(prompt)
                    predicted = predict_edge_strength(self._edge_params, h_prev, h_curr, self.grid)
                    self.predictor_calls += 1
                else:
                    predicted = self.config.fixed_strength
                predict_s = time.perf_counter() - t0
                steps = steps_for_strength(predicted, self.config.base_steps_edge)
                plan = contiguous_schedule(predicted, steps)
                prev_image = self._load_current_image(state)
                t0 = time.perf_counter()
                image = self.edge_backend.img2img(prev_image, prompt, plan, round_seed)
                generate_s = time.perf_counter() - t0

            digest = self._store_image(image)
            latency = assemble_round(predict_s, generate_s, 0.0)
            record = RoundRecord(
                round_index=round_index,
                prompt=prompt,
                predicted_strength=predicted,
                steps_executed=steps,
                latency=latency,
                tier=Tier.EDGE,
                image_digest=digest,
            )
            self._persist(sid, "prompt", record)
            self._sessions[sid] = next_state.with_image(digest).with_record(record)
            return {
                "session_id": sid,
                "round_index": round_index,
                "phase": self._sessions[sid].phase.value,
                "image": digest,
                "image_url": f"/images/{digest}",
                "predicted_strength": predicted,
                "steps": steps,
                "latency": latency.to_dict(),
            }

    def _load_current_image(self, state: SessionState):
        # Mock sessions keep no in-memory image cache: rebuild from the
        # stored container so restart and live paths behave identically.
        data = self.image_bytes(state.current_image)
        vec = extract_semantic_vec(data)
        return GeneratedImage(
            width=self.config.resolution,
            height=self.config.resolution,
            semantic_vec=vec,
            provenance=Provenance.MOCK_EDGE,
            seed=0,
            container=data,
            target_payload=None,
        )

    def finalize(self, sid: str) -> dict:
        lock = self._lock_for(sid)
        with lock:
            state = self._sessions[sid]
            mid_state = transition(state, SessionEvent(EventKind.FINALIZE))  # validates phase
            draft = self._load_current_image(state)
            transmit_s = transmission_latency(draft.payload_bytes, self.config.uplink_bps)

            t0 = time.perf_counter()
            if self.config.predictor_enabled:
                h_cloud = self._cloud_text.embed_text(state.current_prompt)
                v_cloud = self._image_embedder.embed_image(draft)
                strength = predict_cloud_strength(self._cloud_params, h_cloud, v_cloud, self.grid)
                self.predictor_calls += 1
            else:
                strength = self.config.fixed_strength
            predict_s = time.perf_counter() - t0

            steps = steps_for_strength(strength, self.config.base_steps_cloud)
            plan = skip_schedule(strength, steps, self.config.t_max)
            cloud_seed = derive_seed(self.config.seed, sid, "cloud", state.round_index)
            t0 = time.perf_counter()
            refined = self.cloud_backend.img2img(draft, state.current_prompt, plan, cloud_seed)
            generate_s = time.perf_counter() - t0

            digest = self._store_image(refined)
            latency = assemble_round(predict_s, generate_s, transmit_s)
            record = RoundRecord(
                round_index=state.round_index,
                prompt=state.current_prompt,
                predicted_strength=strength,
                steps_executed=steps,
                latency=latency,
                tier=Tier.CLOUD,
                image_digest=digest,
            )
            self._persist(sid, "finalize", record)
            final_state = transition(mid_state, SessionEvent(EventKind.CLOUD_DONE))
            self._sessions[sid] = final_state.with_image(digest).with_record(record)
            return {
                "session_id": sid,
                "phase": final_state.phase.value,
                "image": digest,
                "image_url": f"/images/{digest}",
                "strength_used": strength,
                "steps": steps,
                "latency": latency.to_dict(),
            }

    def get_session(self, sid: str) -> dict:
        with self._registry_lock:
            state = self._sessions.get(sid)
        if state is None:
            raise UnknownSession(sid)
        return {
            "session_id": state.session_id,
            "phase": state.phase.value,
            "round_index": state.round_index,
            "current_prompt": state.current_prompt,
            "current_image": state.current_image,
            "history": [r.to_dict() for r in state.history],
        }

    def metrics(self) -> dict:
        with self._registry_lock:
            completed = [
                (self._session_tags.get(s.session_id, self.scenario_tag), s)
                for s in self._sessions.values()
                if s.phase is Phase.REFINED
            ]
        stats = [session_stats(tag, s.history) for tag, s in completed if s.history]
        if not stats:
            return {"baseline": None, "rows": []}
        tags = {s.scenario for s in stats}
        baseline = "predictor_off" if "predictor_off" in tags else stats[0].scenario
        try:
            report = aggregate(stats, baseline=baseline)
        except EmptyScenario:
            return {"baseline": None, "rows": []}
        return report_json(report)


def create_app(config: Optional[ServiceConfig] = None, orchestrator: Optional[Orchestrator] = None):
    if orchestrator is None:
        orchestrator = Orchestrator(config or ServiceConfig())
    app = FastAPI(title="diffusionx")
    app.state.orchestrator = orchestrator
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    def _guard(fn, *args):
        try:
            return fn(*args)
        except UnknownSession as exc:
            raise HTTPException(status_code=404, detail=f"unknown session or image: {exc}")
        except IllegalTransition as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        except (BackendUnavailable, ProtocolError, RemoteTimeout) as exc:
            raise HTTPException(status_code=503, detail=str(exc))

    @app.post("/sessions")
    def create_session():
        sid = orchestrator.create_session()
        return {"session_id": sid, "phase": Phase.CREATED.value}

    @app.post("/sessions/{sid}/prompt")
    def submit_prompt(sid: str, body: PromptBody):
        return _guard(orchestrator.submit_prompt, sid, body.prompt)

    @app.post("/sessions/{sid}/finalize")
    def finalize(sid: str):
        return _guard(orchestrator.finalize, sid)

    @app.get("/sessions/{sid}")
    def get_session(sid: str):
        return _guard(orchestrator.get_session, sid)

    @app.get("/images/{digest}")
    def get_image(digest: str):
        data = _guard(orchestrator.image_bytes, digest)
        return Response(content=data, media_type="image/png")

    @app.get("/metrics")
    def metrics():
        return orchestrator.metrics()

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    frontend = orchestrator.config.frontend_dir
    if frontend and os.path.isdir(frontend):
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=frontend, html=True), name="frontend")

    return app


def main(argv=None) -> int:
    import uvicorn

    parser = argparse.ArgumentParser(prog="diffusionx-service", description=__doc__)
    parser.add_argument("--config", help="path to a key=value config file")
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
    except (ConfigError, FileNotFoundError) as exc:
        parser.error(str(exc))
        return 2
    host, _, port = config.listen_addr.partition(":")
    app = create_app(config)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8099), log_level="info")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
