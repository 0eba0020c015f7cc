"""Generation backends: a deterministic procedural mock, an alignment scorer,
and the HTTP client for real model servers.

The mock backend is what makes the whole control plane testable at desk
scale. Every mock image carries a latent semantic vector; txt2img seeds it
from the prompt embedding, and img2img moves it toward the new prompt's
embedding by exactly the plan's strength::

    v_out = normalize((1 - s) * v_in + s * embed(prompt))

so strength genuinely controls how far the image drifts toward the new
prompt. Pixels are a procedural band pattern keyed by (vector, seed) and are
derived lazily — labeling sweeps thousands of candidates without ever
rasterizing.
"""

from __future__ import annotations

import base64
import hashlib
import json
import struct
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional

import numpy as np
import requests

from .core import Tier
from .errors import DimensionMismatch
from .raster import decode_png, encode_png, extract_semantic_vec
from .scheduler import DenoisePlan

DEFAULT_RESOLUTION = 512
DEFAULT_TARGET_PAYLOAD = 500_000
DEFAULT_BETA = 0.5
DEFAULT_TIMEOUT_S = 120.0


class BackendUnavailable(Exception):
    """The generation backend cannot be reached or refused the request."""


class ProtocolError(Exception):
    """The remote backend answered with a malformed response."""


class RemoteTimeout(TimeoutError):
    """The remote backend did not answer within the configured timeout."""


class MissingSemanticVector(Exception):
    """Operation needs a latent semantic vector the image does not carry."""


class Provenance(str, Enum):
    MOCK_EDGE = "mock_edge"
    MOCK_CLOUD = "mock_cloud"
    REMOTE = "remote"


@dataclass(frozen=True)
class BackendCostModel:
    """Simulated per-step generation cost for one tier."""

    per_step_s: float
    base_overhead_s: float
    tier: Tier

    def __post_init__(self) -> None:
        if self.per_step_s < 0 or self.base_overhead_s < 0:
            raise ValueError("cost model fields must be >= 0")


# Shipped defaults, calibrated so 25 full steps reproduce the reference
# per-round latencies (edge 11.79 s, cloud 14.15 s).
DEFAULT_EDGE_COST = BackendCostModel(per_step_s=0.456, base_overhead_s=0.39, tier=Tier.EDGE)
DEFAULT_CLOUD_COST = BackendCostModel(per_step_s=0.550, base_overhead_s=0.40, tier=Tier.CLOUD)


def procedural_pixels(semantic_vec: np.ndarray, seed: int, width: int, height: int) -> np.ndarray:
    """Tiled color bands keyed by a seeded hash of the semantic vector."""
    key = hashlib.blake2b(
        np.asarray(semantic_vec, dtype="<f4").tobytes() + struct.pack("<q", seed),
        digest_size=8,
    ).digest()
    rng = np.random.default_rng(int.from_bytes(key, "little"))
    palette = rng.integers(0, 256, size=(8, 3), dtype=np.uint8)
    band_w = int(rng.integers(8, 48))
    shear = int(rng.integers(0, 4))
    xx = np.arange(width)[None, :]
    yy = np.arange(height)[:, None]
    idx = ((xx + shear * yy) // band_w) % len(palette)
    return palette[idx]


class GeneratedImage:
    """Raster plus latent lineage. Pixels and container bytes are lazy for mock images."""

    def __init__(
        self,
        width: int,
        height: int,
        semantic_vec: Optional[np.ndarray],
        provenance: Provenance,
        seed: int,
        strength_used: Optional[float] = None,
        container: Optional[bytes] = None,
        payload_override: Optional[int] = None,
        target_payload: Optional[int] = DEFAULT_TARGET_PAYLOAD,
        cache_key: Optional[str] = None,
    ):
        self.width = width
        self.height = height
        self.semantic_vec = semantic_vec
        self.provenance = provenance
        self.seed = seed
        self.strength_used = strength_used
        self.cache_key = cache_key
        self._target_payload = target_payload
        self._container = container
        self._payload_override = payload_override
        self._pixels: Optional[np.ndarray] = None
        self._digest: Optional[str] = None

    @property
    def pixels(self) -> np.ndarray:
        if self._pixels is None:
            if self._container is not None:
                self._pixels, _ = decode_png(self._container)
            elif self.semantic_vec is not None:
                self._pixels = procedural_pixels(self.semantic_vec, self.seed, self.width, self.height)
            else:
                raise MissingSemanticVector("no pixels and no semantic vector to derive them from")
        return self._pixels

    @property
    def container_bytes(self) -> bytes:
        if self._container is None:
            self._container = encode_png(
                self.pixels, semantic_vec=self.semantic_vec, target_size=self._target_payload
            )
        return self._container

    @property
    def payload_bytes(self) -> int:
        if self._payload_override is not None:
            return self._payload_override
        return len(self.container_bytes)

    @property
    def digest(self) -> str:
        if self._digest is None:
            self._digest = hashlib.sha256(self.container_bytes).hexdigest()
        return self._digest


class MockBackend:
    """Deterministic procedural backend for one tier."""

    def __init__(
        self,
        embedder,
        tier: Tier = Tier.EDGE,
        resolution: int = DEFAULT_RESOLUTION,
        target_payload_bytes: Optional[int] = DEFAULT_TARGET_PAYLOAD,
    ):
        self.embedder = embedder
        self.tier = tier
        self.resolution = resolution
        self.target_payload_bytes = target_payload_bytes
        self._provenance = Provenance.MOCK_EDGE if tier is Tier.EDGE else Provenance.MOCK_CLOUD

    def _embed_unit(self, prompt: str) -> np.ndarray:
        vec = np.asarray(self.embedder.embed_text(prompt), dtype=np.float64)
        norm = float(np.linalg.norm(vec))
        return vec / norm

    def txt2img(self, prompt: str, steps: int, seed: int) -> GeneratedImage:
        if steps < 1:
            raise ValueError("steps must be >= 1")
        vec = self._embed_unit(prompt)
        vec.setflags(write=False)
        return GeneratedImage(
            width=self.resolution,
            height=self.resolution,
            semantic_vec=vec,
            provenance=self._provenance,
            seed=seed,
            strength_used=None,
            target_payload=self.target_payload_bytes,
        )

    def img2img(self, image: GeneratedImage, prompt: str, plan: DenoisePlan, seed: int) -> GeneratedImage:
        if image.semantic_vec is None:
            raise MissingSemanticVector("img2img needs the input image's semantic vector")
        target = self._embed_unit(prompt)
        if len(target) != len(image.semantic_vec):
            raise DimensionMismatch(
                f"image vector dim {len(image.semantic_vec)} != prompt embedding dim {len(target)}"
            )
        s = plan.strength
        blended = (1.0 - s) * np.asarray(image.semantic_vec, dtype=np.float64) + s * target
        norm = float(np.linalg.norm(blended))
        vec = target if norm == 0.0 else blended / norm  # exact cancellation resolves toward the prompt
        vec = np.array(vec, dtype=np.float64)
        vec.setflags(write=False)
        return GeneratedImage(
            width=self.resolution,
            height=self.resolution,
            semantic_vec=vec,
            provenance=self._provenance,
            seed=seed,
            strength_used=s,
            target_payload=self.target_payload_bytes,
        )


class CountingBackend:
    """Instrumentation wrapper counting generation calls and executed steps."""

    def __init__(self, inner):
        self.inner = inner
        self.txt2img_calls = 0
        self.img2img_calls = 0
        self.steps_executed = 0

    def txt2img(self, prompt, steps, seed):
        self.txt2img_calls += 1
        self.steps_executed += steps
        return self.inner.txt2img(prompt, steps, seed)

    def img2img(self, image, prompt, plan, seed):
        self.img2img_calls += 1
        self.steps_executed += plan.steps
        return self.inner.img2img(image, prompt, plan, seed)


class MockAlignmentScorer:
    """Cosine alignment to the prompt minus a strength quality penalty.

    The penalty term (weight ``beta``) models the real trade-off where
    over-noising discards useful structure from the previous image; without
    it every label search would saturate at the grid maximum.
    """

    def __init__(self, embedder, beta: float = DEFAULT_BETA):
        if beta < 0:
            raise ValueError("beta must be >= 0")
        self.embedder = embedder
        self.beta = beta

    def begin_pair(self, pair_id: str) -> None:  # labeling hook; nothing to do here
        pass

    def score(self, image: GeneratedImage, prompt: str) -> float:
        if image.semantic_vec is None:
            raise MissingSemanticVector("scorer needs the image's semantic vector")
        target = np.asarray(self.embedder.embed_text(prompt), dtype=np.float64)
        iv = np.asarray(image.semantic_vec, dtype=np.float64)
        denom = float(np.linalg.norm(iv)) * float(np.linalg.norm(target))
        cosine = float(iv @ target) / denom
        strength = image.strength_used if image.strength_used is not None else 0.0
        return cosine - self.beta * strength


class ScoreMiss(KeyError):
    """Score file has no entry for the requested (pair, strength)."""


class FileAlignmentScorer:
    """Replays externally computed alignment scores keyed by (pair id, strength).

    Score file is JSON Lines: ``{"id": str, "strength": float, "score": float}``.
    """

    def __init__(self, path: str):
        self._scores: Dict[tuple, float] = {}
        with open(path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                    key = (rec["id"], round(float(rec["strength"]), 2))
                    self._scores[key] = float(rec["score"])
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise ValueError(f"{path}:{line_no}: malformed score line") from exc
        self._pair_id: Optional[str] = None

    def begin_pair(self, pair_id: str) -> None:
        self._pair_id = pair_id

    def score(self, image: GeneratedImage, prompt: str) -> float:
        if image.strength_used is None:
            raise MissingSemanticVector("file scorer requires img2img outputs with a recorded strength")
        key = (self._pair_id, round(image.strength_used, 2))
        try:
            return self._scores[key]
        except KeyError:
            raise ScoreMiss(f"no score for pair={self._pair_id} strength={image.strength_used}") from None


class RemoteBackend:
    """HTTP client for a real generation server.

    Wire contract: ``POST {endpoint}/v1/generate`` with a JSON body carrying
    mode, prompt, strength, timesteps, steps, seed and (for img2img) the
    base64 init image; the server answers ``{"image_b64", "width",
    "height"}``. Strength and timesteps are both sent so servers may honor
    either. Failures never fabricate pixels — every failure maps to a typed
    error.
    """

    def __init__(self, endpoint: str, timeout_s: float = DEFAULT_TIMEOUT_S, session=None):
        self.endpoint = endpoint.rstrip("/")
        self.timeout_s = timeout_s
        self._session = session or requests.Session()

    def txt2img(self, prompt: str, steps: int, seed: int) -> GeneratedImage:
        return self._generate(
            {"mode": "txt2img", "prompt": prompt, "steps": steps, "seed": seed},
            strength=None,
            seed=seed,
        )

    def img2img(self, image: GeneratedImage, prompt: str, plan: DenoisePlan, seed: int) -> GeneratedImage:
        body = {
            "mode": "img2img",
            "prompt": prompt,
            "strength": plan.strength,
            "timesteps": list(plan.timesteps),
            "steps": plan.steps,
            "seed": seed,
            "init_image_b64": base64.b64encode(image.container_bytes).decode("ascii"),
        }
        return self._generate(body, strength=plan.strength, seed=seed)

    def _generate(self, body: dict, strength: Optional[float], seed: int) -> GeneratedImage:
        url = f"{self.endpoint}/v1/generate"
        try:
            resp = self._session.post(url, json=body, timeout=self.timeout_s)
        except requests.Timeout as exc:
            raise RemoteTimeout(f"no response from {url} within {self.timeout_s}s") from exc
        except requests.RequestException as exc:
            raise BackendUnavailable(f"cannot reach {url}: {exc}") from exc
        if resp.status_code != 200:
            raise BackendUnavailable(f"{url} returned status {resp.status_code}")
        try:
            payload = resp.json()
        except ValueError as exc:
            raise ProtocolError("response body is not valid JSON") from exc
        try:
            image_b64 = payload["image_b64"]
            width = int(payload["width"])
            height = int(payload["height"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"response missing required fields: {exc}") from exc
        try:
            container = base64.b64decode(image_b64, validate=True)
        except Exception as exc:
            raise ProtocolError("image_b64 is not valid base64") from exc
        return GeneratedImage(
            width=width,
            height=height,
            semantic_vec=extract_semantic_vec(container),
            provenance=Provenance.REMOTE,
            seed=seed,
            strength_used=strength,
            container=container,
            payload_override=len(resp.content),
            target_payload=None,
        )


def alignment_score(image: GeneratedImage, prompt: str, embedder, beta: float = DEFAULT_BETA) -> float:
    """Convenience wrapper over :class:`MockAlignmentScorer` for one-off scoring."""
    return MockAlignmentScorer(embedder, beta=beta).score(image, prompt)
