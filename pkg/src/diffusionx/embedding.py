"""Deterministic text and image embedding providers.

Two interchangeable providers stand in for the real sentence / text / image
encoders of a production deployment:

* ``HashEmbedder`` — seeded feature hashing. Tokens are lowercased
  alphanumeric runs; each token maps to one signed coordinate via a keyed
  hash. Runs with zero external assets and is a pure function of
  (config, text).
* ``FileCacheProvider`` — exact-match lookup of precomputed vectors from a
  JSON Lines file, so real encoder outputs can be dropped in without code
  changes.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from typing import Dict, Optional, Union

import numpy as np

from .errors import DimensionMismatch

TOKEN_RE = re.compile(r"[a-z0-9]+")

DEFAULT_EDGE_TEXT_DIM = 384
DEFAULT_CLOUD_TEXT_DIM = 768
DEFAULT_IMAGE_DIM = 512


class EmptyText(ValueError):
    """Text had no hashable tokens after normalization."""


class CacheMiss(KeyError):
    """Key not present in a file-backed embedding cache."""


@dataclass(frozen=True)
class ProviderConfig:
    kind: str  # "hash" | "file_cache"
    dim: int
    normalize: bool = True
    cache_path: Optional[str] = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("hash", "file_cache"):
            raise ValueError(f"unknown provider kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.kind == "file_cache" and not self.cache_path:
            raise ValueError("file_cache provider requires cache_path")


def _unit(vec: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise EmptyText("embedding collapsed to the zero vector")
    return vec / norm


def project_vector(vec: np.ndarray, dim: int) -> np.ndarray:
    """Map a vector to `dim` by first-coordinate truncation or zero-padding."""
    if len(vec) == dim:
        return np.array(vec, dtype=np.float64)
    if len(vec) > dim:
        return np.array(vec[:dim], dtype=np.float64)
    out = np.zeros(dim, dtype=np.float64)
    out[: len(vec)] = vec
    return out


def tokenize(text: str) -> list:
    return TOKEN_RE.findall(text.lower())


class HashEmbedder:
    """Seeded signed feature hashing into a fixed-dimension vector."""

    def __init__(self, config: ProviderConfig):
        if config.kind != "hash":
            raise ValueError("HashEmbedder requires a 'hash' config")
        self.config = config
        self._key = str(config.seed).encode("utf-8")
        self._cache: Dict[str, np.ndarray] = {}

    @property
    def dim(self) -> int:
        return self.config.dim

    def _token_hash(self, token: str) -> int:
        digest = hashlib.blake2b(token.encode("utf-8"), key=self._key, digest_size=8).digest()
        return int.from_bytes(digest, "little")

    def embed_text(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise EmptyText("text is empty")
        cached = self._cache.get(text)
        if cached is not None:
            return cached
        tokens = tokenize(text)
        if not tokens:
            raise EmptyText("text has no alphanumeric tokens")
        vec = np.zeros(self.config.dim, dtype=np.float64)
        for token in tokens:
            h = self._token_hash(token)
            idx = h % self.config.dim
            sign = 1.0 if (h >> 63) & 1 == 0 else -1.0
            vec[idx] += sign
        if self.config.normalize:
            vec = _unit(vec)
        vec.setflags(write=False)
        self._cache[text] = vec
        return vec

    def embed_image(self, image) -> np.ndarray:
        if image.semantic_vec is None:
            raise DimensionMismatch("image carries no semantic vector to embed")
        vec = project_vector(image.semantic_vec, self.config.dim)
        if self.config.normalize:
            norm = float(np.linalg.norm(vec))
            if norm == 0.0:
                raise DimensionMismatch(
                    "semantic vector cannot be mapped to the target dimension "
                    "(projection collapsed to zero)"
                )
            vec = vec / norm
        vec.setflags(write=False)
        return vec


class FileCacheProvider:
    """Exact-match lookup of precomputed embeddings from a JSONL cache.

    Each line is ``{"key": <text or image id>, "vec": [floats...]}``. Lines
    whose vector length differs from the configured dimension are rejected
    at load time.
    """

    def __init__(self, config: ProviderConfig):
        if config.kind != "file_cache":
            raise ValueError("FileCacheProvider requires a 'file_cache' config")
        self.config = config
        self._entries: Dict[str, np.ndarray] = {}
        self._load(config.cache_path)

    @property
    def dim(self) -> int:
        return self.config.dim

    def _load(self, path: str) -> None:
        with open(path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                    key, raw = rec["key"], rec["vec"]
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise ValueError(f"{path}:{line_no}: malformed cache line") from exc
                if len(raw) != self.config.dim:
                    raise ValueError(
                        f"{path}:{line_no}: vector length {len(raw)} != dim {self.config.dim}"
                    )
                vec = np.asarray(raw, dtype=np.float64)
                if not np.all(np.isfinite(vec)):
                    raise ValueError(f"{path}:{line_no}: non-finite vector entries")
                if self.config.normalize:
                    vec = _unit(vec)
                vec.setflags(write=False)
                self._entries[key] = vec

    def _lookup(self, key: str) -> np.ndarray:
        try:
            return self._entries[key]
        except KeyError:
            raise CacheMiss(key) from None

    def embed_text(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise EmptyText("text is empty")
        return self._lookup(text)

    def embed_image(self, image) -> np.ndarray:
        if image.cache_key is None:
            raise CacheMiss("image carries no cache key")
        return self._lookup(image.cache_key)


Provider = Union[HashEmbedder, FileCacheProvider]


def build_provider(config: ProviderConfig) -> Provider:
    if config.kind == "hash":
        return HashEmbedder(config)
    return FileCacheProvider(config)


def hash_provider(dim: int, seed: int = 0, normalize: bool = True) -> HashEmbedder:
    return HashEmbedder(ProviderConfig(kind="hash", dim=dim, normalize=normalize, seed=seed))
