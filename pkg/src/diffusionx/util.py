"""Small shared helpers (deterministic seed derivation)."""

from __future__ import annotations

import hashlib


def derive_seed(*parts: object) -> int:
    """Derive a stable 63-bit sub-seed from a root seed plus context parts.

    Used wherever one root seed has to fan out into many independent,
    reproducible streams (one per labeling pair, per session round, ...).
    """
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(repr(part).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little") & (2**63 - 1)
