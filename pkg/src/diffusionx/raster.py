"""Lossless raster container for generated images.

Images are encoded as genuine PNG files (8-bit RGB, filter 0) so any browser
can render a preview straight from the byte stream. Two private ancillary
chunks ride along:

* ``seMv`` — the image's latent semantic vector (float32), so lineage
  survives a round-trip through the wire contract.
* ``paDd`` — zero filler that pads the file to a configured nominal size.
  Procedural test patterns deflate to a few kilobytes, which would make
  transmission-latency numbers meaninglessly small; padding to a realistic
  draft size keeps the byte accounting honest (sizes are always measured
  from the final container, never estimated).

Decoders that don't know these chunks skip them per the PNG spec.
"""

from __future__ import annotations

import struct
import zlib
from typing import Optional, Tuple

import numpy as np

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
SEMANTIC_CHUNK = b"seMv"
PAD_CHUNK = b"paDd"
_CHUNK_OVERHEAD = 12  # length + type + crc


class RasterFormatError(ValueError):
    """Byte stream is not a PNG this module can decode."""


def _chunk(ctype: bytes, data: bytes) -> bytes:
    return (
        struct.pack(">I", len(data))
        + ctype
        + data
        + struct.pack(">I", zlib.crc32(ctype + data) & 0xFFFFFFFF)
    )


def encode_png(
    pixels: np.ndarray,
    semantic_vec: Optional[np.ndarray] = None,
    target_size: Optional[int] = None,
) -> bytes:
    """Encode an (H, W, 3) uint8 raster as PNG, optionally padded to target_size bytes."""
    if pixels.ndim != 3 or pixels.shape[2] != 3 or pixels.dtype != np.uint8:
        raise ValueError("pixels must be an (H, W, 3) uint8 array")
    height, width = pixels.shape[:2]
    ihdr = struct.pack(">IIBBBBB", width, height, 8, 2, 0, 0, 0)

    scanlines = np.empty((height, 1 + width * 3), dtype=np.uint8)
    scanlines[:, 0] = 0  # filter type 0 per row
    scanlines[:, 1:] = pixels.reshape(height, width * 3)
    idat = zlib.compress(scanlines.tobytes(), 6)

    parts = [PNG_SIGNATURE, _chunk(b"IHDR", ihdr)]
    if semantic_vec is not None:
        vec32 = np.asarray(semantic_vec, dtype="<f4")
        parts.append(_chunk(SEMANTIC_CHUNK, struct.pack("<I", len(vec32)) + vec32.tobytes()))
    parts.append(_chunk(b"IDAT", idat))
    iend = _chunk(b"IEND", b"")

    base_size = sum(len(p) for p in parts) + len(iend)
    if target_size is not None and target_size >= base_size + _CHUNK_OVERHEAD:
        parts.append(_chunk(PAD_CHUNK, bytes(target_size - base_size - _CHUNK_OVERHEAD)))
    parts.append(iend)
    return b"".join(parts)


def iter_chunks(data: bytes):
    if data[:8] != PNG_SIGNATURE:
        raise RasterFormatError("missing PNG signature")
    offset = 8
    while offset < len(data):
        if offset + 8 > len(data):
            raise RasterFormatError("truncated chunk header")
        (length,) = struct.unpack(">I", data[offset : offset + 4])
        ctype = data[offset + 4 : offset + 8]
        body_end = offset + 8 + length
        if body_end + 4 > len(data):
            raise RasterFormatError("truncated chunk body")
        yield ctype, data[offset + 8 : body_end]
        offset = body_end + 4


def extract_semantic_vec(data: bytes) -> Optional[np.ndarray]:
    """Pull the semantic-vector chunk out of a PNG, if present. Never decodes pixels."""
    try:
        for ctype, body in iter_chunks(data):
            if ctype == SEMANTIC_CHUNK:
                (dim,) = struct.unpack("<I", body[:4])
                vec = np.frombuffer(body[4 : 4 + 4 * dim], dtype="<f4").astype(np.float64)
                if len(vec) != dim:
                    raise RasterFormatError("semantic chunk length mismatch")
                return vec
            if ctype == b"IEND":
                break
    except RasterFormatError:
        return None
    return None


def decode_png(data: bytes) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Decode a PNG produced by :func:`encode_png` into (pixels, semantic_vec)."""
    width = height = None
    idat = b""
    semantic = None
    for ctype, body in iter_chunks(data):
        if ctype == b"IHDR":
            width, height, depth, color = struct.unpack(">IIBB", body[:10])
            if depth != 8 or color != 2:
                raise RasterFormatError("only 8-bit RGB PNGs are supported")
        elif ctype == b"IDAT":
            idat += body
        elif ctype == SEMANTIC_CHUNK:
            (dim,) = struct.unpack("<I", body[:4])
            semantic = np.frombuffer(body[4 : 4 + 4 * dim], dtype="<f4").astype(np.float64)
        elif ctype == b"IEND":
            break
    if width is None or not idat:
        raise RasterFormatError("missing IHDR or IDAT")
    raw = np.frombuffer(zlib.decompress(idat), dtype=np.uint8)
    stride = 1 + width * 3
    if len(raw) != height * stride:
        raise RasterFormatError("unexpected scanline payload size")
    rows = raw.reshape(height, stride)
    if np.any(rows[:, 0] != 0):
        raise RasterFormatError("only filter type 0 is supported")
    pixels = rows[:, 1:].reshape(height, width, 3).copy()
    return pixels, semantic
