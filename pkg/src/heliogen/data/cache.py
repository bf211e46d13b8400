"""Preprocessed-image cache: raw little-endian float32, 8-byte header.

Layout: H then W as little-endian uint32, followed by 3*H*W float32 values
in channel-major (C, H, W) order.
"""
from __future__ import annotations

import os
import struct

import numpy as np

from ..errors import IoFailure

_HEADER = struct.Struct("<II")


def write_raw_cache(path: str | os.PathLike, pixels: np.ndarray) -> None:
    if pixels.ndim != 3 or pixels.shape[0] != 3:
        raise ValueError(f"expected (3, H, W) pixels, got {pixels.shape}")
    _, h, w = pixels.shape
    payload = np.ascontiguousarray(pixels, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(h, w))
        fh.write(payload)


def read_raw_cache(path: str | os.PathLike) -> np.ndarray:
    try:
        with open(path, "rb") as fh:
            head = fh.read(_HEADER.size)
            if len(head) != _HEADER.size:
                raise IoFailure(f"{path}: truncated cache header")
            h, w = _HEADER.unpack(head)
            payload = fh.read(3 * h * w * 4)
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc
    if len(payload) != 3 * h * w * 4:
        raise IoFailure(f"{path}: truncated cache payload")
    return np.frombuffer(payload, dtype="<f4").reshape(3, h, w).astype(np.float32)
