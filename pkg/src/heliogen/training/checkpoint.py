"""Single-file checkpoint container.

Layout, all integers little-endian:
    magic "HTCK" | u32 format version | u16 tag length + architecture tag |
    u32 epoch | u32 snapshot length + config snapshot bytes |
    repeated named blocks: u32 name length + name, u8 dtype tag, u8 rank,
    rank x u32 dims, payload | 32-byte SHA-256 of all prior bytes.

Generator parameters and buffers are stored under gen.<name>; optimizer
moments under opt.<param>.<slot>. The architecture tag "identity" denotes
the trivial pass-through generator used as an evaluation oracle.
"""
from __future__ import annotations

import hashlib
import io
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from ..errors import ArchitectureMismatch, DigestMismatch, IoFailure
from ..models import HDGenerator, UnetGenerator, generator_forward, hd_generator_forward
from .config import TrainConfig, parse_config, resolve_generator_spec, write_config

MAGIC = b"HTCK"
VERSION = 1
DIGEST_BYTES = 32

_TAG_TO_DTYPE = {0: "<f4", 1: "<f8", 2: "<i8", 3: "<i4", 4: "|u1"}
_DTYPE_TO_TAG = {np.dtype(v): k for k, v in _TAG_TO_DTYPE.items()}

KNOWN_ARCHITECTURES = ("pix2pix", "pix2pixhd", "identity")


@dataclass
class CheckpointState:
    architecture: str
    epoch: int
    config_text: str
    tensors: dict[str, np.ndarray]


def save_checkpoint(path, state: CheckpointState) -> str:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", VERSION))
    tag = state.architecture.encode()
    buf.write(struct.pack("<H", len(tag)))
    buf.write(tag)
    buf.write(struct.pack("<I", state.epoch))
    snapshot = state.config_text.encode()
    buf.write(struct.pack("<I", len(snapshot)))
    buf.write(snapshot)
    for name, array in state.tensors.items():
        array = np.asarray(array)
        dtype = array.dtype.newbyteorder("<") if array.dtype.itemsize > 1 else array.dtype
        if np.dtype(dtype) not in _DTYPE_TO_TAG:
            array = array.astype(np.float32)
            dtype = np.dtype("<f4")
        encoded = name.encode()
        buf.write(struct.pack("<I", len(encoded)))
        buf.write(encoded)
        buf.write(struct.pack("<BB", _DTYPE_TO_TAG[np.dtype(dtype)], array.ndim))
        for dim in array.shape:
            buf.write(struct.pack("<I", dim))
        buf.write(np.ascontiguousarray(array, dtype=dtype).tobytes())
    payload = buf.getvalue()
    digest = hashlib.sha256(payload).digest()
    try:
        with open(path, "wb") as fh:
            fh.write(payload)
            fh.write(digest)
    except OSError as exc:
        raise IoFailure(f"cannot write checkpoint {path}: {exc}") from exc
    return str(path)


def load_checkpoint(path, expected_architecture: str | None = None) -> CheckpointState:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read checkpoint {path}: {exc}") from exc
    if len(raw) < len(MAGIC) + DIGEST_BYTES:
        raise IoFailure(f"{path}: too short to be a checkpoint")
    body, digest = raw[:-DIGEST_BYTES], raw[-DIGEST_BYTES:]
    if hashlib.sha256(body).digest() != digest:
        raise DigestMismatch(f"{path}: content digest does not verify")
    if body[:4] != MAGIC:
        raise IoFailure(f"{path}: bad magic bytes")

    offset = 4

    def take(fmt: str):
        nonlocal offset
        size = struct.calcsize(fmt)
        values = struct.unpack_from(fmt, body, offset)
        offset += size
        return values if len(values) > 1 else values[0]

    version = take("<I")
    if version != VERSION:
        raise IoFailure(f"{path}: unsupported format version {version}")
    tag_len = take("<H")
    architecture = body[offset:offset + tag_len].decode()
    offset += tag_len
    epoch = take("<I")
    snap_len = take("<I")
    config_text = body[offset:offset + snap_len].decode()
    offset += snap_len

    tensors: dict[str, np.ndarray] = {}
    while offset < len(body):
        name_len = take("<I")
        name = body[offset:offset + name_len].decode()
        offset += name_len
        dtype_tag, rank = take("<BB")
        if dtype_tag not in _TAG_TO_DTYPE:
            raise IoFailure(f"{path}: unknown dtype tag {dtype_tag}")
        dims = tuple(take("<I") for _ in range(rank))
        dtype = np.dtype(_TAG_TO_DTYPE[dtype_tag])
        count = int(np.prod(dims, dtype=np.int64)) if dims else 1
        nbytes = count * dtype.itemsize
        tensors[name] = np.frombuffer(
            body[offset:offset + nbytes], dtype=dtype).reshape(dims).copy()
        offset += nbytes

    if expected_architecture is not None and architecture != expected_architecture:
        raise ArchitectureMismatch(
            f"{path}: checkpoint is {architecture!r}, expected {expected_architecture!r}")
    return CheckpointState(architecture=architecture, epoch=epoch,
                           config_text=config_text, tensors=tensors)


def checkpoint_state_from(generator: torch.nn.Module, optimizer, architecture: str,
                          epoch: int, config_text: str) -> CheckpointState:
    """Capture generator parameters/buffers and optimizer moments by name."""
    tensors: dict[str, np.ndarray] = {}
    for name, value in generator.state_dict().items():
        tensors[f"gen.{name}"] = value.detach().cpu().numpy()
    if optimizer is not None:
        param_names = [name for name, _ in generator.named_parameters()]
        state = optimizer.state_dict()["state"]
        for idx, pname in enumerate(param_names):
            slots = state.get(idx)
            if not slots:
                continue
            for slot in ("step", "exp_avg", "exp_avg_sq"):
                value = slots.get(slot)
                if value is None:
                    continue
                if isinstance(value, torch.Tensor):
                    value = value.detach().cpu().numpy()
                tensors[f"opt.{pname}.{slot}"] = np.asarray(value)
    return CheckpointState(architecture=architecture, epoch=epoch,
                           config_text=config_text, tensors=tensors)


def build_generator_from_state(state: CheckpointState) -> torch.nn.Module | None:
    """Reconstruct the generator a checkpoint describes. None for identity."""
    if state.architecture == "identity":
        return None
    if state.architecture not in KNOWN_ARCHITECTURES:
        raise ArchitectureMismatch(f"unknown architecture tag {state.architecture!r}")
    cfg = parse_config(state.config_text)
    if cfg.architecture != state.architecture:
        raise ArchitectureMismatch(
            f"checkpoint tag {state.architecture!r} disagrees with its config "
            f"snapshot {cfg.architecture!r}")
    spec = resolve_generator_spec(cfg)
    model = UnetGenerator(spec) if state.architecture == "pix2pix" else HDGenerator(spec)
    weights = {name[4:]: torch.from_numpy(array.copy())
               for name, array in state.tensors.items() if name.startswith("gen.")}
    model.load_state_dict(weights, strict=True)
    model.eval()
    return model


def generation_fn_from_checkpoint(path):
    """Returns (generate_fn, state); generate_fn maps numpy (3,H,W) -> (3,H,W)."""
    state = load_checkpoint(path)
    model = build_generator_from_state(state)
    if model is None:
        return (lambda x, y=None: x), state

    forward = generator_forward if state.architecture == "pix2pix" else hd_generator_forward

    def generate_fn(x, y=None):
        tensor = torch.from_numpy(np.ascontiguousarray(x, dtype=np.float32))
        out = forward(model, tensor.unsqueeze(0), mode="eval")
        return out[0].numpy()

    return generate_fn, state


def identity_checkpoint(path, image_size: int = 64) -> str:
    """Write an oracle checkpoint whose generator returns its input."""
    cfg = TrainConfig(image_size=image_size)
    state = CheckpointState(architecture="identity", epoch=0,
                            config_text=write_config(cfg), tensors={})
    return save_checkpoint(path, state)
