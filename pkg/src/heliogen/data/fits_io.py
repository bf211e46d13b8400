"""Minimal FITS primary-HDU reader/writer.

Covers the subset this pipeline ingests: a primary HDU holding one 2-D
image, standard 80-char cards in 2880-byte blocks, big-endian data with
BITPIX in {8, 16, 32, 64, -32, -64} and optional BSCALE/BZERO. Extensions
are ignored.
"""
from __future__ import annotations

import os
from datetime import datetime, timezone

import numpy as np

from ..errors import MalformedFits, MissingFile, MissingHeaderKey

BLOCK = 2880
CARD = 80

_BITPIX_DTYPE = {
    8: np.dtype(">u1"),
    16: np.dtype(">i2"),
    32: np.dtype(">i4"),
    64: np.dtype(">i8"),
    -32: np.dtype(">f4"),
    -64: np.dtype(">f8"),
}
_DTYPE_BITPIX = {
    np.dtype(np.uint8): 8,
    np.dtype(np.int16): 16,
    np.dtype(np.int32): 32,
    np.dtype(np.int64): 64,
    np.dtype(np.float32): -32,
    np.dtype(np.float64): -64,
}

TIMESTAMP_KEYS = ("DATE-OBS", "T_OBS", "DATE_OBS")


def _parse_value(text: str):
    text = text.strip()
    if not text:
        return None
    if text.startswith("'"):
        end = text.rfind("'")
        return text[1:end].replace("''", "'").rstrip()
    if text == "T":
        return True
    if text == "F":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text.replace("D", "E").replace("d", "e"))
    except ValueError:
        return text


def _parse_header(blocks: bytes) -> dict:
    header: dict = {}
    for i in range(0, len(blocks), CARD):
        card = blocks[i:i + CARD].decode("ascii", errors="replace")
        key = card[:8].strip()
        if key == "END":
            return header
        if key in ("", "COMMENT", "HISTORY"):
            continue
        if card[8:10] != "= ":
            continue
        body = card[10:]
        # strip trailing comment, but not slashes inside quoted strings
        if body.lstrip().startswith("'"):
            q = body.find("'", body.find("'") + 1)
            slash = body.find("/", q + 1)
        else:
            slash = body.find("/")
        if slash >= 0:
            body = body[:slash]
        header[key] = _parse_value(body)
    raise MalformedFits("header has no END card")


def load_fits(path: str | os.PathLike) -> tuple[np.ndarray, dict]:
    """Read the primary HDU of a FITS file.

    Returns the untouched 2-D data grid (native byte order) and the header
    as a key/value dict. BSCALE/BZERO, when present and non-trivial, are
    applied so the grid holds physical values.

    Raises MissingFile, MalformedFits, or MissingHeaderKey (no parseable
    observation timestamp).
    """
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise MissingFile(path)
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < BLOCK:
        raise MalformedFits(f"{path}: file shorter than one FITS block")
    if not raw.startswith(b"SIMPLE"):
        raise MalformedFits(f"{path}: missing SIMPLE card")

    # header spans whole blocks up to and including the one with END
    n_blocks = 1
    while True:
        chunk = raw[:n_blocks * BLOCK]
        if b"END     " in chunk or chunk.rstrip().endswith(b"END"):
            try:
                header = _parse_header(chunk)
                break
            except MalformedFits:
                pass
        n_blocks += 1
        if n_blocks * BLOCK > len(raw):
            raise MalformedFits(f"{path}: header has no END card")

    for key in ("BITPIX", "NAXIS"):
        if key not in header:
            raise MalformedFits(f"{path}: missing {key}")
    if header["NAXIS"] != 2:
        raise MalformedFits(f"{path}: expected a 2-D primary HDU, NAXIS={header['NAXIS']}")
    if header["BITPIX"] not in _BITPIX_DTYPE:
        raise MalformedFits(f"{path}: unsupported BITPIX {header['BITPIX']}")
    width, height = int(header["NAXIS1"]), int(header["NAXIS2"])
    dtype = _BITPIX_DTYPE[header["BITPIX"]]
    start = n_blocks * BLOCK
    nbytes = width * height * dtype.itemsize
    if start + nbytes > len(raw):
        raise MalformedFits(f"{path}: truncated data segment")
    data = np.frombuffer(raw[start:start + nbytes], dtype=dtype).reshape(height, width)
    data = data.astype(dtype.newbyteorder("="))

    bscale = header.get("BSCALE", 1.0)
    bzero = header.get("BZERO", 0.0)
    if bscale != 1.0 or bzero != 0.0:
        data = data.astype(np.float64) * bscale + bzero

    observed_at(header, path=path)  # validate a timestamp exists up front
    return data, header


def observed_at(header: dict, path: str = "<header>") -> datetime:
    """Extract the observation timestamp (UTC) from a header dict."""
    for key in TIMESTAMP_KEYS:
        value = header.get(key)
        if value is None:
            continue
        text = str(value).strip().removesuffix("Z")
        try:
            ts = datetime.fromisoformat(text)
        except ValueError:
            continue
        if ts.tzinfo is None:
            ts = ts.replace(tzinfo=timezone.utc)
        return ts
    raise MissingHeaderKey(f"{path}: no observation timestamp ({'/'.join(TIMESTAMP_KEYS)})")


def _format_card(key: str, value) -> bytes:
    if isinstance(value, bool):
        text = f"{key:<8}= {'T' if value else 'F':>20}"
    elif isinstance(value, int):
        text = f"{key:<8}= {value:>20}"
    elif isinstance(value, float):
        text = f"{key:<8}= {value:>20.10G}"
    else:
        quoted = "'" + str(value).replace("'", "''") + "'"
        text = f"{key:<8}= {quoted:<20}"
    return text.ljust(CARD).encode("ascii")


def write_fits(path: str | os.PathLike, data: np.ndarray, header: dict | None = None) -> None:
    """Write a 2-D array as a single-HDU FITS file.

    Used for test fixtures and cached products; real observations come from
    the archive already packaged.
    """
    data = np.asarray(data)
    if data.ndim != 2:
        raise ValueError("write_fits expects a 2-D array")
    if data.dtype not in _DTYPE_BITPIX:
        data = data.astype(np.float32)
    bitpix = _DTYPE_BITPIX[data.dtype]

    cards = [
        _format_card("SIMPLE", True),
        _format_card("BITPIX", bitpix),
        _format_card("NAXIS", 2),
        _format_card("NAXIS1", data.shape[1]),
        _format_card("NAXIS2", data.shape[0]),
    ]
    for key, value in (header or {}).items():
        cards.append(_format_card(key[:8].upper(), value))
    cards.append(b"END".ljust(CARD))
    head = b"".join(cards)
    head += b" " * (-len(head) % BLOCK)

    payload = data.astype(data.dtype.newbyteorder(">")).tobytes()
    payload += b"\x00" * (-len(payload) % BLOCK)
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(payload)
