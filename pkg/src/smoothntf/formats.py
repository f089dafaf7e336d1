"""Portable on-disk formats: DNT tensors, binary PPM/PGM images, CSV reports.

DNT ("dense numeric tensor", version 1) is a two-line ASCII header followed
by a raw little-endian float64 payload:

    line 1:  DNT1
    line 2:  N I_1 I_2 ... I_N          (space-separated decimal integers)
    payload: 8 * prod(I_n) bytes, row-major (last index fastest)

Round trips are bit-exact.  All writers go through a temp file plus rename
so partially written files are never observed.
"""

from __future__ import annotations

import csv
import io
import os
import tempfile
from typing import IO, Iterable, Sequence

import numpy as np

from .errors import TensorFormatError
from .tensors import as_tensor

__all__ = [
    "read_tensor",
    "write_tensor",
    "read_image_ppm",
    "write_image_ppm",
    "read_image_pgm",
    "write_csv",
    "atomic_write_bytes",
]

_MAGIC = b"DNT1"


def atomic_write_bytes(path, payload: bytes) -> None:
    """Write via temp file + rename in the destination directory."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def tensor_to_bytes(x: np.ndarray) -> bytes:
    x = as_tensor(x)
    header = _MAGIC + b"\n" + " ".join([str(x.ndim)] + [str(d) for d in x.shape]).encode() + b"\n"
    return header + np.ascontiguousarray(x, dtype="<f8").tobytes()


def tensor_from_bytes(raw: bytes) -> np.ndarray:
    buf = io.BytesIO(raw)
    magic = buf.readline()
    if magic.rstrip(b"\n") != _MAGIC:
        raise TensorFormatError(f"bad magic {magic[:8]!r}, expected {_MAGIC!r}", offset=0)
    header_line = buf.readline()
    header_offset = len(magic)
    try:
        fields = [int(t) for t in header_line.split()]
    except ValueError:
        raise TensorFormatError("dimension header is not numeric", offset=header_offset) from None
    if not fields:
        raise TensorFormatError("empty dimension header", offset=header_offset)
    n, dims = fields[0], fields[1:]
    if n < 1 or len(dims) != n or any(d < 1 for d in dims):
        raise TensorFormatError(
            f"inconsistent dimension header {header_line!r}", offset=header_offset
        )
    payload_offset = header_offset + len(header_line)
    expected = 8 * int(np.prod(dims, dtype=np.int64))
    payload = buf.read()
    if len(payload) < expected:
        raise TensorFormatError(
            f"truncated payload: expected {expected} bytes, found {len(payload)}",
            offset=payload_offset + len(payload),
        )
    if len(payload) > expected:
        raise TensorFormatError(
            f"{len(payload) - expected} trailing bytes after payload",
            offset=payload_offset + expected,
        )
    values = np.frombuffer(payload, dtype="<f8").reshape(dims)
    if not np.all(np.isfinite(values)):
        raise TensorFormatError("payload contains non-finite values", offset=payload_offset)
    return np.ascontiguousarray(values, dtype=np.float64)


def write_tensor(path, x: np.ndarray) -> None:
    atomic_write_bytes(path, tensor_to_bytes(x))


def read_tensor(path) -> np.ndarray:
    with open(path, "rb") as f:
        return tensor_from_bytes(f.read())


def _read_pnm_tokens(raw: bytes, count: int, start: int) -> tuple[list[int], int]:
    """Read whitespace-separated integer tokens, skipping '#' comments."""
    tokens: list[int] = []
    pos = start
    while len(tokens) < count:
        if pos >= len(raw):
            raise TensorFormatError("unexpected end of header", offset=pos)
        ch = raw[pos : pos + 1]
        if ch.isspace():
            pos += 1
            continue
        if ch == b"#":
            nl = raw.find(b"\n", pos)
            if nl == -1:
                raise TensorFormatError("unterminated comment", offset=pos)
            pos = nl + 1
            continue
        end = pos
        while end < len(raw) and not raw[end : end + 1].isspace():
            end += 1
        try:
            tokens.append(int(raw[pos:end]))
        except ValueError:
            raise TensorFormatError(
                f"invalid header token {raw[pos:end]!r}", offset=pos
            ) from None
        pos = end
    # exactly one whitespace byte separates the header from the pixel data
    if pos >= len(raw) or not raw[pos : pos + 1].isspace():
        raise TensorFormatError("missing separator before pixel data", offset=pos)
    return tokens, pos + 1


def _read_pnm(path, magic: bytes, channels: int) -> np.ndarray:
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:2] != magic:
        raise TensorFormatError(
            f"unsupported image format {raw[:2]!r}, expected binary {magic.decode()}", offset=0
        )
    (width, height, maxval), data_start = _read_pnm_tokens(raw, 3, 2)
    if maxval != 255:
        raise TensorFormatError(f"unsupported max value {maxval}, expected 255", offset=2)
    expected = width * height * channels
    data = raw[data_start : data_start + expected]
    if len(data) < expected:
        raise TensorFormatError(
            f"truncated pixel data: expected {expected} bytes, found {len(data)}",
            offset=data_start + len(data),
        )
    img = np.frombuffer(data, dtype=np.uint8).astype(np.float64)
    if channels == 1:
        return img.reshape(height, width)
    return img.reshape(height, width, channels)


def read_image_ppm(path) -> np.ndarray:
    """Binary PPM (P6, maxval 255) to an (H, W, 3) float tensor in [0, 255]."""
    return _read_pnm(path, b"P6", 3)


def read_image_pgm(path) -> np.ndarray:
    """Binary PGM (P5, maxval 255) to an (H, W) float array in [0, 255]."""
    return _read_pnm(path, b"P5", 1)


def write_image_ppm(path, x: np.ndarray) -> None:
    """Write an (H, W, 3) tensor as binary PPM, clamping to [0, 255].

    Values are rounded half-up so a written-then-read image is stable.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3 or x.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) tensor, got shape {x.shape}")
    pixels = np.clip(np.floor(x + 0.5), 0.0, 255.0).astype(np.uint8)
    h, w, _ = x.shape
    header = f"P6\n{w} {h}\n255\n".encode()
    atomic_write_bytes(path, header + pixels.tobytes())


def write_csv(destination: IO[str] | str | os.PathLike, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """CSV with a header row, '.' decimals and '\\n' line endings.

    ``destination`` may be a path (written atomically) or a text stream.
    """

    def render(value) -> str:
        if isinstance(value, float):
            return repr(float(value))
        return str(value)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(header))
    for row in rows:
        writer.writerow([render(v) for v in row])
    text = buf.getvalue()
    if hasattr(destination, "write"):
        destination.write(text)
    else:
        atomic_write_bytes(destination, text.encode())
