"""Atomic file writing plus the small image/table formats the pipeline emits:
binary PGM (P5) planes and UTF-8 CSV tables."""

from __future__ import annotations

import csv
import io
import os
import tempfile

import numpy as np

from .errors import FormatError


def atomic_write_bytes(path, data: bytes) -> None:
    """Write via a temp file + rename so interrupted runs never leave a
    truncated file that parses as valid."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=os.path.basename(path) + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def write_plane_pgm(plane: np.ndarray, path) -> None:
    """Binary PGM (P5), maxval 255."""
    plane = np.asarray(plane)
    if plane.ndim != 2:
        raise FormatError(f"PGM plane must be 2-D, got shape {plane.shape}")
    plane = plane.astype(np.uint8)
    h, w = plane.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    atomic_write_bytes(path, header + plane.tobytes())


def read_plane_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P5"):
        raise FormatError(f"{path}: not a binary PGM (P5) file")
    # header = magic, width, height, maxval as whitespace-separated tokens
    tokens, pos = [], 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated PGM header")
        tokens.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    try:
        w, h, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise FormatError(f"{path}: bad PGM header tokens {tokens}") from exc
    if maxval != 255:
        raise FormatError(f"{path}: unsupported PGM maxval {maxval}")
    if len(data) - pos < w * h:
        raise FormatError(f"{path}: PGM payload has {len(data) - pos} bytes, needs {w * h}")
    return np.frombuffer(data, dtype=np.uint8, count=w * h, offset=pos).reshape(h, w)


def write_csv(rows, path, header: list[str]) -> None:
    """UTF-8 CSV with a header row; written atomically."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    atomic_write_bytes(path, buf.getvalue().encode("utf-8"))


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            rows = list(reader)
    except OSError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if not rows:
        raise FormatError(f"{path}: empty CSV, expected a header row")
    return rows[0], rows[1:]
