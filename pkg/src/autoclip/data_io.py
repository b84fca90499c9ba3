"""Dataset ingestion (CSV, IDX) and atomic file output helpers."""

from __future__ import annotations

import os
import struct
import tempfile

import numpy as np

from .errors import InvalidArgumentError, ParseError
from .models import Dataset

__all__ = ["load_dataset", "atomic_write_text"]

IDX_MAGIC_LABELS = 0x00000801
IDX_MAGIC_IMAGES = 0x00000803


def atomic_write_text(path: str, text: str) -> None:
    """Write text to path via a temp file and rename, LF endings."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_csv(path: str) -> Dataset:
    with open(path, "r", newline="") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError(f"{path}: empty file")
    header = [c.strip() for c in lines[0].split(",")]
    if not header or header[0] != "label":
        raise ParseError(f"{path}:1: header must start with 'label', got {lines[0]!r}")
    m = len(header) - 1
    if m < 1:
        raise ParseError(f"{path}:1: need at least one feature column")
    labels, rows = [], []
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != m + 1:
            raise ParseError(
                f"{path}:{ln}: expected {m + 1} cells, got {len(cells)}"
            )
        try:
            labels.append(float(cells[0]))
            rows.append([float(c) for c in cells[1:]])
        except ValueError as exc:
            raise ParseError(f"{path}:{ln}: {exc}") from None
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return Dataset(np.array(rows), np.array(labels), os.path.basename(path))


def _read_idx(path: str, expect_magic: int):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 4:
        raise ParseError(f"{path}: truncated at byte {len(raw)}, no magic")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic != expect_magic:
        raise ParseError(
            f"{path}: magic 0x{magic:08x} at byte 0, expected 0x{expect_magic:08x}"
        )
    ndim = magic & 0xFF
    header_len = 4 + 4 * ndim
    if len(raw) < header_len:
        raise ParseError(f"{path}: truncated header, {len(raw)} < {header_len} bytes")
    dims = struct.unpack(f">{ndim}I", raw[4:header_len])
    n_bytes = int(np.prod(dims))
    expected = header_len + n_bytes
    if len(raw) != expected:
        raise ParseError(
            f"{path}: expected {expected} bytes, got {len(raw)}"
        )
    data = np.frombuffer(raw, dtype=np.uint8, offset=header_len)
    return dims, data


def _load_idx(images_path: str, labels_path: str) -> Dataset:
    dims, pixels = _read_idx(images_path, IDX_MAGIC_IMAGES)
    n = dims[0]
    width = int(np.prod(dims[1:]))
    ldims, raw_labels = _read_idx(labels_path, IDX_MAGIC_LABELS)
    if ldims[0] != n:
        raise ParseError(
            f"{labels_path}: {ldims[0]} labels but {images_path} has {n} images"
        )
    features = pixels.reshape(n, width).astype(np.float64) / 255.0
    return Dataset(features, raw_labels.astype(np.int64),
                   os.path.basename(images_path))


def load_dataset(path: str, fmt: str, labels_path: str | None = None) -> Dataset:
    """Load a dataset from disk.

    ``csv`` expects a header row label,f1,...,fm. ``idx`` expects the
    big-endian image file at ``path`` and its label file at ``labels_path``;
    pixel bytes are scaled to [0, 1].
    """
    if not os.path.exists(path):
        raise ParseError(f"no such file: {path}")
    if fmt == "csv":
        return _load_csv(path)
    if fmt == "idx":
        if labels_path is None:
            raise InvalidArgumentError("idx format needs labels_path")
        if not os.path.exists(labels_path):
            raise ParseError(f"no such file: {labels_path}")
        return _load_idx(path, labels_path)
    raise InvalidArgumentError(f"unknown dataset format {fmt!r}")
