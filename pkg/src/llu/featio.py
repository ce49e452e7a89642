"""Reader/writer for the `.lluf` binary feature format.

Layout, all integers little-endian:

    header:  magic "LLUF" | u32 version (== 1) | u8 kind | u32 dim
             | u32 count | u32 n_classes
    names:   per class: u16 byte length, then UTF-8 bytes
    records: kind 0 (labeled image features): u32 label, dim float32
             kind 1 (class embeddings):       dim float32, in class order

Vectors are stored normalized.  Stored float32 rows are fixed points of the
read-renormalize-write cycle, so rewriting a file read back is byte-identical.
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .core import ClassEmbeddingSet, FeatureSet, normalize_rows
from .errors import (BadMagic, CorruptRecord, InvalidSet, IoError,
                     LabelOutOfRange, UnnormalizedVector, UnsupportedVersion)

MAGIC = b"LLUF"
VERSION = 1
KIND_FEATURES = 0
KIND_CLASSES = 1

_HEADER = struct.Struct("<4sIBIII")


def _to_stored_f32(rows: np.ndarray) -> np.ndarray:
    """Normalize rows and cast to float32, resolved to a stable byte pattern.

    The map f32 -> renormalize in f64 -> f32 usually reaches a fixed point,
    but some rows fall into a short cycle of byte patterns instead.  Each row
    is iterated until its trajectory repeats and the byte-smallest member of
    the terminal cycle is stored; rewriting a file read back then lands in the
    same cycle and picks the same member, so rewrites are byte-identical.
    """
    out = np.empty(rows.shape, dtype=np.float32)
    for i, row in enumerate(normalize_rows(np.atleast_2d(rows))):
        cur = row.astype(np.float32)
        seen: dict[bytes, int] = {}
        trail = []
        while cur.tobytes() not in seen:
            seen[cur.tobytes()] = len(trail)
            trail.append(cur)
            back = cur.astype(np.float64)
            cur = (back / np.linalg.norm(back)).astype(np.float32)
        cycle = trail[seen[cur.tobytes()]:]
        out[i] = min(cycle, key=lambda r: r.tobytes())
    return out


def write_features(fset: FeatureSet | ClassEmbeddingSet, path: str | os.PathLike) -> None:
    """Write a feature or class-embedding set; atomic via temp-then-rename."""
    if isinstance(fset, FeatureSet):
        kind, count = KIND_FEATURES, len(fset)
    elif isinstance(fset, ClassEmbeddingSet):
        kind, count = KIND_CLASSES, len(fset)
    else:
        raise InvalidSet(f"cannot write object of type {type(fset).__name__}")

    parts = [_HEADER.pack(MAGIC, VERSION, kind, fset.dim, count, len(fset.class_names))]
    for name in fset.class_names:
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise InvalidSet(f"class name too long: {name[:32]}...")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)

    stored = _to_stored_f32(fset.vectors) if count else np.empty((0, fset.dim), np.float32)
    if kind == KIND_FEATURES:
        for label, row in zip(fset.labels, stored):
            parts.append(struct.pack("<I", int(label)))
            parts.append(row.tobytes())
    else:
        parts.append(stored.tobytes())

    data = b"".join(parts)
    tmp = os.fspath(path) + ".tmp"
    try:
        with open(tmp, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except OSError as exc:
        raise IoError(str(exc)) from exc


def _validated_rows(raw: np.ndarray, offset: int) -> np.ndarray:
    rows = raw.astype(np.float64)
    norms = np.linalg.norm(rows, axis=1)
    bad = np.flatnonzero((norms < 0.99) | (norms > 1.01))
    if bad.size:
        raise UnnormalizedVector(
            f"vector {bad[0]} has norm {norms[bad[0]]:.6g} (file offset ~{offset})")
    return rows / norms[:, None]


def read_features(path: str | os.PathLike) -> FeatureSet | ClassEmbeddingSet:
    """Read and validate a `.lluf` file written by write_features."""
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise IoError(str(exc)) from exc

    if len(data) < _HEADER.size:
        raise CorruptRecord("file shorter than header", offset=len(data))
    magic, version, kind, dim, count, n_classes = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise BadMagic(f"expected {MAGIC!r}, found {magic!r}")
    if version != VERSION:
        raise UnsupportedVersion(f"version {version}")
    if kind not in (KIND_FEATURES, KIND_CLASSES):
        raise CorruptRecord(f"unknown kind {kind}", offset=4 + 4)
    if dim < 2:
        raise CorruptRecord(f"dim {dim} < 2", offset=9)
    if kind == KIND_CLASSES and count != n_classes:
        raise CorruptRecord(f"kind 1 count {count} != n_classes {n_classes}", offset=13)

    pos = _HEADER.size
    names = []
    for i in range(n_classes):
        if pos + 2 > len(data):
            raise CorruptRecord(f"truncated name table at class {i}", offset=pos)
        (nlen,) = struct.unpack_from("<H", data, pos)
        pos += 2
        if pos + nlen > len(data):
            raise CorruptRecord(f"truncated class name {i}", offset=pos)
        names.append(data[pos:pos + nlen].decode("utf-8"))
        pos += nlen

    vec_bytes = 4 * dim
    rec_bytes = vec_bytes + (4 if kind == KIND_FEATURES else 0)
    expected = pos + count * rec_bytes
    if len(data) != expected:
        raise CorruptRecord(
            f"byte length {len(data)} disagrees with declared count {count} "
            f"(expected {expected})", offset=pos)

    if kind == KIND_CLASSES:
        raw = np.frombuffer(data, dtype="<f4", count=count * dim, offset=pos)
        rows = _validated_rows(raw.reshape(count, dim), pos) if count else \
            np.empty((0, dim))
        return ClassEmbeddingSet(dim=dim, class_names=tuple(names), vectors=rows)

    labels = np.empty(count, dtype=np.int64)
    raw = np.empty((count, dim), dtype=np.float32)
    for i in range(count):
        (label,) = struct.unpack_from("<I", data, pos)
        if label >= n_classes:
            raise LabelOutOfRange(f"record {i}: label {label} >= n_classes {n_classes}")
        labels[i] = label
        raw[i] = np.frombuffer(data, dtype="<f4", count=dim, offset=pos + 4)
        pos += rec_bytes
    rows = _validated_rows(raw, pos) if count else np.empty((0, dim))
    return FeatureSet(dim=dim, class_names=tuple(names), vectors=rows, labels=labels)
