"""Writer for the `.lluf` binary feature format.

Layout, all integers little-endian:

    header:  magic "LLUF" | u32 version (== 1) | u8 kind | u32 dim
             | u32 count | u32 n_classes
    names:   per class: u16 byte length, then UTF-8 bytes
    records: kind 0 (labeled image features): u32 label, dim float32
             kind 1 (class embeddings):       dim float32, in class order

Floats are written as explicit little-endian float32 regardless of the
platform default, and every vector is unit-normalized in float64 first.
"""

from __future__ import annotations

import os
import struct

import numpy as np

MAGIC = b"LLUF"
VERSION = 1
KIND_FEATURES = 0
KIND_CLASSES = 1

_HEADER = struct.Struct("<4sIBIII")


def _normalized_f32(rows: np.ndarray) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.float64)
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    if (norms <= 1e-12).any():
        raise ValueError("cannot write a zero-norm feature vector")
    return (rows / norms).astype("<f4")


def write_lluf(path: str | os.PathLike, kind: int, dim: int,
               class_names: list[str], vectors: np.ndarray,
               labels: np.ndarray | None = None) -> None:
    """Write one feature file; atomic via temp-then-rename."""
    if kind not in (KIND_FEATURES, KIND_CLASSES):
        raise ValueError(f"unknown kind {kind}")
    if kind == KIND_CLASSES and len(vectors) != len(class_names):
        raise ValueError("kind 1 needs exactly one vector per class")
    if kind == KIND_FEATURES:
        if labels is None or len(labels) != len(vectors):
            raise ValueError("kind 0 needs one label per vector")
        if len(labels) and (np.min(labels) < 0 or np.max(labels) >= len(class_names)):
            raise ValueError("label outside the class-name table")

    parts = [_HEADER.pack(MAGIC, VERSION, kind, dim, len(vectors), len(class_names))]
    for name in class_names:
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise ValueError(f"class name too long: {name[:32]}...")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)

    stored = _normalized_f32(vectors) if len(vectors) else \
        np.empty((0, dim), dtype="<f4")
    if stored.shape[1] != dim:
        raise ValueError(f"vector dim {stored.shape[1]} != declared dim {dim}")
    if kind == KIND_FEATURES:
        for label, row in zip(labels, stored):
            parts.append(struct.pack("<I", int(label)))
            parts.append(row.tobytes())
    else:
        parts.append(stored.tobytes())

    tmp = os.fspath(path) + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(b"".join(parts))
    os.replace(tmp, path)
