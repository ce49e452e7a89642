"""Folder-of-images and class-list extraction to `.lluf` files."""

from __future__ import annotations

import os
import sys

import numpy as np
from PIL import Image, UnidentifiedImageError

from .encoders import get_encoder
from .wire import KIND_CLASSES, KIND_FEATURES, write_lluf

DEFAULT_TEMPLATE = "a photo of a {}"

IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg", ".bmp", ".gif", ".webp", ".tiff"}


def _class_folders(image_root: str) -> list[str]:
    folders = sorted(
        entry.name for entry in os.scandir(image_root) if entry.is_dir())
    if not folders:
        raise ValueError(f"{image_root} has no class subfolders")
    return folders


def extract_images(image_root: str, model_name: str, out_path: str) -> int:
    """Encode every readable image under per-class subfolders.

    Labels follow the lexicographic order of the subfolder names.  Unreadable
    images are skipped with a warning; returns the number skipped.
    """
    encoder = get_encoder(model_name)
    class_names = _class_folders(image_root)
    vectors, labels = [], []
    skipped = 0
    for label, name in enumerate(class_names):
        folder = os.path.join(image_root, name)
        for fname in sorted(os.listdir(folder)):
            if os.path.splitext(fname)[1].lower() not in IMAGE_EXTENSIONS:
                continue
            path = os.path.join(folder, fname)
            try:
                with Image.open(path) as img:
                    img.load()
                    vec = encoder.encode_images([img])[0]
            except (OSError, UnidentifiedImageError) as exc:
                print(f"warning: skipping unreadable image {path}: {exc}",
                      file=sys.stderr)
                skipped += 1
                continue
            vectors.append(vec)
            labels.append(label)
    if not vectors:
        raise ValueError(f"no readable images under {image_root}")
    write_lluf(out_path, KIND_FEATURES, encoder.dim, class_names,
               np.stack(vectors), np.asarray(labels, dtype=np.int64))
    if skipped:
        print(f"skipped {skipped} unreadable image(s)", file=sys.stderr)
    return skipped


def extract_classes(class_names: list[str], template: str, model_name: str,
                    out_path: str) -> None:
    """Encode template.format(name) per class, written in list order."""
    if not class_names:
        raise ValueError("class list is empty")
    encoder = get_encoder(model_name)
    prompts = [template.format(name) for name in class_names]
    vectors = encoder.encode_texts(prompts)
    write_lluf(out_path, KIND_CLASSES, encoder.dim, list(class_names), vectors)
