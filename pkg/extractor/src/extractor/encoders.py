"""Encoder registry.

Two encoders are provided:

- "histogram": a deterministic, dependency-light joint space built from RGB
  color statistics.  Images map to a Hellinger-normalized 8x8x8 color
  histogram; text maps to the histogram of a solid patch of the first color
  word found in the prompt (any name PIL's ImageColor understands), or to a
  seeded pseudo-random direction when no color word matches.  It needs no
  downloaded weights, so it keeps the pipeline and its tests runnable
  offline while preserving the property that matched image/text pairs score
  higher cosine similarity than unmatched ones.

- any sentence-transformers model name (e.g. "clip-ViT-B-32"): a real
  contrastive vision-language encoder, used when its weights are available.
"""

from __future__ import annotations

import hashlib

import numpy as np
from PIL import Image, ImageColor

HISTOGRAM = "histogram"
_BINS = 8  # per channel; 8**3 = 512 dimensions


class EncoderError(Exception):
    pass


class HistogramEncoder:
    dim = _BINS ** 3

    def encode_images(self, images: list[Image.Image]) -> np.ndarray:
        return np.stack([self._histogram(img) for img in images])

    def encode_texts(self, texts: list[str]) -> np.ndarray:
        return np.stack([self._text_vector(t) for t in texts])

    def _histogram(self, img: Image.Image) -> np.ndarray:
        rgb = np.asarray(img.convert("RGB"), dtype=np.uint8).reshape(-1, 3)
        idx = (rgb // (256 // _BINS)).astype(np.int64)
        flat = (idx[:, 0] * _BINS + idx[:, 1]) * _BINS + idx[:, 2]
        counts = np.bincount(flat, minlength=self.dim).astype(np.float64)
        return np.sqrt(counts / counts.sum())  # Hellinger embedding

    def _text_vector(self, text: str) -> np.ndarray:
        for word in text.replace(".", " ").replace(",", " ").lower().split():
            try:
                color = ImageColor.getrgb(word)
            except ValueError:
                continue
            patch = Image.new("RGB", (8, 8), color)
            return self._histogram(patch)
        # no color word: a stable pseudo-random unit direction from the text
        digest = hashlib.sha256(text.encode("utf-8")).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        v = rng.standard_normal(self.dim)
        return v / np.linalg.norm(v)


class SentenceTransformerEncoder:
    def __init__(self, model_name: str):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise EncoderError(
                "sentence-transformers is not installed; "
                f"cannot load model {model_name!r}") from exc
        try:
            self._model = SentenceTransformer(model_name)
        except Exception as exc:
            raise EncoderError(f"cannot load model {model_name!r}: {exc}") from exc
        self.dim = int(self._model.get_sentence_embedding_dimension())

    def encode_images(self, images: list) -> np.ndarray:
        return np.asarray(self._model.encode(images, convert_to_numpy=True),
                          dtype=np.float64)

    def encode_texts(self, texts: list[str]) -> np.ndarray:
        return np.asarray(self._model.encode(texts, convert_to_numpy=True),
                          dtype=np.float64)


def get_encoder(name: str):
    if name == HISTOGRAM:
        return HistogramEncoder()
    return SentenceTransformerEncoder(name)
