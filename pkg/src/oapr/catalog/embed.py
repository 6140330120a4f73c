"""Phrase embedding providers used to cluster the attribute catalog."""

from __future__ import annotations

import re
import zlib

import numpy as np

from oapr.catalog.records import AttributeCatalog
from oapr.errors import ProviderFailure


class HashNGramEmbedder:
    """Deterministic character n-gram hashing embedder.

    Needs no downloads or model weights, so every catalog test can run
    offline. Phrases sharing wording land near each other, which is all the
    cluster step requires.
    """

    def __init__(self, dim: int = 256, ngram_sizes: tuple[int, ...] = (3, 4, 5)):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.ngram_sizes = ngram_sizes

    def _normalize(self, phrase: str) -> str:
        collapsed = re.sub(r"\s+", " ", phrase.strip().lower())
        return f" {collapsed} "

    def embed(self, phrases: list[str]) -> np.ndarray:
        out = np.zeros((len(phrases), self.dim), dtype=np.float64)
        for row, phrase in enumerate(phrases):
            text = self._normalize(phrase)
            for n in self.ngram_sizes:
                for i in range(max(len(text) - n + 1, 0)):
                    gram = text[i : i + n].encode("utf-8")
                    h = zlib.crc32(gram)
                    bucket = h % self.dim
                    sign = 1.0 if (h >> 17) & 1 else -1.0
                    out[row, bucket] += sign
            norm = np.linalg.norm(out[row])
            if norm > 0:
                out[row] /= norm
        return out


class SentenceEncoderAdapter:
    """Adapter slot for a pre-trained sentence encoder.

    Imports lazily so the core package has no heavyweight dependency; any
    failure to load or encode surfaces as ProviderFailure.
    """

    def __init__(self, model_name: str = "all-MiniLM-L6-v2"):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:  # pragma: no cover - env without the extra
            raise ProviderFailure(f"sentence-transformers is not installed: {exc}") from exc
        try:
            self._model = SentenceTransformer(model_name)
        except Exception as exc:  # pragma: no cover - offline env
            raise ProviderFailure(f"cannot load sentence encoder {model_name!r}: {exc}") from exc
        self.dim = int(self._model.get_sentence_embedding_dimension())

    def embed(self, phrases: list[str]) -> np.ndarray:
        try:
            vectors = self._model.encode(phrases, convert_to_numpy=True)
        except Exception as exc:  # pragma: no cover
            raise ProviderFailure(f"sentence encoder failed: {exc}") from exc
        return np.asarray(vectors, dtype=np.float64)


def embed_phrases(catalog: AttributeCatalog, embedder) -> np.ndarray:
    """Embed every record's phrase; rows come back L2-normalized.

    Row order follows catalog record order. Raises ProviderFailure when the
    provider errors, returns a wrong shape, or yields a non-finite or
    zero-norm vector.
    """
    dim = int(getattr(embedder, "dim"))
    phrases = list(catalog.phrases)
    if not phrases:
        return np.zeros((0, dim), dtype=np.float64)
    try:
        matrix = np.asarray(embedder.embed(phrases), dtype=np.float64)
    except ProviderFailure:
        raise
    except Exception as exc:
        raise ProviderFailure(f"embedder raised: {exc}") from exc
    if matrix.shape != (len(phrases), dim):
        raise ProviderFailure(
            f"embedder returned shape {matrix.shape}, expected {(len(phrases), dim)}"
        )
    if not np.all(np.isfinite(matrix)):
        raise ProviderFailure("embedder returned non-finite values")
    norms = np.linalg.norm(matrix, axis=1)
    if np.any(norms < 1e-12):
        bad = catalog.records[int(np.argmin(norms))].raw_name
        raise ProviderFailure(f"zero-norm embedding for attribute {bad!r}")
    return matrix / norms[:, None]
