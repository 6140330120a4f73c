"""Immutable gallery index: per-image body features ready for query scoring.

File layout: 8-byte magic, little-endian uint64 header length, UTF-8 JSON
header (version, encoder_fingerprint, n_body, feat_dim, entry_count,
built_at, catalog echo, entries), then row-major float32 feature blocks in
entry order.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import torch

from oapr.errors import ImageLoadError
from oapr.retrieval.gallery import GalleryEntry

MAGIC = b"OAPRIDX1"
INDEX_VERSION = 1


@dataclass(frozen=True)
class GalleryIndex:
    entries: tuple[GalleryEntry, ...]
    features: np.ndarray  # (E, N, C) float32, entry order
    encoder_fingerprint: str
    catalog_names: tuple[str, ...]
    catalog_phrases: tuple[str, ...]
    built_at: str

    def __post_init__(self):
        if self.features.shape[0] != len(self.entries):
            raise ValueError("one feature block per entry required")
        ids = [e.image_id for e in self.entries]
        if ids != sorted(ids):
            raise ValueError("entries must be sorted by image_id")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def n_body(self) -> int:
        return self.features.shape[1]

    @property
    def feat_dim(self) -> int:
        return self.features.shape[2]

    def features_digest(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.features).tobytes()).hexdigest()

    def label_column(self, raw_name: str) -> int:
        return self.catalog_names.index(raw_name)

    def labels_for(self, raw_names: tuple[str, ...]) -> dict[str, dict[str, int]]:
        cols = [self.label_column(n) for n in raw_names]
        return {
            e.image_id: {n: e.labels[c] for n, c in zip(raw_names, cols)}
            for e in self.entries
        }


def load_image_array(uri: str, resolution: int) -> np.ndarray:
    """Load an image file as float32 (H, W, 3) in [0, 1] at the given square size."""
    from PIL import Image

    try:
        with Image.open(uri) as img:
            rgb = img.convert("RGB")
            if rgb.size != (resolution, resolution):
                rgb = rgb.resize((resolution, resolution), Image.BILINEAR)
            return np.asarray(rgb, dtype=np.float32) / 255.0
    except FileNotFoundError as exc:
        raise ImageLoadError(uri, "file not found") from exc
    except OSError as exc:
        raise ImageLoadError(uri, str(exc)) from exc


def build_index(gallery: list[GalleryEntry], model, batch_size: int = 32) -> GalleryIndex:
    """Encode every gallery image once and freeze the body features.

    Deterministic given the model and gallery; entries come out sorted by
    image_id regardless of input order.
    """
    entries = tuple(sorted(gallery, key=lambda e: e.image_id))
    feats: list[np.ndarray] = []
    resolution = model.vision.resolution
    with torch.no_grad():
        for start in range(0, len(entries), batch_size):
            chunk = entries[start : start + batch_size]
            arrays = []
            for entry in chunk:
                try:
                    arrays.append(load_image_array(entry.image_uri, resolution))
                except ImageLoadError:
                    raise
                except Exception as exc:
                    raise ImageLoadError(entry.image_id, str(exc)) from exc
            images = torch.as_tensor(np.stack(arrays))
            _, _, f_body = model.vision(images, model.body_prompt.tokens)
            feats.append(f_body.to(torch.float32).cpu().numpy())
    features = (
        np.concatenate(feats, axis=0)
        if feats
        else np.zeros((0, model.body_prompt.n_prompts, model.vision.out_dim), dtype=np.float32)
    )
    return GalleryIndex(
        entries=entries,
        features=np.ascontiguousarray(features, dtype=np.float32),
        encoder_fingerprint=model.encoder_fingerprint,
        catalog_names=model.catalog_names,
        catalog_phrases=model.catalog_phrases,
        built_at=datetime.now(timezone.utc).isoformat(),
    )


def save_index(index: GalleryIndex, path: str | Path) -> None:
    header = {
        "version": INDEX_VERSION,
        "encoder_fingerprint": index.encoder_fingerprint,
        "n_body": index.n_body,
        "feat_dim": index.feat_dim,
        "entry_count": len(index),
        "built_at": index.built_at,
        "catalog_names": list(index.catalog_names),
        "catalog_phrases": list(index.catalog_phrases),
        "entries": [
            {"image_id": e.image_id, "image_uri": e.image_uri, "labels": list(e.labels)}
            for e in index.entries
        ],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(index.features, dtype="<f4").tobytes())


def load_index(path: str | Path) -> GalleryIndex:
    raw = Path(path).read_bytes()
    if raw[: len(MAGIC)] != MAGIC:
        raise ValueError(f"{path}: not an index file")
    offset = len(MAGIC)
    (blob_len,) = struct.unpack_from("<Q", raw, offset)
    offset += 8
    header = json.loads(raw[offset : offset + blob_len].decode("utf-8"))
    offset += blob_len
    if header["version"] != INDEX_VERSION:
        raise ValueError(f"unsupported index version {header['version']}")
    count, n_body, dim = header["entry_count"], header["n_body"], header["feat_dim"]
    features = np.frombuffer(raw, dtype="<f4", offset=offset, count=count * n_body * dim)
    features = features.reshape(count, n_body, dim).copy()
    entries = tuple(
        GalleryEntry(image_id=e["image_id"], labels=tuple(e["labels"]), image_uri=e["image_uri"])
        for e in header["entries"]
    )
    return GalleryIndex(
        entries=entries,
        features=features,
        encoder_fingerprint=header["encoder_fingerprint"],
        catalog_names=tuple(header["catalog_names"]),
        catalog_phrases=tuple(header["catalog_phrases"]),
        built_at=header["built_at"],
    )
