import sys
from pathlib import Path

import numpy as np
import pytest
import torch

sys.path.insert(0, str(Path(__file__).parent))

from oapr.catalog import HashNGramEmbedder, cluster_attributes, embed_phrases, partition_clusters
from oapr.harness.synthetic import labels_for, render_person, sample_world, synthetic_catalog
from oapr.retrieval.gallery import GalleryEntry


@pytest.fixture(scope="session")
def synth_catalog():
    return synthetic_catalog()


@pytest.fixture(scope="session")
def synth_manifest(synth_catalog):
    embeddings = embed_phrases(synth_catalog, HashNGramEmbedder())
    assignment = cluster_attributes(embeddings, 3)
    return partition_clusters(assignment, synth_catalog, seed=13)


def build_synth_gallery(catalog, n: int, seed: int, prefix: str):
    """In-memory gallery: entries plus the stacked image array."""
    entries, images = [], []
    for idx, (image_id, colors) in enumerate(sample_world(n, seed, prefix)):
        rng = np.random.default_rng((seed, idx))
        images.append(render_person(colors, rng))
        label_map = labels_for(colors)
        entries.append(
            GalleryEntry(
                image_id=image_id,
                labels=tuple(label_map[name] for name in catalog.raw_names),
                image_uri=f"mem://{image_id}",
            )
        )
    return entries, np.stack(images)


def memory_index(model, entries, images):
    """Build a GalleryIndex from preloaded arrays (no disk round trip)."""
    from datetime import datetime, timezone

    from oapr.retrieval.index import GalleryIndex

    order = sorted(range(len(entries)), key=lambda i: entries[i].image_id)
    with torch.no_grad():
        _, _, f_body = model.vision(
            torch.as_tensor(images[order]), model.body_prompt.tokens
        )
    return GalleryIndex(
        entries=tuple(entries[i] for i in order),
        features=np.ascontiguousarray(f_body.cpu().numpy(), dtype=np.float32),
        encoder_fingerprint=model.encoder_fingerprint,
        catalog_names=model.catalog_names,
        catalog_phrases=model.catalog_phrases,
        built_at=datetime.now(timezone.utc).isoformat(),
    )
