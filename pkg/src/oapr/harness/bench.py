"""Query-latency benchmark over a built index (reporting only, no target)."""

from __future__ import annotations

import itertools
import random
import time

from oapr.harness.model import OAPRModel
from oapr.retrieval.index import GalleryIndex
from oapr.retrieval.scoring import RetrievalQuery, score_query


def bench_latency(
    index: GalleryIndex,
    model: OAPRModel,
    n_queries: int = 64,
    k: int = 5,
    seed: int = 0,
    r: int = 2,
) -> dict:
    """Time ``n_queries`` attribute-pair queries; returns per-query ms stats."""
    phrases = list(index.catalog_phrases)
    if len(phrases) < r:
        raise ValueError("need at least r catalog phrases to benchmark")
    pairs = list(itertools.combinations(phrases, r))
    rng = random.Random(seed)
    chosen = [pairs[rng.randrange(len(pairs))] for _ in range(n_queries)]
    k = min(k, len(index))

    timings = []
    for attrs in chosen:
        start = time.perf_counter()
        score_query(index, RetrievalQuery(attributes=attrs, k=k), model)
        timings.append((time.perf_counter() - start) * 1000.0)
    timings.sort()
    mean = sum(timings) / len(timings)
    return {
        "n_queries": n_queries,
        "k": k,
        "gallery_size": len(index),
        "mean_ms": mean,
        "p50_ms": timings[len(timings) // 2],
        "p95_ms": timings[min(int(len(timings) * 0.95), len(timings) - 1)],
    }
