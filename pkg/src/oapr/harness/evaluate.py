"""End-to-end retrieval evaluation producing the metrics report."""

from __future__ import annotations

import json
from pathlib import Path

from oapr.catalog.records import AttributeCatalog
from oapr.catalog.split import SplitManifest
from oapr.errors import FingerprintMismatch
from oapr.harness.model import OAPRModel
from oapr.retrieval.gallery import GalleryEntry
from oapr.retrieval.index import GalleryIndex, build_index
from oapr.retrieval.metrics import p_at_k_instance, p_at_k_label
from oapr.retrieval.queries import balanced_subsample, make_query_set
from oapr.retrieval.scoring import RetrievalQuery, score_query

REPORT_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": [
        "schema", "config", "manifest_seed", "mode", "k_values",
        "encoder_fingerprint", "splits",
    ],
    "properties": {
        "schema": {"const": "oapr.report.v1"},
        "config": {"type": "object"},
        "manifest_seed": {"type": "integer"},
        "mode": {"enum": ["full", "balanced"]},
        "eval_seed": {"type": ["integer", "null"]},
        "k_values": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "encoder_fingerprint": {"type": "string"},
        "splits": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["n_queries", "p_at_k_label", "p_at_k_instance"],
                "properties": {
                    "n_queries": {"type": "integer", "minimum": 0},
                    "skipped_queries": {"type": "integer", "minimum": 0},
                    "p_at_k_label": {
                        "type": "object",
                        "additionalProperties": {"type": "number", "minimum": 0, "maximum": 1},
                    },
                    "p_at_k_instance": {
                        "type": "object",
                        "additionalProperties": {"type": "number", "minimum": 0, "maximum": 1},
                    },
                },
            },
        },
    },
}


def evaluate(
    model: OAPRModel,
    manifest: SplitManifest,
    gallery: list[GalleryEntry],
    k_values: tuple[int, ...] = (1, 5),
    mode: str = "full",
    seed: int | None = None,
    combine: str = "mean",
    index: GalleryIndex | None = None,
    splits: tuple[str, ...] = ("base", "novel", "mixed"),
) -> dict:
    """Score every split's query set and compute both precision metrics.

    Balanced mode subsamples the gallery per query to equal label cells
    (seeded; queries whose subsample cannot fill max(k) are skipped and
    counted). Returns the report dict; validate against REPORT_SCHEMA.
    """
    if mode not in ("full", "balanced"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "balanced" and seed is None:
        raise ValueError("balanced mode requires a seed")
    if index is None:
        index = build_index(gallery, model)
    elif index.encoder_fingerprint != model.encoder_fingerprint:
        raise FingerprintMismatch("index was built with a different frozen encoder")

    max_k = max(k_values)
    catalog = model.catalog
    name_to_col = {n: i for i, n in enumerate(catalog.raw_names)}
    entries = list(index.entries)

    report_splits: dict[str, dict] = {}
    for split in splits:
        queries = make_query_set(manifest, entries, catalog, split)
        rankings: list[list[str]] = []
        kept: list[tuple[str, ...]] = []
        skipped = 0
        for query in queries:
            columns = tuple(name_to_col[n] for n in query.raw_names)
            subset = None
            if mode == "balanced":
                subset = balanced_subsample(entries, columns, seed, tag=",".join(query.raw_names))
                if len(subset) < max_k:
                    skipped += 1
                    continue
            if len(entries) < max_k:
                skipped += 1
                continue
            ranked = score_query(
                index,
                RetrievalQuery(attributes=query.phrases, k=max_k),
                model,
                mode=combine,
                entry_subset=subset,
            )
            rankings.append([s.image_id for s in ranked])
            kept.append(query.raw_names)

        labels = {
            e.image_id: {n: e.labels[c] for n, c in name_to_col.items()} for e in entries
        }
        report_splits[split] = {
            "n_queries": len(kept),
            "skipped_queries": skipped,
            "p_at_k_label": {
                str(k): p_at_k_label([r[:k] for r in rankings], labels, kept, k)
                for k in k_values
            },
            "p_at_k_instance": {
                str(k): p_at_k_instance([r[:k] for r in rankings], labels, kept, k)
                for k in k_values
            },
        }

    return {
        "schema": "oapr.report.v1",
        "config": model.config.to_dict(),
        "manifest_seed": manifest.seed,
        "mode": mode,
        "eval_seed": seed,
        "k_values": list(k_values),
        "encoder_fingerprint": model.encoder_fingerprint,
        "splits": report_splits,
    }


def write_report(report: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8")
