"""Evaluation query generation and the balanced-gallery protocol."""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass

from oapr.catalog.records import AttributeCatalog
from oapr.catalog.split import SplitManifest
from oapr.retrieval.gallery import GalleryEntry

SPLIT_CHOICES = ("base", "novel", "mixed")


@dataclass(frozen=True)
class EvalQuery:
    raw_names: tuple[str, ...]
    phrases: tuple[str, ...]
    split: str


def make_query_set(
    manifest: SplitManifest,
    gallery: list[GalleryEntry],
    catalog: AttributeCatalog,
    split: str,
    r: int = 2,
) -> list[EvalQuery]:
    """All size-r attribute combinations from one split, attainability-filtered.

    Only combinations with at least one gallery entry positive for every
    attribute are kept, so instance precision has an attainable optimum.
    "mixed" yields combinations spanning both splits (reported separately,
    never part of the two headline numbers). Order is lexicographic.
    """
    if r < 1:
        raise ValueError("r must be at least 1")
    if split not in SPLIT_CHOICES:
        raise ValueError(f"split must be one of {SPLIT_CHOICES}")
    name_to_col = {name: i for i, name in enumerate(catalog.raw_names)}
    name_to_phrase = {rec.raw_name: rec.phrase for rec in catalog.records}

    if split == "mixed":
        pool = sorted(set(manifest.base) | set(manifest.novel))
    else:
        pool = sorted(manifest.base if split == "base" else manifest.novel)
    for name in pool:
        if name not in name_to_col:
            raise ValueError(f"manifest attribute {name!r} missing from catalog")

    queries: list[EvalQuery] = []
    base_set = set(manifest.base)
    for combo in itertools.combinations(pool, r):
        in_base = [name in base_set for name in combo]
        if split == "base" and not all(in_base):
            continue
        if split == "novel" and any(in_base):
            continue
        if split == "mixed" and (all(in_base) or not any(in_base)):
            continue
        cols = [name_to_col[name] for name in combo]
        if not any(all(e.labels[c] == 1 for c in cols) for e in gallery):
            continue
        queries.append(EvalQuery(
            raw_names=combo,
            phrases=tuple(name_to_phrase[name] for name in combo),
            split=split,
        ))
    return queries


def balanced_subsample(
    gallery: list[GalleryEntry],
    columns: tuple[int, ...],
    seed: int,
    tag: str = "",
) -> list[int]:
    """Equalize the 2^r label cells of a query by seeded subsampling.

    Returns gallery positions (sorted) with exactly min-cell-count entries
    drawn from each cell; an empty list when some cell has no entries. With
    equal cells a random ranker scores 0.5 per-label precision and 2^-r
    top-1 instance precision, which is what the balanced protocol is for.
    """
    cells: dict[tuple[int, ...], list[int]] = {}
    for pos, entry in enumerate(gallery):
        key = tuple(entry.labels[c] for c in columns)
        cells.setdefault(key, []).append(pos)
    n_cells = 2 ** len(columns)
    if len(cells) < n_cells:
        return []
    m = min(len(v) for v in cells.values())
    rng = random.Random(f"{seed}:{tag}")
    chosen: list[int] = []
    for key in sorted(cells):
        chosen.extend(rng.sample(cells[key], m))
    return sorted(chosen)
