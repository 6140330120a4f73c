"""Seeded base/novel partitioning of clustered attributes."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from oapr.catalog.cluster import ClusterAssignment
from oapr.catalog.records import AttributeCatalog

DEFAULT_NOVEL_FRACTION = Fraction(1, 4)


@dataclass(frozen=True)
class SplitManifest:
    """Deterministic record of a base/novel partition.

    ``clusters`` holds the raw names per cluster (cluster id order, members in
    catalog order), which is enough to replay the shuffle with the stored seed.
    """

    dataset_name: str
    seed: int
    novel_fraction: Fraction
    clusters: tuple[tuple[str, ...], ...]
    base: tuple[str, ...]
    novel: tuple[str, ...]

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)

    def split_of(self, raw_name: str) -> str:
        if raw_name in self.base:
            return "base"
        if raw_name in self.novel:
            return "novel"
        raise KeyError(raw_name)

    def to_json(self) -> str:
        obj = {
            "dataset_name": self.dataset_name,
            "seed": self.seed,
            "novel_fraction": str(self.novel_fraction),
            "n_clusters": self.n_clusters,
            "clusters": [list(c) for c in self.clusters],
            "base": list(self.base),
            "novel": list(self.novel),
        }
        return json.dumps(obj, sort_keys=True, separators=(",", ": "), indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SplitManifest":
        obj = json.loads(text)
        return cls(
            dataset_name=obj["dataset_name"],
            seed=int(obj["seed"]),
            novel_fraction=Fraction(obj["novel_fraction"]),
            clusters=tuple(tuple(c) for c in obj["clusters"]),
            base=tuple(obj["base"]),
            novel=tuple(obj["novel"]),
        )

    @classmethod
    def load(cls, path: str | Path) -> "SplitManifest":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def novel_count(cluster_size: int, novel_fraction: Fraction) -> int:
    """Per-cluster novel count: ceil(fraction * size), but 0 for singletons."""
    if cluster_size <= 1:
        return 0
    num = novel_fraction.numerator * cluster_size
    den = novel_fraction.denominator
    return -(-num // den)


def partition_clusters(
    assignment: ClusterAssignment,
    catalog: AttributeCatalog,
    seed: int,
    novel_fraction: Fraction = DEFAULT_NOVEL_FRACTION,
) -> SplitManifest:
    """Shuffle each cluster with a seeded generator and carve off the novel slice.

    The same seed always reproduces the same manifest byte for byte. One
    random stream is consumed in cluster-id order, so the manifest depends
    only on (assignment, catalog order, seed, fraction).
    """
    if not (0 < novel_fraction < 1):
        raise ValueError("novel_fraction must lie in (0, 1)")
    if len(assignment.labels) != len(catalog.records):
        raise ValueError("assignment and catalog disagree on record count")

    rng = random.Random(seed)
    clusters: list[tuple[str, ...]] = []
    base: list[str] = []
    novel: list[str] = []
    for cluster_id in range(assignment.n_clusters):
        members = [catalog.records[i].raw_name for i in assignment.members(cluster_id)]
        clusters.append(tuple(members))
        shuffled = list(members)
        rng.shuffle(shuffled)
        take = novel_count(len(members), novel_fraction)
        novel.extend(shuffled[:take])
        base.extend(shuffled[take:])
    return SplitManifest(
        dataset_name=catalog.dataset_name,
        seed=seed,
        novel_fraction=novel_fraction,
        clusters=tuple(clusters),
        base=tuple(sorted(base)),
        novel=tuple(sorted(novel)),
    )
