"""Normalized gallery ingestion.

One JSON object per line: {"image_id": str, "image_uri": str,
"labels": {raw_name: 0|1, ...}}. Converters from native dataset annotation
formats are documented recipes, not code in this package.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from oapr.catalog.records import AttributeCatalog


@dataclass(frozen=True)
class GalleryEntry:
    image_id: str
    labels: tuple[int, ...]  # aligned with catalog record order
    image_uri: str

    def label_for(self, index: int) -> int:
        return self.labels[index]


def load_gallery(path: str | Path, catalog: AttributeCatalog) -> list[GalleryEntry]:
    """Read gallery JSONL; label vectors follow catalog record order.

    Every retained catalog attribute must be labeled on every entry; labels
    for attributes outside the catalog (e.g. filtered-out ones) are ignored.
    """
    entries: list[GalleryEntry] = []
    seen: set[str] = set()
    names = catalog.raw_names
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        obj = json.loads(line)
        image_id = obj["image_id"]
        if image_id in seen:
            raise ValueError(f"gallery line {lineno}: duplicate image_id {image_id!r}")
        seen.add(image_id)
        raw_labels = obj["labels"]
        vector = []
        for name in names:
            if name not in raw_labels:
                raise ValueError(f"gallery line {lineno}: missing label for {name!r}")
            value = int(raw_labels[name])
            if value not in (0, 1):
                raise ValueError(f"gallery line {lineno}: label {name!r} must be 0 or 1")
            vector.append(value)
        entries.append(GalleryEntry(image_id=image_id, labels=tuple(vector),
                                    image_uri=obj["image_uri"]))
    entries.sort(key=lambda e: e.image_id)
    return entries


def write_gallery(path: str | Path, entries: list[GalleryEntry], catalog: AttributeCatalog) -> None:
    names = catalog.raw_names
    with open(path, "w", encoding="utf-8") as fh:
        for entry in entries:
            obj = {
                "image_id": entry.image_id,
                "image_uri": entry.image_uri,
                "labels": {name: entry.labels[i] for i, name in enumerate(names)},
            }
            fh.write(json.dumps(obj, sort_keys=True) + "\n")
