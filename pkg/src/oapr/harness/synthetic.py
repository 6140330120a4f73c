"""Procedural color-block person dataset.

Each image is a tiny "person" with a hat, an upper-body and a lower-body
block, each painted one of four colors; the twelve region-color attributes
are therefore visually grounded, so attribute-to-person retrieval and
novel-attribute generalization can be exercised without real data.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np

from oapr.catalog.records import AttributeCatalog, filter_and_verbalize, parse_rules
from oapr.encoders.tiny import COLOR_LEXICON
from oapr.retrieval.gallery import GalleryEntry, write_gallery

# the four colors form a parallelogram in RGB space, so each one is a mild
# affine combination of the other three — whichever the split leaves out
SYNTH_COLORS = ("black", "red", "yellow", "green")
SYNTH_REGIONS = ("hat", "upper", "lower")
SYNTH_RAW_NAMES = tuple(f"{region}_{color}" for region in SYNTH_REGIONS for color in SYNTH_COLORS)

_SKIN = (0.90, 0.75, 0.60)
_BACKGROUND = (0.85, 0.85, 0.88)
_NOISE_STD = 0.03


def synthetic_rules():
    text = resources.files("oapr.catalog").joinpath("data/synthetic.tsv").read_text("utf-8")
    return parse_rules(text)


def synthetic_catalog() -> AttributeCatalog:
    rules = synthetic_rules()
    return filter_and_verbalize(list(rules), rules, dataset_name="synthetic")


def render_person(colors: dict[str, str], rng: np.random.Generator,
                  resolution: int = 32) -> np.ndarray:
    """Render one (R, R, 3) float image in [0, 1] with mild seeded jitter."""
    img = np.empty((resolution, resolution, 3), dtype=np.float64)
    img[:] = _BACKGROUND
    s = resolution / 32.0

    def rows(a: float, b: float) -> tuple[int, int]:
        jitter = int(rng.integers(-1, 2))
        return max(int(a * s) + jitter, 0), min(int(b * s) + jitter, resolution)

    def cols(a: float, b: float) -> tuple[int, int]:
        jitter = int(rng.integers(-1, 2))
        return max(int(a * s) + jitter, 0), min(int(b * s) + jitter, resolution)

    hat_r, hat_c = rows(0, 6), cols(10, 22)
    face_r, face_c = rows(6, 10), cols(12, 20)
    upper_r, upper_c = rows(10, 21), cols(8, 24)
    lower_r, lower_c = rows(21, 32), cols(9, 23)

    img[face_r[0] : face_r[1], face_c[0] : face_c[1]] = _SKIN
    for (r0, r1), (c0, c1), region in (
        (hat_r, hat_c, "hat"),
        (upper_r, upper_c, "upper"),
        (lower_r, lower_c, "lower"),
    ):
        img[r0:r1, c0:c1] = COLOR_LEXICON[colors[region]]
    img += rng.normal(0.0, _NOISE_STD, size=img.shape)
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def sample_world(n_images: int, seed: int, prefix: str = "img") -> list[tuple[str, dict[str, str]]]:
    """Deterministic (image_id, region->color) assignments, uniform per region."""
    rng = np.random.default_rng(seed)
    world = []
    for i in range(n_images):
        colors = {region: SYNTH_COLORS[int(rng.integers(len(SYNTH_COLORS)))]
                  for region in SYNTH_REGIONS}
        world.append((f"{prefix}{i:05d}", colors))
    return world


def labels_for(colors: dict[str, str]) -> dict[str, int]:
    return {
        name: int(colors[name.split("_")[0]] == name.split("_")[1])
        for name in SYNTH_RAW_NAMES
    }


def generate_dataset(
    out_dir: str | Path,
    n_train: int = 512,
    n_test: int = 128,
    seed: int = 11,
    resolution: int = 32,
) -> dict[str, Path]:
    """Write train/test images plus gallery JSONL files; returns the paths."""
    from PIL import Image

    out_dir = Path(out_dir)
    catalog = synthetic_catalog()
    paths = {}
    for split, count, sub_seed in (("train", n_train, seed), ("test", n_test, seed + 1)):
        img_dir = out_dir / "images" / split
        img_dir.mkdir(parents=True, exist_ok=True)
        entries = []
        for idx, (image_id, colors) in enumerate(sample_world(count, sub_seed, prefix=f"{split}_")):
            rng = np.random.default_rng((seed, 0 if split == "train" else 1, idx))
            array = render_person(colors, rng, resolution=resolution)
            path = img_dir / f"{image_id}.png"
            Image.fromarray((array * 255.0).round().astype(np.uint8)).save(path)
            label_map = labels_for(colors)
            entries.append(
                GalleryEntry(
                    image_id=image_id,
                    labels=tuple(label_map[name] for name in catalog.raw_names),
                    image_uri=str(path.resolve()),
                )
            )
        jsonl = out_dir / f"{split}.jsonl"
        write_gallery(jsonl, entries, catalog)
        paths[split] = jsonl
    meta = {"n_train": n_train, "n_test": n_test, "seed": seed, "resolution": resolution}
    (out_dir / "dataset.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    return paths
