"""Deterministic training loop over frozen encoders.

Only the body prompt, the shared context prompt, and the selection
projections receive gradients, in two learning-rate groups under one cosine
schedule. Single-threaded and fully seeded: the same config and gallery give
bit-identical checkpoints.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from oapr.catalog.records import AttributeCatalog
from oapr.catalog.split import SplitManifest
from oapr.errors import DegenerateBatch, NonFiniteLoss
from oapr.harness.config import TrainConfig, cosine_lr_factor
from oapr.harness.model import OAPRModel
from oapr.losses import aba_loss, body_part_targets, t2i_contrastive_loss, total_loss
from oapr.pseudo_body import distill_loss, patch_class_weights, pseudo_features
from oapr.retrieval.gallery import GalleryEntry
from oapr.retrieval.index import load_image_array


@dataclass
class TrainResult:
    model: OAPRModel
    log_records: list[dict]
    log_digest: str


def _log_digest(records: list[dict]) -> str:
    payload = "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def write_log(records: list[dict], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def run_training(
    config: TrainConfig,
    manifest: SplitManifest,
    catalog: AttributeCatalog,
    gallery: list[GalleryEntry],
    preloaded_images: np.ndarray | None = None,
) -> TrainResult:
    """Train the prompts and selector on the manifest's base attributes.

    ``preloaded_images`` may carry the (E, H, W, 3) float array aligned with
    the (sorted) gallery, to skip disk reads in tests.
    """
    missing = [n for n in manifest.base if n not in catalog.raw_names]
    if missing:
        raise ValueError(f"manifest base attributes missing from gallery label space: {missing}")

    torch.set_num_threads(1)
    torch.manual_seed(config.seed)
    model = OAPRModel(config, catalog)

    entries = sorted(gallery, key=lambda e: e.image_id)
    if preloaded_images is None:
        resolution = model.vision.resolution
        preloaded_images = np.stack(
            [load_image_array(e.image_uri, resolution) for e in entries]
        )
    images = torch.as_tensor(preloaded_images, dtype=model.body_prompt.tokens.dtype)

    name_to_col = {n: i for i, n in enumerate(catalog.raw_names)}
    base_records = [r for r in catalog.records if r.raw_name in set(manifest.base)]
    base_cols = [name_to_col[r.raw_name] for r in base_records]
    base_phrases = [r.phrase for r in base_records]
    targets = body_part_targets(
        [r.body_parts for r in base_records], config.n_body_prompts, dtype=images.dtype
    )
    labels = torch.as_tensor(
        [[e.labels[c] for c in base_cols] for e in entries], dtype=images.dtype
    )

    f_text_body, f_text_back = model.body_background_text_features()
    f_text_bb = torch.cat([f_text_body, f_text_back])  # body rows first
    body_rows = tuple(range(config.n_body_prompts))

    optimizer = torch.optim.Adam(model.trainable_param_groups())
    n_images = len(entries)
    steps_per_epoch = max((n_images + config.batch_size - 1) // config.batch_size, 1)
    total_steps = config.epochs * steps_per_epoch
    scheduler = torch.optim.lr_scheduler.LambdaLR(
        optimizer,
        lr_lambda=lambda step: cosine_lr_factor(step, total_steps, config.lr_floor),
    )

    rng = np.random.default_rng(config.seed)
    records: list[dict] = []
    step = 0
    for epoch in range(config.epochs):
        order = rng.permutation(n_images)
        epoch_sums = {"l_t2i": 0.0, "l_distill": 0.0, "l_aba": 0.0, "l_total": 0.0}
        n_batches = 0
        for start in range(0, n_images, config.batch_size):
            batch = order[start : start + config.batch_size]
            batch_images = images[batch]
            batch_labels = labels[batch]

            f_cls, f_img, f_body = model.vision(batch_images, model.body_prompt.tokens)
            weights = patch_class_weights(f_img, f_text_bb)
            f_hat = pseudo_features(weights, f_img, body_rows)
            l_distill = distill_loss(f_body, f_hat)

            f_text_att = model.encode_attribute_phrases(base_phrases)
            f_att_img, p = model.selector(f_text_att, f_body)
            l_aba = aba_loss(p, targets)
            try:
                l_t2i = t2i_contrastive_loss(f_att_img, f_text_att, batch_labels, config.weights)
            except DegenerateBatch as exc:
                ids = [entries[i].image_id for i in batch]
                raise DegenerateBatch(f"step {step}: batch {ids} has no positives") from exc
            try:
                loss = total_loss(l_t2i, l_distill, l_aba, config.weights)
            except NonFiniteLoss as exc:
                raise NonFiniteLoss(f"step {step}: {exc}") from exc

            lr_prompts = optimizer.param_groups[0]["lr"]
            lr_selection = optimizer.param_groups[1]["lr"]
            optimizer.zero_grad(set_to_none=True)
            loss.backward()
            optimizer.step()
            scheduler.step()

            record = {
                "kind": "step",
                "step": step,
                "epoch": epoch,
                "l_t2i": float(l_t2i.detach()),
                "l_distill": float(l_distill.detach()),
                "l_aba": float(l_aba.detach()),
                "l_total": float(loss.detach()),
                "lr_prompts": lr_prompts,
                "lr_selection": lr_selection,
            }
            records.append(record)
            for key in epoch_sums:
                epoch_sums[key] += record[key]
            n_batches += 1
            step += 1
        records.append(
            {
                "kind": "epoch",
                "epoch": epoch,
                **{key: value / n_batches for key, value in epoch_sums.items()},
            }
        )
    return TrainResult(model=model, log_records=records, log_digest=_log_digest(records))
