"""Pseudo body-part features from patch tokens and body/background text features.

The text features, with their across-class common component removed, score
every patch per class; the per-class patch distribution then aggregates patch
tokens into a teacher feature that supervises the learnable body prompt
outputs through an L2 distillation loss.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch


def common_feature(f_text_bb: torch.Tensor) -> torch.Tensor:
    """Arithmetic mean over the body+background class rows."""
    if f_text_bb.shape[-2] < 2:
        raise ValueError("need at least two class rows to form a common feature")
    return f_text_bb.mean(dim=-2)


def patch_class_weights(
    f_img: torch.Tensor, f_text_bb: torch.Tensor, normalize: bool = True
) -> torch.Tensor:
    """Per-class per-patch weights, shape (..., N+M, L).

    Raw score S[k][l] = sum_c (f_text_bb[k][c] - common[c]) * f_img[l][c].
    Rows are softmax-normalized over patches by default so each row reads as
    an activation map; raw mode is kept for ablation.
    """
    if f_img.shape[-1] != f_text_bb.shape[-1]:
        raise ValueError("feature dims of f_img and f_text_bb disagree")
    centered = f_text_bb - common_feature(f_text_bb).unsqueeze(-2)
    scores = centered @ f_img.transpose(-1, -2)
    if not normalize:
        return scores
    return torch.softmax(scores, dim=-1)


def pseudo_features(
    weights: torch.Tensor, f_img: torch.Tensor, body_rows: tuple[int, ...]
) -> torch.Tensor:
    """Aggregate patch tokens with the class weights, keeping body rows only."""
    n_classes = weights.shape[-2]
    for row in body_rows:
        if not (0 <= row < n_classes):
            raise IndexError(f"body row {row} outside [0, {n_classes})")
    aggregated = weights @ f_img
    index = torch.as_tensor(body_rows, dtype=torch.long, device=aggregated.device)
    return aggregated.index_select(-2, index)


def distill_loss(f_img_body: torch.Tensor, f_hat_body: torch.Tensor) -> torch.Tensor:
    """Mean squared difference; the pseudo feature is a detached teacher."""
    if f_img_body.shape != f_hat_body.shape:
        raise ValueError("shapes of student and teacher features disagree")
    return ((f_img_body - f_hat_body.detach()) ** 2).mean()


def dump_activation_maps(
    weights: torch.Tensor,
    grid_hw: tuple[int, int],
    class_names: list[str],
    out_dir: str | Path,
    image_id: str,
) -> list[Path]:
    """Write one grayscale map per class plus a JSON sidecar with raw rows."""
    from PIL import Image

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    w = weights.detach().cpu().numpy()
    if w.shape[0] != len(class_names):
        raise ValueError("one class name per weight row required")
    h, gw = grid_hw
    if w.shape[1] != h * gw:
        raise ValueError(f"row length {w.shape[1]} does not fill a {h}x{gw} grid")
    written: list[Path] = []
    sidecar = {"image_id": image_id, "grid": [h, gw], "rows": {}}
    for name, row in zip(class_names, w):
        grid = row.reshape(h, gw)
        peak = grid.max()
        scaled = (grid / peak * 255.0).round().astype(np.uint8) if peak > 0 else grid.astype(np.uint8)
        safe = name.replace(" ", "_")
        path = out_dir / f"{image_id}_{safe}.png"
        Image.fromarray(scaled, mode="L").save(path)
        written.append(path)
        sidecar["rows"][name] = [float(v) for v in row]
    sidecar_path = out_dir / f"{image_id}_maps.json"
    sidecar_path.write_text(json.dumps(sidecar, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    written.append(sidecar_path)
    return written
