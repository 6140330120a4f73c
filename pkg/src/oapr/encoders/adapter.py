"""Adapter slot for plugging external pre-trained dual-encoder weights.

The exchange format is a single ``.npz`` archive:

* key ``config``: JSON-encoded TinyEncoderConfig fields (width, out_dim,
  resolution, patch_size, block counts, heads, context_limit, vocab_size, ...)
* keys ``vision/<name>`` and ``text/<name>``: float64 weight arrays using the
  names produced by the reference encoders (``patch_proj``, ``positional``,
  ``block0/w_q``, ``token_embedding``, ...), row-major, channel axis last.

Anyone exporting a pre-trained dual encoder into this layout gets the full
pipeline (V-V surgery, prompt masking, prompt training) on their weights. A
byte-pair tokenizer can be passed per encoder to replace the word-hash one.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np
import torch

from oapr.encoders.tiny import TinyEncoderConfig, TinyTextEncoder, TinyVisionEncoder


def save_dual_encoder(
    path: str | Path,
    config: TinyEncoderConfig,
    vision_arrays: dict[str, np.ndarray],
    text_arrays: dict[str, np.ndarray],
) -> None:
    payload: dict[str, np.ndarray] = {
        "config": np.frombuffer(json.dumps(asdict(config), sort_keys=True).encode(), dtype=np.uint8)
    }
    for name, arr in vision_arrays.items():
        payload[f"vision/{name}"] = np.asarray(arr, dtype=np.float64)
    for name, arr in text_arrays.items():
        payload[f"text/{name}"] = np.asarray(arr, dtype=np.float64)
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_dual_encoder(
    path: str | Path,
    dtype: torch.dtype = torch.float32,
    text_tokenizer=None,
) -> tuple[TinyVisionEncoder, TinyTextEncoder]:
    with np.load(path) as data:
        config = TinyEncoderConfig(**json.loads(bytes(data["config"]).decode()))
        vision = {k.split("/", 1)[1]: data[k] for k in data.files if k.startswith("vision/")}
        text = {k.split("/", 1)[1]: data[k] for k in data.files if k.startswith("text/")}
    vision_enc = TinyVisionEncoder(config, dtype=dtype, arrays=vision)
    text_enc = TinyTextEncoder(config, dtype=dtype, arrays=text, tokenizer=text_tokenizer)
    return vision_enc, text_enc


def export_reference_encoder(path: str | Path, config: TinyEncoderConfig) -> None:
    """Write the reference weights in the exchange format (round-trip helper)."""
    save_dual_encoder(
        path,
        config,
        TinyVisionEncoder._generate_arrays(config),
        TinyTextEncoder._generate_arrays(config),
    )
