"""Model bundle: frozen dual encoder plus the three trainable parts, with a
canonical checkpoint format (loading then saving reproduces identical bytes)."""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np
import torch

from oapr.attr_select import AttributeFeatureSelector
from oapr.catalog.records import AttributeCatalog, AttributeRecord
from oapr.encoders.adapter import load_dual_encoder
from oapr.encoders.base import encoder_parameter_checksum
from oapr.encoders.prompts import AttributeContextPrompt, BodyPromptBank
from oapr.encoders.text_features import encode_attributes, load_templates, prompt_ensemble_text
from oapr.encoders.tiny import TinyEncoderConfig, TinyTextEncoder, TinyVisionEncoder
from oapr.errors import FingerprintMismatch
from oapr.harness.config import TrainConfig

CHECKPOINT_MAGIC = b"OAPRCKPT"
CHECKPOINT_VERSION = 1
# Canonical trainable tensor names, in serialization order.
CHECKPOINT_FIELDS = (
    "body_prompt.tokens",
    "context_prompt.tokens",
    "selector.w_q",
    "selector.w_k",
    "selector.w_v",
    "selector.w_o",
)


def _build_encoders(config: TrainConfig, dtype: torch.dtype):
    if config.encoder == "tiny":
        # "last V blocks" clamps to depth, so the spec default V=6 means both
        # tiny blocks run V-V; that also generalizes measurably better than
        # V=1 on the synthetic benchmark
        enc_config = TinyEncoderConfig(
            vision_vv_blocks=min(config.vv_blocks, TinyEncoderConfig.vision_blocks),
            seed=config.encoder_seed,
        )
        return TinyVisionEncoder(enc_config, dtype=dtype), TinyTextEncoder(enc_config, dtype=dtype)
    return load_dual_encoder(config.encoder_path, dtype=dtype)


class OAPRModel:
    """Frozen encoders + trainable body prompt, context prompt, and selector."""

    def __init__(self, config: TrainConfig, catalog: AttributeCatalog,
                 dtype: torch.dtype = torch.float32):
        self.config = config
        self.catalog = catalog
        self.dtype = dtype
        self.vision, self.text = _build_encoders(config, dtype)
        width = self.vision.token_width
        self.body_prompt = BodyPromptBank(
            config.n_body_prompts, width, seed=config.seed, dtype=dtype
        )
        self.context_prompt = AttributeContextPrompt(
            config.context_len, width, seed=config.seed + 1, dtype=dtype
        )
        self.selector = AttributeFeatureSelector(
            self.vision.out_dim, n_heads=config.selector_heads,
            seed=config.seed + 2, dtype=dtype,
        )
        self._frozen_text_features: tuple[torch.Tensor, torch.Tensor] | None = None

    @property
    def encoder_fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(self.vision.fingerprint.encode())
        h.update(self.text.fingerprint.encode())
        return h.hexdigest()

    @property
    def catalog_names(self) -> tuple[str, ...]:
        return self.catalog.raw_names

    @property
    def catalog_phrases(self) -> tuple[str, ...]:
        return self.catalog.phrases

    def frozen_checksum(self) -> str:
        h = hashlib.sha256()
        h.update(encoder_parameter_checksum(self.vision).encode())
        h.update(encoder_parameter_checksum(self.text).encode())
        return h.hexdigest()

    def trainable_param_groups(self) -> list[dict]:
        return [
            {
                "params": [self.body_prompt.tokens, self.context_prompt.tokens],
                "lr": self.config.lr_prompts,
            },
            {
                "params": list(self.selector.parameters()),
                "lr": self.config.lr_selection,
            },
        ]

    def body_background_text_features(self) -> tuple[torch.Tensor, torch.Tensor]:
        """Frozen prompt-ensemble features for body and background classes."""
        if self._frozen_text_features is None:
            templates = load_templates()
            with torch.no_grad():
                body = prompt_ensemble_text(list(self.config.body_classes), templates, self.text)
                back = prompt_ensemble_text(
                    list(self.config.background_classes), templates, self.text
                )
            self._frozen_text_features = (body, back)
        return self._frozen_text_features

    def encode_attribute_phrases(self, phrases: list[str]) -> torch.Tensor:
        return encode_attributes(self.context_prompt, phrases, self.text)

    # -- checkpoint serialization ------------------------------------------

    def _tensor(self, field: str) -> torch.Tensor:
        owner, attr = field.split(".")
        if owner == "selector":
            return getattr(self.selector, attr)
        return getattr(self, owner).tokens

    def checkpoint_bytes(self, training_log_digest: str = "") -> bytes:
        tensors = []
        blobs = []
        offset = 0
        for field in CHECKPOINT_FIELDS:
            arr = self._tensor(field).detach().cpu().numpy().astype("<f8")
            raw = np.ascontiguousarray(arr).tobytes()
            tensors.append(
                {
                    "name": field,
                    "dtype": "float64",
                    "shape": list(arr.shape),
                    "offset": offset,
                    "nbytes": len(raw),
                }
            )
            blobs.append(raw)
            offset += len(raw)
        header = {
            "version": CHECKPOINT_VERSION,
            "config": self.config.to_dict(),
            "encoder_fingerprint": self.encoder_fingerprint,
            "catalog": {
                "dataset_name": self.catalog.dataset_name,
                "filtered_out": list(self.catalog.filtered_out),
                "records": [
                    {
                        "raw_name": r.raw_name,
                        "phrase": r.phrase,
                        "body_parts": list(r.body_parts),
                    }
                    for r in self.catalog.records
                ],
            },
            "training_log_digest": training_log_digest,
            "tensors": tensors,
        }
        blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
        return b"".join(
            [CHECKPOINT_MAGIC, struct.pack("<Q", len(blob)), blob, *blobs]
        )

    def save_checkpoint(self, path: str | Path, training_log_digest: str = "") -> str:
        data = self.checkpoint_bytes(training_log_digest)
        Path(path).write_bytes(data)
        return hashlib.sha256(data).hexdigest()

    @classmethod
    def load_checkpoint(cls, path: str | Path, dtype: torch.dtype = torch.float32) -> "OAPRModel":
        raw = Path(path).read_bytes()
        if raw[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        offset = len(CHECKPOINT_MAGIC)
        (blob_len,) = struct.unpack_from("<Q", raw, offset)
        offset += 8
        header = json.loads(raw[offset : offset + blob_len].decode("utf-8"))
        offset += blob_len
        if header["version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {header['version']}")
        config = TrainConfig.from_dict(header["config"])
        catalog = AttributeCatalog(
            records=tuple(
                AttributeRecord(
                    raw_name=r["raw_name"],
                    phrase=r["phrase"],
                    body_parts=tuple(r["body_parts"]),
                )
                for r in header["catalog"]["records"]
            ),
            dataset_name=header["catalog"]["dataset_name"],
            filtered_out=tuple(header["catalog"]["filtered_out"]),
        )
        model = cls(config, catalog, dtype=dtype)
        if model.encoder_fingerprint != header["encoder_fingerprint"]:
            raise FingerprintMismatch(
                "checkpoint was written against a different frozen encoder"
            )
        for meta in header["tensors"]:
            start = offset + meta["offset"]
            arr = np.frombuffer(raw, dtype="<f8", offset=start,
                                count=meta["nbytes"] // 8).reshape(meta["shape"])
            with torch.no_grad():
                model._tensor(meta["name"]).copy_(torch.as_tensor(arr.copy(), dtype=dtype))
        model._loaded_log_digest = header["training_log_digest"]
        return model
