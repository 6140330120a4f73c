"""Frozen dual-encoder backends, V-V attention, prompts, and text features."""

from __future__ import annotations

import torch

from oapr.encoders.adapter import export_reference_encoder, load_dual_encoder, save_dual_encoder
from oapr.encoders.attention import BlockWeights, attention_sublayer, masked_softmax, vv_attention_block
from oapr.encoders.base import TextEncoder, VisionEncoder, VisionOutput, encoder_parameter_checksum
from oapr.encoders.prompts import AttributeContextPrompt, BodyPromptBank
from oapr.encoders.text_features import (
    BACKGROUND_CLASSES,
    BODY_CLASSES,
    encode_attributes,
    load_templates,
    prompt_ensemble_text,
)
from oapr.encoders.tiny import (
    COLOR_LEXICON,
    TinyEncoderConfig,
    TinyTextEncoder,
    TinyVisionEncoder,
    build_prompt_mask,
    hash_tokenize,
)


def encode_image(image: torch.Tensor, prompts: BodyPromptBank | None,
                 encoder: VisionEncoder) -> VisionOutput:
    """Encode a single (H, W, 3) image with the body prompts appended."""
    tokens = prompts.tokens if prompts is not None else None
    f_cls, f_img, f_body = encoder(image.unsqueeze(0) if image.dim() == 3 else image, tokens)
    return VisionOutput(f_cls=f_cls[0], f_img=f_img[0], f_img_body=f_body[0])


__all__ = [
    "AttributeContextPrompt",
    "BACKGROUND_CLASSES",
    "BODY_CLASSES",
    "BlockWeights",
    "BodyPromptBank",
    "COLOR_LEXICON",
    "TextEncoder",
    "TinyEncoderConfig",
    "TinyTextEncoder",
    "TinyVisionEncoder",
    "VisionEncoder",
    "VisionOutput",
    "attention_sublayer",
    "build_prompt_mask",
    "encode_attributes",
    "encode_image",
    "encoder_parameter_checksum",
    "export_reference_encoder",
    "hash_tokenize",
    "load_dual_encoder",
    "load_templates",
    "masked_softmax",
    "prompt_ensemble_text",
    "save_dual_encoder",
    "vv_attention_block",
]
