"""Contracts every dual-encoder backend implements.

Tensor layout everywhere is row-major with the channel axis last. A vision
backend turns an image plus N learnable prompt tokens into (f_cls, f_img,
f_img_body); a text backend maps token ids (or raw token embeddings, for
learnable-context input) to a single feature vector.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass

import torch
from torch import nn


@dataclass
class VisionOutput:
    f_cls: torch.Tensor  # (C,)
    f_img: torch.Tensor  # (L, C)
    f_img_body: torch.Tensor  # (N, C)


class VisionEncoder(nn.Module, abc.ABC):
    out_dim: int
    token_width: int
    resolution: int
    fingerprint: str

    @abc.abstractmethod
    def forward(
        self, images: torch.Tensor, prompt_tokens: torch.Tensor | None
    ) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """(B, H, W, 3) images + (N, width) prompts -> batched (f_cls, f_img, f_img_body)."""


class TextEncoder(nn.Module, abc.ABC):
    out_dim: int
    token_width: int
    context_limit: int
    fingerprint: str

    @abc.abstractmethod
    def tokenize(self, text: str) -> list[int]: ...

    @abc.abstractmethod
    def embed_tokens(self, ids: list[int]) -> torch.Tensor:
        """Token ids -> (T, width) embeddings."""

    @abc.abstractmethod
    def forward_embeddings(self, embeddings: torch.Tensor, pool_from: int = 0) -> torch.Tensor:
        """(T, width) token embeddings -> (C,) feature.

        ``pool_from`` marks where the content tokens start: the readout pools
        token positions pool_from.. only, so prefix (context) tokens shape the
        feature through attention rather than by dilution.
        """

    def encode_text(self, text: str) -> torch.Tensor:
        return self.forward_embeddings(self.embed_tokens(self.tokenize(text)))


def encoder_parameter_checksum(module: nn.Module) -> str:
    """Digest of all parameters and buffers, for frozen-weight assertions."""
    import hashlib

    h = hashlib.sha256()
    for name, tensor in sorted(module.state_dict().items()):
        h.update(name.encode("utf-8"))
        h.update(tensor.detach().cpu().numpy().tobytes())
    return h.hexdigest()
