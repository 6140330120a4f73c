"""Tiny deterministic reference dual encoder.

A desk-scale stand-in for a pre-trained dual encoder: every weight is
generated from a fixed seed and both towers stay frozen. What large-scale
pre-training gives a real backbone — a joint embedding space where text and
pixels already agree on basic concepts — is emulated here by construction:

* a small lexicon grounds common color words (text side) and patch mean
  colors (vision side) into the first GROUND_DIM channels;
* block weights protect those channels (values, outputs and MLPs neither
  read from nor write into them), so grounded content rides the residual
  stream unmixed while attention may still route on it;
* both towers share one output projection for the grounded channels, which
  is exactly the "pre-aligned joint space" a pre-trained dual encoder has.

Everything else is plain random transformer machinery, so prompts and the
selection module still have to learn how to extract, route, and align the
signal; never-trained phrases then generalize through the shared subspace.
"""

from __future__ import annotations

import hashlib
import json
import re
import zlib
from dataclasses import asdict, dataclass

import numpy as np
import torch
from torch import nn

from oapr.encoders.attention import BlockWeights, attention_sublayer
from oapr.encoders.base import TextEncoder, VisionEncoder
from oapr.errors import ContextOverflow, NonFiniteOutput, ShapeMismatch

# Toy pre-trained vocabulary grounding: color word -> RGB in [0, 1].
COLOR_LEXICON: dict[str, tuple[float, float, float]] = {
    "black": (0.0, 0.0, 0.0),
    "white": (1.0, 1.0, 1.0),
    "red": (1.0, 0.0, 0.0),
    "green": (0.0, 1.0, 0.0),
    "blue": (0.0, 0.0, 1.0),
    "yellow": (1.0, 1.0, 0.0),
    "cyan": (0.0, 1.0, 1.0),
    "magenta": (1.0, 0.0, 1.0),
    "gray": (1 / 3, 1 / 3, 1 / 3),
    "grey": (1 / 3, 1 / 3, 1 / 3),
    "orange": (1.0, 0.55, 0.0),
    "purple": (0.5, 0.0, 0.5),
    "brown": (0.55, 0.27, 0.07),
    "pink": (1.0, 0.6, 0.7),
    "teal": (0.0, 0.5, 0.5),
    "navy": (0.0, 0.0, 0.45),
    "maroon": (0.5, 0.0, 0.0),
    "olive": (0.5, 0.5, 0.0),
}


@dataclass(frozen=True)
class TinyEncoderConfig:
    width: int = 32
    out_dim: int = 32
    resolution: int = 32
    patch_size: int = 8
    vision_blocks: int = 2
    vision_vv_blocks: int = 1
    heads: int = 4
    mlp_ratio: int = 2
    text_blocks: int = 2
    context_limit: int = 77
    vocab_size: int = 512
    seed: int = 7
    color_ground_scale: float = 1.5

    @property
    def n_patches(self) -> int:
        side = self.resolution // self.patch_size
        return side * side

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


GROUND_DIM = 3  # grounded concept channels (RGB)


def _gauss(rng: np.random.Generator, shape: tuple[int, ...], std: float) -> np.ndarray:
    return rng.normal(0.0, std, size=shape)


def _protect_value_path(mat: np.ndarray, g: int = GROUND_DIM) -> np.ndarray:
    """Make a square mixing matrix act as identity on the grounded channels."""
    mat[:g, :] = 0.0
    mat[:, :g] = 0.0
    mat[:g, :g] = np.eye(g)
    return mat


def hash_tokenize(text: str, vocab_size: int) -> list[int]:
    """Stable word-hash tokenizer; a BPE tokenizer can be slotted in instead."""
    words = re.findall(r"[a-z0-9]+", text.lower())
    return [zlib.crc32(w.encode("utf-8")) % vocab_size for w in words]


class _Block(nn.Module):
    """Pre-LN transformer block; attention may run in Q-K or V-V mode."""

    def __init__(self, arrays: dict[str, np.ndarray], heads: int, dtype: torch.dtype):
        super().__init__()
        self.heads = heads

        def frozen(name: str) -> nn.Parameter:
            return nn.Parameter(torch.as_tensor(arrays[name], dtype=dtype), requires_grad=False)

        for name in ("w_q", "w_k", "w_v", "w_o", "mlp_w1", "mlp_b1", "mlp_w2", "mlp_b2",
                     "ln1_g", "ln1_b", "ln2_g", "ln2_b"):
            setattr(self, name, frozen(name))

    def _ln(self, x: torch.Tensor, gain: torch.Tensor, bias: torch.Tensor) -> torch.Tensor:
        mean = x.mean(dim=-1, keepdim=True)
        var = x.var(dim=-1, keepdim=True, unbiased=False)
        return (x - mean) / torch.sqrt(var + 1e-5) * gain + bias

    def forward(self, x: torch.Tensor, mask: torch.Tensor, vv: bool) -> torch.Tensor:
        weights = BlockWeights(self.w_q, self.w_k, self.w_v, self.w_o, n_heads=self.heads)
        x = x + attention_sublayer(self._ln(x, self.ln1_g, self.ln1_b), weights, mask, vv=vv)
        h = self._ln(x, self.ln2_g, self.ln2_b)
        h = torch.nn.functional.gelu(h @ self.mlp_w1 + self.mlp_b1) @ self.mlp_w2 + self.mlp_b2
        return x + h


def _block_arrays(rng: np.random.Generator, width: int, mlp_ratio: int) -> dict[str, np.ndarray]:
    std = width**-0.5
    hidden = width * mlp_ratio
    mlp_w1 = _gauss(rng, (width, hidden), std)
    mlp_w2 = _gauss(rng, (hidden, width), (2 * hidden) ** -0.5)
    # grounded channels bypass the MLP entirely
    mlp_w1[:GROUND_DIM, :] = 0.0
    mlp_w2[:, :GROUND_DIM] = 0.0
    return {
        "w_q": _gauss(rng, (width, width), std),
        "w_k": _gauss(rng, (width, width), std),
        "w_v": _protect_value_path(_gauss(rng, (width, width), std)),
        "w_o": _protect_value_path(_gauss(rng, (width, width), std)),
        "mlp_w1": mlp_w1,
        "mlp_b1": np.zeros(hidden),
        "mlp_w2": mlp_w2,
        "mlp_b2": np.zeros(width),
        "ln1_g": np.ones(width),
        "ln1_b": np.zeros(width),
        "ln2_g": np.ones(width),
        "ln2_b": np.zeros(width),
    }


def _fingerprint(kind: str, config: TinyEncoderConfig, arrays: dict[str, np.ndarray]) -> str:
    h = hashlib.sha256()
    h.update(kind.encode())
    h.update(config.to_json().encode())
    for name in sorted(arrays):
        h.update(name.encode())
        h.update(np.ascontiguousarray(arrays[name], dtype=np.float64).tobytes())
    return h.hexdigest()


def _shared_output_proj(config: TinyEncoderConfig, rng: np.random.Generator) -> np.ndarray:
    """Output projection whose grounded rows are identical across towers.

    The shared rows are THE pre-aligned joint subspace: whatever a tower
    carries in its grounded channels lands on the same output directions.
    """
    proj = _gauss(rng, (config.width, config.out_dim), config.width**-0.5)
    shared = np.random.default_rng([config.seed, 2])
    proj[:GROUND_DIM, :] = _gauss(shared, (GROUND_DIM, config.out_dim), config.width**-0.5)
    return proj


def build_prompt_mask(n_pretrained: int, n_prompts: int, device=None) -> torch.Tensor:
    """Attention mask keeping prompts out of the pre-trained token stream.

    Rows/cols 0..n_pretrained-1 are cls+patch tokens, the rest are prompt
    tokens. Pre-trained tokens may never attend to prompts; prompts see all.
    """
    t = n_pretrained + n_prompts
    mask = torch.ones((t, t), dtype=torch.bool, device=device)
    mask[:n_pretrained, n_pretrained:] = False
    return mask


class TinyVisionEncoder(VisionEncoder):
    def __init__(
        self,
        config: TinyEncoderConfig = TinyEncoderConfig(),
        dtype: torch.dtype = torch.float32,
        arrays: dict[str, np.ndarray] | None = None,
    ):
        super().__init__()
        self.config = config
        self.dtype_ = dtype
        self.out_dim = config.out_dim
        self.token_width = config.width
        self.resolution = config.resolution

        if arrays is None:
            arrays = self._generate_arrays(config)
        self._arrays = arrays
        self.fingerprint = _fingerprint("vision", config, arrays)

        def frozen(name: str) -> nn.Parameter:
            return nn.Parameter(torch.as_tensor(arrays[name], dtype=dtype), requires_grad=False)

        self.patch_proj = frozen("patch_proj")
        self.class_embedding = frozen("class_embedding")
        self.positional = frozen("positional")
        self.proj = frozen("proj")
        self.ln_post_g = frozen("ln_post_g")
        self.ln_post_b = frozen("ln_post_b")
        self.blocks = nn.ModuleList(
            _Block({k.split("/", 1)[1]: v for k, v in arrays.items() if k.startswith(f"block{i}/")},
                   config.heads, dtype)
            for i in range(config.vision_blocks)
        )

    @staticmethod
    def _generate_arrays(config: TinyEncoderConfig) -> dict[str, np.ndarray]:
        rng = np.random.default_rng([config.seed, 0])
        width = config.width
        patch_dim = config.patch_size * config.patch_size * 3
        scale = width**-0.5
        patch_proj = _gauss(rng, (patch_dim, width), patch_dim**-0.5)
        patch_proj[:, :GROUND_DIM] = 0.0  # grounded channels carry mean color only
        class_embedding = _gauss(rng, (width,), scale)
        class_embedding[:GROUND_DIM] = 0.0
        positional = _gauss(rng, (config.n_patches + 1, width), scale)
        positional[:, :GROUND_DIM] = 0.0
        arrays: dict[str, np.ndarray] = {
            "patch_proj": patch_proj,
            "class_embedding": class_embedding,
            "positional": positional,
            "proj": _shared_output_proj(config, rng),
            "ln_post_g": np.ones(width),
            "ln_post_b": np.zeros(width),
        }
        for i in range(config.vision_blocks):
            for k, v in _block_arrays(rng, width, config.mlp_ratio).items():
                arrays[f"block{i}/{k}"] = v
        return arrays

    def _ln(self, x: torch.Tensor) -> torch.Tensor:
        mean = x.mean(dim=-1, keepdim=True)
        var = x.var(dim=-1, keepdim=True, unbiased=False)
        return (x - mean) / torch.sqrt(var + 1e-5) * self.ln_post_g + self.ln_post_b

    def _patchify(self, images: torch.Tensor) -> torch.Tensor:
        b = images.shape[0]
        p = self.config.patch_size
        side = self.config.resolution // p
        # (B, side, p, side, p, 3) -> (B, L, p*p*3), row-major over the grid
        x = images.reshape(b, side, p, side, p, 3).permute(0, 1, 3, 2, 4, 5)
        return x.reshape(b, side * side, p * p * 3)

    def forward(self, images: torch.Tensor, prompt_tokens: torch.Tensor | None):
        if images.dim() == 3:
            images = images.unsqueeze(0)
        r = self.config.resolution
        if images.shape[1:] != (r, r, 3):
            raise ShapeMismatch(
                f"expected ({r}, {r}, 3) images, got {tuple(images.shape[1:])}"
            )
        images = images.to(self.patch_proj.dtype)
        patches = self._patchify(images)
        x = patches @ self.patch_proj
        # grounding: patch mean color, zero-centered, into the first 3 channels
        mean_rgb = patches.reshape(*patches.shape[:-1], -1, 3).mean(dim=-2)
        inject = torch.zeros_like(x)
        inject[..., :3] = (2.0 * mean_rgb - 1.0) * self.config.color_ground_scale
        x = x + inject

        b, l, _ = x.shape
        cls = self.class_embedding.expand(b, 1, -1)
        x = torch.cat([cls, x], dim=1) + self.positional[: l + 1]
        n_prompts = 0
        if prompt_tokens is not None:
            n_prompts = prompt_tokens.shape[0]
            x = torch.cat([x, prompt_tokens.to(x.dtype).expand(b, n_prompts, -1)], dim=1)
        mask = build_prompt_mask(l + 1, n_prompts, device=x.device)

        vv_from = self.config.vision_blocks - self.config.vision_vv_blocks
        for i, block in enumerate(self.blocks):
            x = block(x, mask, vv=i >= vv_from)

        out = self._ln(x) @ self.proj
        if not bool(torch.isfinite(out).all()):
            raise NonFiniteOutput("vision encoder produced non-finite values")
        f_cls = out[:, 0]
        f_img = out[:, 1 : l + 1]
        f_body = out[:, l + 1 :]
        return f_cls, f_img, f_body


class TinyTextEncoder(TextEncoder):
    def __init__(
        self,
        config: TinyEncoderConfig = TinyEncoderConfig(),
        dtype: torch.dtype = torch.float32,
        arrays: dict[str, np.ndarray] | None = None,
        tokenizer=None,
    ):
        super().__init__()
        self.config = config
        self.dtype_ = dtype
        self.out_dim = config.out_dim
        self.token_width = config.width
        self.context_limit = config.context_limit
        self._tokenizer = tokenizer or (lambda text: hash_tokenize(text, config.vocab_size))

        if arrays is None:
            arrays = self._generate_arrays(config)
        self._arrays = arrays
        self.fingerprint = _fingerprint("text", config, arrays)

        def frozen(name: str) -> nn.Parameter:
            return nn.Parameter(torch.as_tensor(arrays[name], dtype=dtype), requires_grad=False)

        self.token_embedding = frozen("token_embedding")
        self.positional = frozen("positional")
        self.proj = frozen("proj")
        self.ln_final_g = frozen("ln_final_g")
        self.ln_final_b = frozen("ln_final_b")
        self.blocks = nn.ModuleList(
            _Block({k.split("/", 1)[1]: v for k, v in arrays.items() if k.startswith(f"block{i}/")},
                   config.heads, dtype)
            for i in range(config.text_blocks)
        )

    @staticmethod
    def _generate_arrays(config: TinyEncoderConfig) -> dict[str, np.ndarray]:
        rng = np.random.default_rng([config.seed, 1])
        width = config.width
        scale = width**-0.5
        token_embedding = _gauss(rng, (config.vocab_size, width), 0.05)
        token_embedding[:, :GROUND_DIM] = 0.0  # grounded channels carry lexicon content only
        lexicon_ids = {w: hash_tokenize(w, config.vocab_size)[0] for w in COLOR_LEXICON}
        collisions = {}
        for word, row in lexicon_ids.items():
            collisions.setdefault(row, []).append(word)
        for row, words in collisions.items():
            if len(words) > 1 and len({COLOR_LEXICON[w] for w in words}) > 1:
                raise RuntimeError(f"color lexicon hash collision {words}; adjust vocab_size")
        for word, rgb in COLOR_LEXICON.items():
            row = lexicon_ids[word]
            token_embedding[row, :GROUND_DIM] = (
                (2.0 * np.asarray(rgb) - 1.0) * config.color_ground_scale
            )
        positional = _gauss(rng, (config.context_limit, width), scale)
        positional[:, :GROUND_DIM] = 0.0
        arrays: dict[str, np.ndarray] = {
            "token_embedding": token_embedding,
            "positional": positional,
            "proj": _shared_output_proj(config, rng),
            "ln_final_g": np.ones(width),
            "ln_final_b": np.zeros(width),
        }
        for i in range(config.text_blocks):
            for k, v in _block_arrays(rng, width, config.mlp_ratio).items():
                arrays[f"block{i}/{k}"] = v
        return arrays

    def tokenize(self, text: str) -> list[int]:
        return self._tokenizer(text)

    def embed_tokens(self, ids: list[int]) -> torch.Tensor:
        if not ids:
            raise ValueError("cannot embed an empty token sequence")
        idx = torch.as_tensor(ids, dtype=torch.long)
        return self.token_embedding[idx]

    def forward_embeddings(self, embeddings: torch.Tensor, pool_from: int = 0) -> torch.Tensor:
        t = embeddings.shape[-2]
        if t > self.context_limit:
            raise ContextOverflow(f"{t} tokens exceed the {self.context_limit}-token context")
        if not (0 <= pool_from < t):
            raise ValueError(f"pool_from {pool_from} leaves no tokens to pool")
        x = embeddings.to(self.positional.dtype) + self.positional[:t]
        mask = torch.ones((t, t), dtype=torch.bool, device=x.device)
        for block in self.blocks:
            x = block(x, mask, vv=False)
        mean = x.mean(dim=-1, keepdim=True)
        var = x.var(dim=-1, keepdim=True, unbiased=False)
        x = (x - mean) / torch.sqrt(var + 1e-5) * self.ln_final_g + self.ln_final_b
        out = x[..., pool_from:, :].mean(dim=-2) @ self.proj
        if not bool(torch.isfinite(out).all()):
            raise NonFiniteOutput("text encoder produced non-finite values")
        return out
