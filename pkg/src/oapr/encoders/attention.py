"""Masked multi-head attention with either query-key or value-value weights."""

from __future__ import annotations

from dataclasses import dataclass

import torch

from oapr.errors import ShapeMismatch


@dataclass
class BlockWeights:
    """Projection matrices for one attention sub-layer (bias-free)."""

    w_q: torch.Tensor  # (C, C)
    w_k: torch.Tensor  # (C, C)
    w_v: torch.Tensor  # (C, C)
    w_o: torch.Tensor  # (C, C)
    n_heads: int = 1


def masked_softmax(logits: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Softmax over the last axis restricted to mask==True entries.

    Masked entries come out exactly 0.0, so downstream sums are bit-identical
    to a computation that never saw the masked tokens.
    """
    filled = logits.masked_fill(~mask, float("-inf"))
    return torch.softmax(filled, dim=-1)


def _split_heads(x: torch.Tensor, n_heads: int) -> torch.Tensor:
    # (..., T, C) -> (..., H, T, C/H)
    *lead, t, c = x.shape
    return x.reshape(*lead, t, n_heads, c // n_heads).transpose(-3, -2)


def _merge_heads(x: torch.Tensor) -> torch.Tensor:
    # (..., H, T, dk) -> (..., T, C)
    *lead, h, t, dk = x.shape
    return x.transpose(-3, -2).reshape(*lead, t, h * dk)


def attention_sublayer(
    tokens: torch.Tensor,
    weights: BlockWeights,
    mask: torch.Tensor,
    vv: bool = False,
    return_weights: bool = False,
):
    """One attention sub-layer over (..., T, C) tokens.

    With ``vv`` the attention logits come from value-value similarity,
    softmax(V Vᵀ/√d), instead of softmax(Q Kᵀ/√d). The boolean mask is (T, T)
    with True meaning "may attend"; every diagonal entry must be True.
    """
    c = tokens.shape[-1]
    t = tokens.shape[-2]
    if mask.shape != (t, t):
        raise ShapeMismatch(f"mask shape {tuple(mask.shape)} does not match {t} tokens")
    if not bool(torch.diagonal(mask).all()):
        raise ValueError("attention mask must keep every diagonal entry")
    if c % weights.n_heads != 0:
        raise ShapeMismatch(f"width {c} not divisible by {weights.n_heads} heads")

    v = _split_heads(tokens @ weights.w_v, weights.n_heads)
    if vv:
        query, key = v, v
    else:
        query = _split_heads(tokens @ weights.w_q, weights.n_heads)
        key = _split_heads(tokens @ weights.w_k, weights.n_heads)
    d_k = c // weights.n_heads
    logits = query @ key.transpose(-1, -2) / (d_k**0.5)
    attn = masked_softmax(logits, mask)
    out = _merge_heads(attn @ v) @ weights.w_o
    if return_weights:
        return out, attn
    return out


def vv_attention_block(
    tokens: torch.Tensor,
    mask: torch.Tensor,
    params: BlockWeights,
    return_weights: bool = False,
):
    """Value-value attention over one token matrix (the Q-K replacement)."""
    return attention_sublayer(tokens, params, mask, vv=True, return_weights=return_weights)
