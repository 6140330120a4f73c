"""Attribute-related feature selection.

Multi-head cross-attention with attribute text features as queries over the
N body features; the head-averaged attention distribution p is exposed for
the attribute-body association loss.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from oapr.errors import ShapeMismatch


@dataclass
class SelectionParams:
    w_q: torch.Tensor  # (C, d_model)
    w_k: torch.Tensor  # (C, d_model)
    w_v: torch.Tensor  # (C, d_model)
    w_o: torch.Tensor  # (d_model, C)
    n_heads: int = 4

    def __post_init__(self):
        d_model = self.w_q.shape[1]
        if d_model % self.n_heads != 0:
            raise ShapeMismatch(f"d_model {d_model} not divisible by {self.n_heads} heads")


def cross_attend(
    f_text_att: torch.Tensor,
    f_img_body: torch.Tensor,
    params: SelectionParams,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Select body features per attribute.

    f_text_att: (A, C) queries; f_img_body: (..., N, C) keys/values (a leading
    batch axis is allowed). Returns (f_att_img (..., A, C), p (..., A, N))
    where p is the attention distribution averaged over heads.
    """
    if f_text_att.shape[-1] != f_img_body.shape[-1]:
        raise ShapeMismatch("feature dims of queries and body features disagree")
    for mat, rows in ((params.w_q, f_text_att.shape[-1]), (params.w_k, f_img_body.shape[-1])):
        if mat.shape[0] != rows:
            raise ShapeMismatch("projection matrices do not match the feature dim")

    h = params.n_heads
    d_model = params.w_q.shape[1]
    d_k = d_model // h

    def split(x: torch.Tensor) -> torch.Tensor:
        *lead, t, _ = x.shape
        return x.reshape(*lead, t, h, d_k).transpose(-3, -2)  # (..., H, T, d_k)

    q = split(f_text_att @ params.w_q)
    k = split(f_img_body @ params.w_k)
    v = split(f_img_body @ params.w_v)
    logits = q @ k.transpose(-1, -2) / (d_k**0.5)  # (..., H, A, N)
    p_heads = torch.softmax(logits, dim=-1)
    heads_out = p_heads @ v  # (..., H, A, d_k)
    *lead, _, a, _ = heads_out.shape
    concat = heads_out.transpose(-3, -2).reshape(*lead, a, d_model)
    f_att_img = concat @ params.w_o
    p = p_heads.mean(dim=-3)
    return f_att_img, p


class AttributeFeatureSelector(nn.Module):
    """Trainable selection module; projections initialize orthogonal."""

    def __init__(self, feat_dim: int, d_model: int | None = None, n_heads: int = 4,
                 seed: int = 2, dtype: torch.dtype = torch.float32):
        super().__init__()
        d_model = feat_dim if d_model is None else d_model
        if d_model % n_heads != 0:
            raise ShapeMismatch(f"d_model {d_model} not divisible by {n_heads} heads")
        self.n_heads = n_heads
        rng = np.random.default_rng(seed)

        def orthogonal(rows: int, cols: int) -> torch.Tensor:
            a = rng.normal(size=(max(rows, cols), min(rows, cols)))
            q, _ = np.linalg.qr(a)
            q = q[:rows, :cols] if rows >= cols else q[:cols, :rows].T
            return torch.as_tensor(np.ascontiguousarray(q), dtype=dtype)

        self.w_q = nn.Parameter(orthogonal(feat_dim, d_model))
        self.w_k = nn.Parameter(orthogonal(feat_dim, d_model))
        self.w_v = nn.Parameter(orthogonal(feat_dim, d_model))
        self.w_o = nn.Parameter(orthogonal(d_model, feat_dim))

    @property
    def params(self) -> SelectionParams:
        return SelectionParams(self.w_q, self.w_k, self.w_v, self.w_o, self.n_heads)

    def forward(self, f_text_att: torch.Tensor, f_img_body: torch.Tensor):
        return cross_attend(f_text_att, f_img_body, self.params)
