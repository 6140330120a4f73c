"""Training objective: attribute-body association, weighted text-to-image
contrastive alignment, and their weighted total."""

from __future__ import annotations

from dataclasses import dataclass

import torch

from oapr.errors import DegenerateBatch, NonFiniteLoss

LOG_CLAMP = 1e-12


@dataclass(frozen=True)
class LossWeights:
    lambda_distill: float = 0.4
    lambda_aba: float = 0.1
    tau: float = 0.07
    w_neg: float = 50.0

    def __post_init__(self):
        import math

        values = (self.lambda_distill, self.lambda_aba, self.tau, self.w_neg)
        if not all(math.isfinite(v) for v in values):
            raise ValueError("loss weights must be finite")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.w_neg <= 0:
            raise ValueError("w_neg must be positive")
        if self.lambda_distill < 0 or self.lambda_aba < 0:
            raise ValueError("loss multipliers must be nonnegative")


def aba_loss(p: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    """Cross-entropy between attention rows and body-part targets.

    p: (..., A, N) attention distributions; targets: (A, N) rows summing to 1
    (multi-part attributes carry split mass). Averaged over attributes, and
    over any leading batch axes.
    """
    if p.shape[-2:] != targets.shape[-2:]:
        raise ValueError("p and targets disagree on (A, N)")
    log_p = torch.log(p.clamp_min(LOG_CLAMP))
    per_attr = -(targets * log_p).sum(dim=-1)  # (..., A)
    return per_attr.mean()


def body_part_targets(body_parts: list[tuple[int, ...]], n_body: int,
                      dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """Multi-hot body-part rows normalized to distributions, shape (A, N)."""
    rows = torch.zeros((len(body_parts), n_body), dtype=dtype)
    for i, parts in enumerate(body_parts):
        if not parts:
            raise ValueError(f"attribute {i} has no body parts")
        for j in parts:
            rows[i, j] = 1.0
        rows[i] /= rows[i].sum()
    return rows


def t2i_contrastive_loss(
    f_att_img_batch: torch.Tensor,
    f_text_att: torch.Tensor,
    labels: torch.Tensor,
    weights: LossWeights,
) -> torch.Tensor:
    """Weighted text-to-image contrastive loss.

    f_att_img_batch: (B, A, C) attribute-conditioned visual features,
    f_text_att: (A, C) attribute text features, labels: (B, A) in {0, 1}.
    Per attribute with at least one batch positive:
    -log(S+ / (S+ + w_neg * S-)) with S± the exp(cos/tau) sums over the
    positive/negative images; attributes without positives are skipped.
    """
    if f_att_img_batch.dim() != 3:
        raise ValueError("f_att_img_batch must be (B, A, C)")
    b, a, c = f_att_img_batch.shape
    if f_text_att.shape != (a, c):
        raise ValueError("f_text_att must be (A, C) matching the batch")
    if labels.shape != (b, a):
        raise ValueError("labels must be (B, A)")

    img = f_att_img_batch / f_att_img_batch.norm(dim=-1, keepdim=True).clamp_min(LOG_CLAMP)
    txt = f_text_att / f_text_att.norm(dim=-1, keepdim=True).clamp_min(LOG_CLAMP)
    sims = (img * txt.unsqueeze(0)).sum(dim=-1)  # (B, A)
    exp_sims = torch.exp(sims / weights.tau)

    pos_mask = labels.to(exp_sims.dtype)
    s_pos = (exp_sims * pos_mask).sum(dim=0)  # (A,)
    s_neg = (exp_sims * (1.0 - pos_mask)).sum(dim=0)
    active = pos_mask.sum(dim=0) > 0
    if not bool(active.any()):
        raise DegenerateBatch("no attribute has a positive image in this batch")
    ratio = s_pos[active] / (s_pos[active] + weights.w_neg * s_neg[active])
    return -torch.log(ratio.clamp_min(LOG_CLAMP)).sum()


def total_loss(
    l_t2i: torch.Tensor | float,
    l_distill: torch.Tensor | float,
    l_aba: torch.Tensor | float,
    weights: LossWeights,
) -> torch.Tensor:
    terms = [
        v if isinstance(v, torch.Tensor) else torch.as_tensor(float(v), dtype=torch.float64)
        for v in (l_t2i, l_distill, l_aba)
    ]
    if not all(bool(torch.isfinite(t)) for t in terms):
        raise NonFiniteLoss("a loss component is NaN or infinite")
    total = terms[0] + weights.lambda_distill * terms[1] + weights.lambda_aba * terms[2]
    if not bool(torch.isfinite(total)):
        raise NonFiniteLoss("total loss is NaN or infinite")
    return total
