"""Frozen-side and learnable-side text features."""

from __future__ import annotations

from importlib import resources

import torch

from oapr.encoders.base import TextEncoder
from oapr.encoders.prompts import AttributeContextPrompt
from oapr.errors import ContextOverflow, DegenerateEnsemble, TemplateError

BODY_CLASSES = ("person", "head", "upper body", "lower body")
BACKGROUND_CLASSES = ("background", "bicycle", "bench", "road", "building", "tree", "car", "wall")


def load_templates() -> list[str]:
    text = resources.files("oapr.encoders").joinpath("data/templates.txt").read_text("utf-8")
    return [line.strip() for line in text.splitlines() if line.strip()]


def _l2(rows: torch.Tensor, eps: float = 0.0) -> torch.Tensor:
    norm = rows.norm(dim=-1, keepdim=True)
    return rows / (norm + eps)


def prompt_ensemble_text(
    class_names: list[str], templates: list[str], encoder: TextEncoder
) -> torch.Tensor:
    """Average the normalized embeddings of every template filled with the class.

    Returns a (K, C) matrix with unit rows, ordered like class_names.
    """
    if not templates:
        raise TemplateError("template list is empty")
    for t in templates:
        if t.count("{}") != 1:
            raise TemplateError(f"template {t!r} must contain exactly one {{}} placeholder")
    rows = []
    for name in class_names:
        feats = torch.stack([_l2(encoder.encode_text(t.format(name))) for t in templates])
        mean = feats.mean(dim=0)
        norm = float(mean.norm())
        if norm < 1e-6:
            raise DegenerateEnsemble(f"ensemble for {name!r} collapsed to ~zero norm")
        rows.append(mean / mean.norm())
    return torch.stack(rows)


def encode_attributes(
    context: AttributeContextPrompt, phrases: list[str], encoder: TextEncoder
) -> torch.Tensor:
    """Encode phrases behind the shared learnable context; rows are unit-norm.

    Works identically for phrases never seen in training — this is the
    novel-attribute inference path.
    """
    rows = []
    for phrase in phrases:
        ids = encoder.tokenize(phrase)
        if not ids:
            raise ValueError(f"phrase {phrase!r} produced no tokens")
        total = context.length + len(ids)
        if total > encoder.context_limit:
            raise ContextOverflow(
                f"context ({context.length}) + phrase ({len(ids)}) tokens exceed "
                f"the {encoder.context_limit}-token budget"
            )
        phrase_embs = encoder.embed_tokens(ids)
        embs = torch.cat([context.tokens.to(phrase_embs.dtype), phrase_embs])
        # readout pools the phrase tokens; the context acts through attention
        rows.append(_l2(encoder.forward_embeddings(embs, pool_from=context.length)))
    return torch.stack(rows)
