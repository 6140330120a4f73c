"""Multi-attribute query scoring over a gallery index."""

from __future__ import annotations

from dataclasses import dataclass, field

import torch

from oapr.errors import EmptyGallery
from oapr.retrieval.index import GalleryIndex

COMBINE_MODES = ("mean", "product", "min")


@dataclass(frozen=True)
class RetrievalQuery:
    attributes: tuple[str, ...]
    k: int

    def __post_init__(self):
        deduped = tuple(dict.fromkeys(a.strip() for a in self.attributes if a.strip()))
        object.__setattr__(self, "attributes", deduped)
        if not self.attributes:
            raise ValueError("query needs at least one attribute phrase")
        if self.k < 1:
            raise ValueError("k must be positive")


@dataclass(frozen=True)
class ScoredEntry:
    image_id: str
    combined_score: float
    per_attribute: dict[str, float] = field(compare=False)


def combine_scores(per_attr: torch.Tensor, mode: str) -> torch.Tensor:
    """(E, A) per-attribute scores -> (E,) combined, by the configured rule."""
    if mode == "mean":
        return per_attr.mean(dim=-1)
    if mode == "product":
        return per_attr.prod(dim=-1)
    if mode == "min":
        return per_attr.min(dim=-1).values
    raise ValueError(f"unknown combine mode {mode!r}; expected one of {COMBINE_MODES}")


def score_query(
    index: GalleryIndex,
    query: RetrievalQuery,
    model,
    mode: str = "mean",
    entry_subset: list[int] | None = None,
) -> list[ScoredEntry]:
    """Rank gallery entries for a multi-attribute query.

    Per attribute a: score(entry, a) = cosine(f_att_img(entry)[a], f_text_att[a]);
    combined per the mode (mean by default), sorted descending with ties broken
    by ascending image_id; the top k are returned. ``entry_subset`` restricts
    scoring to the given entry positions (balanced evaluation mode).
    """
    if len(index) == 0:
        raise EmptyGallery("cannot score against an empty index")
    positions = list(range(len(index))) if entry_subset is None else list(entry_subset)
    if not positions:
        raise EmptyGallery("entry subset is empty")
    if query.k > len(positions):
        raise ValueError(f"k={query.k} exceeds gallery size {len(positions)}")

    with torch.no_grad():
        f_text_att = model.encode_attribute_phrases(list(query.attributes))  # (A, C)
        f_body = torch.as_tensor(index.features[positions]).to(f_text_att.dtype)  # (E, N, C)
        f_att_img, _ = model.selector(f_text_att, f_body)  # (E, A, C)
        img = f_att_img / f_att_img.norm(dim=-1, keepdim=True).clamp_min(1e-12)
        txt = f_text_att / f_text_att.norm(dim=-1, keepdim=True).clamp_min(1e-12)
        per_attr = (img * txt.unsqueeze(0)).sum(dim=-1)  # (E, A)
        combined = combine_scores(per_attr, mode)

    scored = [
        ScoredEntry(
            image_id=index.entries[pos].image_id,
            combined_score=float(combined[row]),
            per_attribute={
                phrase: float(per_attr[row, col]) for col, phrase in enumerate(query.attributes)
            },
        )
        for row, pos in enumerate(positions)
    ]
    scored.sort(key=lambda s: (-s.combined_score, s.image_id))
    return scored[: query.k]
