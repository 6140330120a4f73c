"""Gallery ingestion, feature index, query scoring, and retrieval metrics."""

from oapr.retrieval.gallery import GalleryEntry, load_gallery, write_gallery
from oapr.retrieval.index import GalleryIndex, build_index, load_image_array, load_index, save_index
from oapr.retrieval.metrics import p_at_k_instance, p_at_k_label
from oapr.retrieval.queries import EvalQuery, balanced_subsample, make_query_set
from oapr.retrieval.scoring import (
    COMBINE_MODES,
    RetrievalQuery,
    ScoredEntry,
    combine_scores,
    score_query,
)

__all__ = [
    "COMBINE_MODES",
    "EvalQuery",
    "GalleryEntry",
    "GalleryIndex",
    "RetrievalQuery",
    "ScoredEntry",
    "balanced_subsample",
    "build_index",
    "combine_scores",
    "load_gallery",
    "load_image_array",
    "load_index",
    "make_query_set",
    "p_at_k_instance",
    "p_at_k_label",
    "save_index",
    "score_query",
    "write_gallery",
]
