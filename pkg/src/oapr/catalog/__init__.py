"""Catalog construction: verbalize, embed, cluster, and split attributes."""

from oapr.catalog.cluster import ClusterAssignment, cluster_attributes
from oapr.catalog.embed import HashNGramEmbedder, SentenceEncoderAdapter, embed_phrases
from oapr.catalog.records import (
    DROP_MARKER,
    AttributeCatalog,
    AttributeRecord,
    VerbalizationRule,
    filter_and_verbalize,
    load_rules,
    parse_rules,
)
from oapr.catalog.split import (
    DEFAULT_NOVEL_FRACTION,
    SplitManifest,
    novel_count,
    partition_clusters,
)

__all__ = [
    "AttributeCatalog",
    "AttributeRecord",
    "ClusterAssignment",
    "DEFAULT_NOVEL_FRACTION",
    "DROP_MARKER",
    "HashNGramEmbedder",
    "SentenceEncoderAdapter",
    "SplitManifest",
    "VerbalizationRule",
    "cluster_attributes",
    "embed_phrases",
    "filter_and_verbalize",
    "load_rules",
    "novel_count",
    "parse_rules",
    "partition_clusters",
]
