"""The two retrieval precision metrics.

Label precision@K: per query, the fraction of (attribute, retrieved image)
cells whose label matches, averaged per query first and then over queries.
Instance precision@K: per query, whether some top-K image satisfies every
attribute at once, averaged over queries.
"""

from __future__ import annotations

from typing import Mapping, Sequence

from oapr.errors import RankingLengthMismatch


def _check(rankings: Sequence[Sequence[str]], queries: Sequence[tuple[str, ...]], k: int) -> None:
    if len(rankings) != len(queries):
        raise ValueError("one ranking per query required")
    for i, ranking in enumerate(rankings):
        if len(ranking) != k:
            raise RankingLengthMismatch(
                f"ranking {i} has {len(ranking)} entries, expected exactly {k}"
            )


def p_at_k_label(
    rankings: Sequence[Sequence[str]],
    labels: Mapping[str, Mapping[str, int]],
    queries: Sequence[tuple[str, ...]],
    k: int,
) -> float:
    _check(rankings, queries, k)
    if not queries:
        return 0.0
    per_query = []
    for ranking, attrs in zip(rankings, queries):
        hits = sum(labels[img][a] for a in attrs for img in ranking)
        per_query.append(hits / (len(attrs) * k))
    return sum(per_query) / len(per_query)


def p_at_k_instance(
    rankings: Sequence[Sequence[str]],
    labels: Mapping[str, Mapping[str, int]],
    queries: Sequence[tuple[str, ...]],
    k: int,
) -> float:
    _check(rankings, queries, k)
    if not queries:
        return 0.0
    successes = 0
    for ranking, attrs in zip(rankings, queries):
        if any(all(labels[img][a] == 1 for a in attrs) for img in ranking):
            successes += 1
    return successes / len(queries)
