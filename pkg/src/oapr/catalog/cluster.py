"""Bottom-up agglomerative clustering of phrase embeddings.

Average linkage over cosine distance, with a fixed tie rule (merge the pair
with the lowest cluster-key order on equal distance) so runs are
reproducible. Written directly rather than delegating to a library because
the tie rule and the merge trace must be deterministic and testable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from oapr.errors import TooManyClusters

LINKAGE_NAME = "average-cosine"


@dataclass(frozen=True)
class ClusterAssignment:
    n_clusters: int
    labels: tuple[int, ...]
    linkage: str = LINKAGE_NAME

    def members(self, cluster_id: int) -> tuple[int, ...]:
        return tuple(i for i, lab in enumerate(self.labels) if lab == cluster_id)

    def sizes(self) -> tuple[int, ...]:
        counts = [0] * self.n_clusters
        for lab in self.labels:
            counts[lab] += 1
        return tuple(counts)


def cosine_distance_matrix(embeddings: np.ndarray) -> np.ndarray:
    x = np.asarray(embeddings, dtype=np.float64)
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    unit = x / norms
    dist = 1.0 - unit @ unit.T
    np.fill_diagonal(dist, 0.0)
    return dist


@dataclass
class _Cluster:
    key: int  # smallest original row index, used for tie-breaking
    members: list[int] = field(default_factory=list)


def cluster_attributes(embeddings: np.ndarray, n_clusters: int) -> ClusterAssignment:
    """Merge singletons until n_clusters remain.

    Average linkage is maintained with the Lance-Williams update, which is
    exact for this linkage. Cluster ids are assigned by ascending smallest
    member index, so the labeling is independent of merge history.
    """
    x = np.asarray(embeddings, dtype=np.float64)
    n = x.shape[0]
    if n_clusters < 1:
        raise ValueError("n_clusters must be positive")
    if n_clusters > n:
        raise TooManyClusters(f"asked for {n_clusters} clusters from {n} records")

    base = cosine_distance_matrix(x)
    clusters: dict[int, _Cluster] = {i: _Cluster(key=i, members=[i]) for i in range(n)}
    dist: dict[tuple[int, int], float] = {}
    keys = sorted(clusters)
    for ai in range(len(keys)):
        for bi in range(ai + 1, len(keys)):
            dist[(keys[ai], keys[bi])] = base[keys[ai], keys[bi]]

    while len(clusters) > n_clusters:
        best_pair = min(dist, key=lambda pair: (dist[pair], pair))
        a, b = best_pair  # a < b by construction
        size_a = len(clusters[a].members)
        size_b = len(clusters[b].members)
        for other in clusters:
            if other in (a, b):
                continue
            ka = (min(a, other), max(a, other))
            kb = (min(b, other), max(b, other))
            merged = (size_a * dist[ka] + size_b * dist[kb]) / (size_a + size_b)
            dist[ka] = merged
            del dist[kb]
        del dist[(a, b)]
        clusters[a].members.extend(clusters[b].members)
        del clusters[b]

    labels = [0] * n
    for cluster_id, key in enumerate(sorted(clusters)):
        for member in clusters[key].members:
            labels[member] = cluster_id
    return ClusterAssignment(n_clusters=n_clusters, labels=tuple(labels))
