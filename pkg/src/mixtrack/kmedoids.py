"""Deterministic k-medoids with explicit initial medoids.

PAM-style alternating assignment/update on a Euclidean distance matrix.
Ties are always broken toward the lowest index so reruns are identical.
"""

from __future__ import annotations

import numpy as np


def kmedoids(
    points: np.ndarray,
    initial_medoids: np.ndarray,
    max_iters: int = 50,
) -> tuple:
    """Cluster points around k medoids.

    Args:
        points: (n, d) data matrix.
        initial_medoids: (k,) indices into points.
        max_iters: swap iteration cap.

    Returns:
        (assignments, medoids): (n,) cluster labels in [0, k) and the
        final (k,) medoid indices.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    medoids = np.asarray(initial_medoids, dtype=int).copy()
    k = len(medoids)
    dist = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=2)

    assignments = np.argmin(dist[:, medoids], axis=1)
    for _ in range(max_iters):
        new_medoids = medoids.copy()
        for c in range(k):
            members = np.flatnonzero(assignments == c)
            if members.size == 0:
                continue
            within = dist[np.ix_(members, members)].sum(axis=1)
            # argmin takes the first minimum, i.e. the lowest member index
            new_medoids[c] = members[np.argmin(within)]
        new_assignments = np.argmin(dist[:, new_medoids], axis=1)
        if np.array_equal(new_medoids, medoids) and np.array_equal(
            new_assignments, assignments
        ):
            break
        medoids = new_medoids
        assignments = new_assignments
    return assignments, medoids
