#!/usr/bin/env python3
"""How pseudo-classes are discovered: the first-neighbor hierarchy and the
silhouette-based level choice.

No cluster count is ever supplied. Points link to their nearest neighbors,
connected components become clusters, and the recursion repeats over cluster
means until nothing merges. The level with the best silhouette wins.
"""

import numpy as np

from clusterbank import finch, first_neighbor_graph, select_level, silhouette

rng = np.random.default_rng(3)

# Four well-separated Gaussian blobs of 40 points, RMS radius ~1, 12 apart.
centers = np.array([[0, 0], [12, 0], [0, 12], [12, 12]], dtype=float)
points = np.concatenate(
    [c + rng.normal(0, 1 / np.sqrt(2), size=(40, 2)) for c in centers]
)
truth = np.repeat(np.arange(4), 40)

# Level 0 adjacency alone already groups mutual neighbors:
adj = first_neighbor_graph(points)
print(f"first-neighbor graph: {adj.nnz} directed links over {len(points)} points")

hierarchy = finch(points)
print("\nhierarchy (finest to coarsest):")
for i, level in enumerate(hierarchy.levels):
    if level.n_clusters >= 2:
        s = silhouette(points, level.labels)
        print(f"  level {i}: {level.n_clusters:3d} clusters, silhouette {s:+.4f}")
    else:
        print(f"  level {i}: {level.n_clusters:3d} cluster (silhouette undefined)")

model = select_level(hierarchy, points)
print(f"\nchosen level {model.chosen_level} with K={model.n_clusters}")

# Keys are the cluster means; compare them to the generating centers.
order = np.argsort([np.linalg.norm(k) for k in model.keys])
for k in order:
    members = truth[model.assignments == k]
    print(f"  key {np.round(model.keys[k], 2)} <- {len(members)} points, "
          f"generating blob(s) {sorted(set(members.tolist()))}")
