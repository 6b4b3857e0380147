"""Distance-evaluation accounting.

Cost is counted in pairwise L2 evaluations rather than wall-clock time, so
the quadratic scaling of bank construction and the per-query savings from
cluster routing are testable deterministically on any hardware.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class CostCounters:
    clustering_distance_evals: int = 0  # hierarchy construction over images
    build_distance_evals: int = 0  # coreset selection over patch pools
    query_distance_evals: int = 0  # test patches x searched bank rows
    patch_counts: list[int] = field(default_factory=list)  # P_k per cluster

    @property
    def total_patches(self) -> int:
        return sum(self.patch_counts)

    @property
    def sum_squared_patch_counts(self) -> int:
        return sum(p * p for p in self.patch_counts)

    def to_json(self) -> dict:
        return {
            "clustering_distance_evals": self.clustering_distance_evals,
            "build_distance_evals": self.build_distance_evals,
            "query_distance_evals": self.query_distance_evals,
            "patch_counts": list(self.patch_counts),
            "total_patches": self.total_patches,
            "sum_squared_patch_counts": self.sum_squared_patch_counts,
        }
