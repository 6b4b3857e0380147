"""Hierarchical memory bank: one patch coreset per semantic cluster.

In pseudo mode the clusters come from the first-neighbor-graph hierarchy over
train-image semantic vectors; in labeled mode they are the ground-truth
classes with per-class mean keys. Build-time membership uses the raw
partition; query-time routing always goes through nearest-key assignment.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .archive import FeatureArchive, read_blob, write_blob
from .clustering import ClusterModel, assign, cluster_means, finch, select_level
from .coreset import Coreset, CoresetConfig, kcenter_greedy

MODE_PSEUDO = "pseudo"
MODE_LABELED = "labeled"

BANK_FORMAT = "hier-memory-bank"
BANK_VERSION = 1


class BankError(ValueError):
    pass


@dataclass
class HierMemoryBank:
    cluster_model: ClusterModel
    banks: list[Coreset]
    config: CoresetConfig
    mode: str
    patch_counts: list[int]  # P_k: source pool size per cluster
    patch_dim: int
    semantic_dim: int
    build_distance_evals: int  # coreset selection, summed over clusters
    clustering_distance_evals: int  # hierarchy construction (0 in labeled mode)

    @property
    def n_clusters(self) -> int:
        return self.cluster_model.n_clusters

    def bank_sizes(self) -> list[int]:
        return [len(b) for b in self.banks]


def _pool_patches(archive: FeatureArchive, record_indices: np.ndarray) -> np.ndarray:
    train = archive.train_records()
    rows = [train[i].patches.reshape(-1, archive.patch_dim) for i in record_indices]
    return np.concatenate(rows, axis=0)


def build(
    archive: FeatureArchive, coreset_cfg: CoresetConfig, mode: str = MODE_PSEUDO
) -> HierMemoryBank:
    """Cluster train images, pool each cluster's patches, compress per cluster.

    Every cluster's greedy selection runs under the same seed, so banks are
    identical across cluster relabelings (pseudo vs labeled on matching
    partitions).
    """
    train = archive.train_records()
    if not train:
        raise BankError("archive has no train records")
    semantics = np.stack([r.semantic for r in train]).astype(np.float64)

    if mode == MODE_PSEUDO:
        hierarchy = finch(semantics)
        model = select_level(hierarchy, semantics)
        clustering_evals = hierarchy.distance_evals
    elif mode == MODE_LABELED:
        labels = [r.class_label for r in train]
        missing = [r.id for r in train if r.class_label is None]
        if missing:
            raise BankError(f"labeled mode but records lack class_label: {missing[:5]}")
        names = sorted(set(labels))
        name_to_idx = {n: i for i, n in enumerate(names)}
        assignments = np.array([name_to_idx[l] for l in labels], dtype=np.int64)
        keys, sizes = cluster_means(semantics, assignments, len(names))
        model = ClusterModel(
            chosen_level=None,
            n_clusters=len(names),
            keys=keys.astype(np.float32),
            sizes=sizes,
            assignments=assignments,
            silhouette_by_level=[],
            cluster_names=names,
        )
        clustering_evals = 0
    else:
        raise BankError(f"unknown bank mode {mode!r}")

    banks: list[Coreset] = []
    patch_counts: list[int] = []
    build_evals = 0
    for k in range(model.n_clusters):
        members = np.flatnonzero(model.assignments == k)
        if members.size == 0:
            raise BankError(f"cluster {k} has no train images")
        pool = _pool_patches(archive, members)
        core = kcenter_greedy(pool, coreset_cfg)
        banks.append(core)
        patch_counts.append(pool.shape[0])
        build_evals += core.distance_evals

    return HierMemoryBank(
        cluster_model=model,
        banks=banks,
        config=coreset_cfg,
        mode=mode,
        patch_counts=patch_counts,
        patch_dim=archive.patch_dim,
        semantic_dim=archive.semantic_dim,
        build_distance_evals=build_evals,
        clustering_distance_evals=clustering_evals,
    )


def route(e: np.ndarray, bank: HierMemoryBank) -> int:
    """Cluster index whose key is nearest to the semantic vector."""
    return assign(e, bank.cluster_model)


def save(bank: HierMemoryBank, path: str | Path) -> None:
    if str(path) == "":
        raise OSError("bank path is empty")
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    (root / "banks").mkdir(exist_ok=True)
    bank.cluster_model.save(root / "cluster_model.json")
    bank_meta = []
    for k, core in enumerate(bank.banks):
        name = f"banks/bank{k:03d}.cor"
        write_blob(root / name, core.vectors)
        bank_meta.append(
            {
                "blob": name,
                "indices": [int(i) for i in core.indices],
                "covering_radius": float(core.covering_radius),
                "distance_evals": int(core.distance_evals),
            }
        )
    manifest = {
        "format": BANK_FORMAT,
        "version": BANK_VERSION,
        "mode": bank.mode,
        "coreset_ratio": bank.config.ratio,
        "coreset_seed": bank.config.seed,
        "patch_counts": bank.patch_counts,
        "patch_dim": bank.patch_dim,
        "semantic_dim": bank.semantic_dim,
        "build_distance_evals": bank.build_distance_evals,
        "clustering_distance_evals": bank.clustering_distance_evals,
        "banks": bank_meta,
    }
    with open(root / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)


def load(path: str | Path) -> HierMemoryBank:
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise BankError(f"missing bank manifest: {manifest_path}")
    with open(manifest_path) as f:
        manifest = json.load(f)
    if manifest.get("format") != BANK_FORMAT:
        raise BankError(f"{manifest_path}: not a memory bank")
    if manifest.get("version") != BANK_VERSION:
        raise BankError(f"unsupported bank version {manifest.get('version')}")
    model = ClusterModel.load(root / "cluster_model.json")
    banks = []
    for bm in manifest["banks"]:
        vectors = read_blob(root / bm["blob"])
        banks.append(
            Coreset(
                indices=np.asarray(bm["indices"], dtype=np.int64),
                vectors=vectors,
                covering_radius=float(bm["covering_radius"]),
                distance_evals=int(bm["distance_evals"]),
            )
        )
    if len(banks) != model.n_clusters:
        raise BankError(
            f"bank count {len(banks)} != cluster count {model.n_clusters} (truncated?)"
        )
    return HierMemoryBank(
        cluster_model=model,
        banks=banks,
        config=CoresetConfig(ratio=manifest["coreset_ratio"], seed=manifest["coreset_seed"]),
        mode=manifest["mode"],
        patch_counts=[int(p) for p in manifest["patch_counts"]],
        patch_dim=int(manifest["patch_dim"]),
        semantic_dim=int(manifest["semantic_dim"]),
        build_distance_evals=int(manifest["build_distance_evals"]),
        clustering_distance_evals=int(manifest["clustering_distance_evals"]),
    )
