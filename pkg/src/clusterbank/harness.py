"""Scenario orchestration: label availability, diff ratios, cost accounting.

Four scenarios cover class-label availability at training and evaluation
time. Training with labels builds per-class banks; without labels the bank
comes from semantic clustering. Evaluation with labels groups metrics per
class; without labels the cluster-routed engine falls back to per-cluster
grouping (its thresholds never needed labels), while the single-bank
baseline is stuck with one global threshold — which is exactly the gap the
diff ratio exposes.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np

from .archive import FeatureArchive
from .bank import MODE_LABELED, MODE_PSEUDO, HierMemoryBank, build
from .clustering import ClusterModel
from .coreset import CoresetConfig, kcenter_greedy
from .costs import CostCounters
from .metrics import (
    GROUP_GLOBAL,
    GROUP_PER_CLASS,
    GROUP_PER_CLUSTER,
    MetricReport,
    evaluate,
)
from .scoring import score_batch

KNOWN = "known"
UNKNOWN = "unknown"

MODE_MONOLITHIC = "monolithic"


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    """Label availability at training and at evaluation."""

    training: str
    evaluation: str

    def __post_init__(self):
        for side in (self.training, self.evaluation):
            if side not in (KNOWN, UNKNOWN):
                raise ScenarioError(f"scenario side must be known/unknown, got {side!r}")

    @classmethod
    def parse(cls, text: str) -> "Scenario":
        """Accepts 'kk', 'uk', 'ku', 'uu' (training letter first) or 'K->U' forms."""
        t = text.strip().lower().replace("->", "").replace(" ", "")
        if len(t) != 2 or any(c not in "ku" for c in t):
            raise ScenarioError(f"cannot parse scenario {text!r}")
        word = {"k": KNOWN, "u": UNKNOWN}
        return cls(training=word[t[0]], evaluation=word[t[1]])

    def __str__(self) -> str:
        return f"{self.training[0].upper()}->{self.evaluation[0].upper()}"


ALL_SCENARIOS = (
    Scenario(KNOWN, KNOWN),
    Scenario(UNKNOWN, KNOWN),
    Scenario(KNOWN, UNKNOWN),
    Scenario(UNKNOWN, UNKNOWN),
)


@dataclass
class EvalReport:
    scenario: str
    bank_mode: str
    grouping: str
    metrics: MetricReport
    counters: CostCounters
    provenance: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "scenario": self.scenario,
            "bank_mode": self.bank_mode,
            "grouping": self.grouping,
            "metrics": self.metrics.to_json(),
            "counters": self.counters.to_json(),
            "provenance": self.provenance,
        }

    def save(self, out_dir: str | Path) -> None:
        """Write report.json plus a flat report.csv (one row per group metric)."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "report.json", "w") as f:
            json.dump(self.to_json(), f, indent=2, sort_keys=True)
        with open(out / "report.csv", "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["group", "level", "metric", "value"])
            for gname in sorted(self.metrics.groups):
                gm = self.metrics.groups[gname]
                for metric, value in sorted(gm.image.items()):
                    writer.writerow([gname, "image", metric, repr(value)])
                for metric, value in sorted(gm.pixel.items()):
                    writer.writerow([gname, "pixel", metric, repr(value)])
            for metric, value in sorted(self.metrics.image_macro.items()):
                writer.writerow(["__macro__", "image", metric, repr(value)])
            for metric, value in sorted(self.metrics.pixel_macro.items()):
                writer.writerow(["__macro__", "pixel", metric, repr(value)])


@dataclass
class DiffRatioReport:
    image_f1_known: float
    image_f1_unknown: float
    pixel_f1_known: float
    pixel_f1_unknown: float

    @property
    def image_ratio_pct(self) -> float:
        return 100.0 * self.image_f1_unknown / self.image_f1_known

    @property
    def pixel_ratio_pct(self) -> float:
        return 100.0 * self.pixel_f1_unknown / self.pixel_f1_known

    def to_json(self) -> dict:
        return {
            "image_f1_known": self.image_f1_known,
            "image_f1_unknown": self.image_f1_unknown,
            "image_ratio_pct": self.image_ratio_pct,
            "pixel_f1_known": self.pixel_f1_known,
            "pixel_f1_unknown": self.pixel_f1_unknown,
            "pixel_ratio_pct": self.pixel_ratio_pct,
        }


def strip_class_labels(
    archive: FeatureArchive, split: Optional[str] = None
) -> FeatureArchive:
    """Copy of the archive with class labels removed (optionally one split only)."""
    records = [
        replace(r, class_label=None) if split is None or r.split == split else r
        for r in archive.manifest
    ]
    return FeatureArchive(
        manifest=records,
        semantic_dim=archive.semantic_dim,
        patch_dim=archive.patch_dim,
        patch_grid=archive.patch_grid,
        meta=dict(archive.meta),
    )


def _require_labels(archive: FeatureArchive, split: str, scenario: Scenario) -> None:
    missing = [r.id for r in archive.records(split) if r.class_label is None]
    if missing:
        raise ScenarioError(
            f"scenario {scenario} needs class labels on {split} records; "
            f"missing for {missing[:5]}"
        )


def check_scenario_labels(
    archive: FeatureArchive, scenario: Scenario, engine: str = "hierarchical"
) -> None:
    if scenario.training == KNOWN:
        _require_labels(archive, "train", scenario)
    if scenario.evaluation == KNOWN:
        _require_labels(archive, "test", scenario)


def grouping_for(scenario: Scenario, engine: str = "hierarchical") -> str:
    if scenario.evaluation == KNOWN:
        return GROUP_PER_CLASS
    return GROUP_PER_CLUSTER if engine == "hierarchical" else GROUP_GLOBAL


def build_monolithic(archive: FeatureArchive, coreset_cfg: CoresetConfig) -> HierMemoryBank:
    """Single-bank baseline: every train patch pooled into one coreset."""
    train = archive.train_records()
    if not train:
        raise ScenarioError("archive has no train records")
    semantics = np.stack([r.semantic for r in train]).astype(np.float64)
    model = ClusterModel(
        chosen_level=None,
        n_clusters=1,
        keys=semantics.mean(axis=0, keepdims=True).astype(np.float32),
        sizes=np.array([len(train)]),
        assignments=np.zeros(len(train), dtype=np.int64),
        silhouette_by_level=[],
    )
    pool = np.concatenate(
        [r.patches.reshape(-1, archive.patch_dim) for r in train], axis=0
    )
    core = kcenter_greedy(pool, coreset_cfg)
    return HierMemoryBank(
        cluster_model=model,
        banks=[core],
        config=coreset_cfg,
        mode=MODE_MONOLITHIC,
        patch_counts=[pool.shape[0]],
        patch_dim=archive.patch_dim,
        semantic_dim=archive.semantic_dim,
        build_distance_evals=core.distance_evals,
        clustering_distance_evals=0,
    )


def evaluate_bank(
    archive: FeatureArchive,
    bank: HierMemoryBank,
    scenario: Scenario,
    engine: str = "hierarchical",
    smooth_sigma: Optional[float] = None,
    threads: int = 1,
    fpr_cap: float = 0.3,
) -> EvalReport:
    """Score the test split with a prebuilt bank and report under the
    scenario's grouping."""
    check_scenario_labels(archive, scenario, engine)
    grouping = grouping_for(scenario, engine)
    results, counters = score_batch(archive, bank, smooth_sigma=smooth_sigma, threads=threads)
    metrics = evaluate(results, archive, grouping=grouping, fpr_cap=fpr_cap)
    return EvalReport(
        scenario=str(scenario),
        bank_mode=bank.mode,
        grouping=grouping,
        metrics=metrics,
        counters=counters,
        provenance={
            "engine": engine,
            "coreset_ratio": bank.config.ratio,
            "seed": bank.config.seed,
            "smooth_sigma": smooth_sigma,
            "threads": threads,
            "fpr_cap": fpr_cap,
            "pixel_pooling": "pooled-within-group",
            "timestamp": datetime.now(timezone.utc).isoformat(),
        },
    )


def run_scenario(
    archive: FeatureArchive,
    scenario: Scenario,
    coreset_cfg: CoresetConfig,
    engine: str = "hierarchical",
    smooth_sigma: Optional[float] = None,
    threads: int = 1,
    fpr_cap: float = 0.3,
) -> EvalReport:
    """Build the bank the scenario's training side dictates, then evaluate."""
    check_scenario_labels(archive, scenario, engine)
    if engine == "monolithic":
        bank = build_monolithic(archive, coreset_cfg)
    else:
        mode = MODE_LABELED if scenario.training == KNOWN else MODE_PSEUDO
        bank = build(archive, coreset_cfg, mode=mode)
    return evaluate_bank(
        archive, bank, scenario, engine=engine,
        smooth_sigma=smooth_sigma, threads=threads, fpr_cap=fpr_cap,
    )


def diff_ratio(report_known: EvalReport, report_unknown: EvalReport) -> DiffRatioReport:
    """Unknown-evaluation mF1 over known-evaluation mF1, image and pixel level."""
    ik = report_known.metrics.image_macro["mf1_max"]
    pk = report_known.metrics.pixel_macro["mf1_max"]
    if ik == 0 or pk == 0:
        raise ScenarioError("known-evaluation F1 is zero; diff ratio undefined")
    return DiffRatioReport(
        image_f1_known=ik,
        image_f1_unknown=report_unknown.metrics.image_macro["mf1_max"],
        pixel_f1_known=pk,
        pixel_f1_unknown=report_unknown.metrics.pixel_macro["mf1_max"],
    )


@dataclass
class CostComparison:
    hier_counters: CostCounters
    mono_counters: CostCounters
    hier_report: EvalReport
    mono_report: EvalReport

    @property
    def build_ratio(self) -> float:
        return self.hier_counters.build_distance_evals / self.mono_counters.build_distance_evals

    @property
    def query_ratio(self) -> float:
        return self.hier_counters.query_distance_evals / self.mono_counters.query_distance_evals


def compare_monolithic(
    archive: FeatureArchive,
    coreset_cfg: CoresetConfig,
    smooth_sigma: Optional[float] = None,
    threads: int = 1,
) -> CostComparison:
    """Hierarchical bank vs pooled single bank on the same archive.

    Both paths are scored under their unknown-evaluation grouping
    (per-cluster vs global); counters expose the quadratic build cost and the
    per-query search cost of each. The sum-of-squares vs squared-total build
    comparison holds when every pool stays within the full-pairwise-matrix
    regime of the coreset selector; beyond it the counters report the lazy
    strategy's actual evaluations instead.
    """
    uu = Scenario(UNKNOWN, UNKNOWN)
    hier_bank = build(archive, coreset_cfg, mode=MODE_PSEUDO)
    hier_report = evaluate_bank(
        archive, hier_bank, uu, engine="hierarchical",
        smooth_sigma=smooth_sigma, threads=threads,
    )
    mono_bank = build_monolithic(archive, coreset_cfg)
    mono_report = evaluate_bank(
        archive, mono_bank, uu, engine="monolithic",
        smooth_sigma=smooth_sigma, threads=threads,
    )
    return CostComparison(
        hier_counters=hier_report.counters,
        mono_counters=mono_report.counters,
        hier_report=hier_report,
        mono_report=mono_report,
    )


def export_embeddings(archive: FeatureArchive, bank: HierMemoryBank, path: str | Path) -> None:
    """Semantic vectors with cluster assignment and class label, one CSV row per record.

    Train rows carry their build-time assignment; test rows are routed
    through the keys.
    """
    from .bank import route

    train = archive.train_records()
    train_ids = {r.id: i for i, r in enumerate(train)}
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        dim = archive.semantic_dim
        writer.writerow(["id", "cluster", "class"] + [f"e{i}" for i in range(dim)])
        for rec in archive.manifest:
            if rec.id in train_ids:
                cluster = int(bank.cluster_model.assignments[train_ids[rec.id]])
            else:
                cluster = route(rec.semantic, bank)
            writer.writerow(
                [rec.id, cluster, rec.class_label if rec.class_label is not None else ""]
                + [repr(float(v)) for v in rec.semantic]
            )


def bench(
    archive: FeatureArchive,
    coreset_cfg: CoresetConfig,
    out_csv: Optional[str | Path] = None,
    threads: int = 1,
) -> list[dict]:
    """Known-vs-unknown evaluation and cost counters for both engines.

    Needs class labels on the test split (the known-evaluation side).
    """
    rows = []
    uk = Scenario(UNKNOWN, KNOWN)
    uu = Scenario(UNKNOWN, UNKNOWN)
    for engine in ("hierarchical", "monolithic"):
        if engine == "hierarchical":
            bank = build(archive, coreset_cfg, mode=MODE_PSEUDO)
        else:
            bank = build_monolithic(archive, coreset_cfg)
        known = evaluate_bank(archive, bank, uk, engine=engine, threads=threads)
        unknown = evaluate_bank(archive, bank, uu, engine=engine, threads=threads)
        ratio = diff_ratio(known, unknown)
        counters = known.counters
        rows.append(
            {
                "scenario": engine,
                "K": bank.n_clusters,
                "P": counters.total_patches,
                "sum_pk_sq": counters.sum_squared_patch_counts,
                "build_evals": counters.build_distance_evals,
                "query_evals": counters.query_distance_evals,
                "image_mF1_known": known.metrics.image_macro["mf1_max"],
                "image_mF1_unknown": unknown.metrics.image_macro["mf1_max"],
                "diff_ratio": ratio.image_ratio_pct,
            }
        )
    if out_csv is not None:
        with open(out_csv, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)
    return rows
