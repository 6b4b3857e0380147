"""Multi-class image anomaly detection with cluster-routed coreset memory banks.

Normal-image semantic embeddings are clustered into pseudo-classes, each
cluster's patch features are compressed into a k-center coreset, and new
images are scored by nearest-neighbor distance against the bank their
semantics route to. Per-cluster thresholds make evaluation robust to missing
class labels.
"""

from .archive import (
    ArchiveError,
    FeatureArchive,
    ImageRecord,
    PatchGrid,
    read_archive,
    write_archive,
)
from .bank import HierMemoryBank, build, load, route, save
from .clustering import (
    ClusterModel,
    FinchHierarchy,
    assign,
    finch,
    first_neighbor_graph,
    select_level,
    silhouette,
)
from .coreset import Coreset, CoresetConfig, kcenter_greedy
from .costs import CostCounters
from .harness import (
    DiffRatioReport,
    EvalReport,
    Scenario,
    bench,
    compare_monolithic,
    diff_ratio,
    export_embeddings,
    run_scenario,
    strip_class_labels,
)
from .metrics import (
    MetricReport,
    ScoredSet,
    aupro,
    auroc,
    average_precision,
    evaluate,
    f1_max,
    iou_max,
)
from .patches import LayerMap, PatchTensor, aggregate_window, merge_layers
from .scoring import AnomalyResult, score_batch, score_record, upsample_bilinear
from .synth import ClassParams, SynthSpec, separable_spec, synth_generate

__version__ = "0.1.0"

__all__ = [
    "ArchiveError",
    "FeatureArchive",
    "ImageRecord",
    "PatchGrid",
    "read_archive",
    "write_archive",
    "HierMemoryBank",
    "build",
    "load",
    "route",
    "save",
    "ClusterModel",
    "FinchHierarchy",
    "assign",
    "finch",
    "first_neighbor_graph",
    "select_level",
    "silhouette",
    "Coreset",
    "CoresetConfig",
    "kcenter_greedy",
    "CostCounters",
    "DiffRatioReport",
    "EvalReport",
    "Scenario",
    "bench",
    "compare_monolithic",
    "diff_ratio",
    "export_embeddings",
    "run_scenario",
    "strip_class_labels",
    "MetricReport",
    "ScoredSet",
    "aupro",
    "auroc",
    "average_precision",
    "evaluate",
    "f1_max",
    "iou_max",
    "LayerMap",
    "PatchTensor",
    "aggregate_window",
    "merge_layers",
    "AnomalyResult",
    "score_batch",
    "score_record",
    "upsample_bilinear",
    "ClassParams",
    "SynthSpec",
    "separable_spec",
    "synth_generate",
]
