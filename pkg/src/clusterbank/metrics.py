"""Evaluation metrics: AUROC, AP, F1-max, IoU-max, AUPRO, and report assembly.

Thresholded metrics classify a sample abnormal when score >= T and sweep T
over every distinct score, reporting the smallest threshold that attains the
optimum. All metrics are invariant under strictly increasing score
transforms. Pixel metrics pool pixels across the images of a group; AUPRO
treats the 8-connected components of each ground-truth mask as regions and
integrates mean per-region overlap against pooled false-positive rate up to
``fpr_cap``, normalized by the cap.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.ndimage import label as cc_label
from scipy.stats import rankdata

from .archive import FeatureArchive
from .scoring import AnomalyResult

EIGHT_CONN = np.ones((3, 3), dtype=int)

GROUP_PER_CLASS = "per_class"
GROUP_GLOBAL = "global"
GROUP_PER_CLUSTER = "per_cluster"


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class ScoredSet:
    """Scores with binary labels (1 = abnormal) at one evaluation level."""

    scores: np.ndarray
    labels: np.ndarray
    level: str = "image"

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64).ravel()
        y = np.asarray(self.labels).ravel().astype(np.int8)
        if s.shape != y.shape:
            raise MetricError(f"scores ({s.shape}) and labels ({y.shape}) differ in length")
        if s.size == 0:
            raise MetricError("empty scored set")
        if not np.isin(y, (0, 1)).all():
            raise MetricError("labels must be 0 or 1")
        object.__setattr__(self, "scores", s)
        object.__setattr__(self, "labels", y)

    @property
    def n_pos(self) -> int:
        return int(self.labels.sum())

    @property
    def n_neg(self) -> int:
        return int(self.labels.size - self.labels.sum())


def auroc(scored: ScoredSet) -> float:
    """Probability a random abnormal outscores a random normal, ties count 1/2."""
    if scored.n_pos == 0 or scored.n_neg == 0:
        raise MetricError("AUROC needs both labels present")
    ranks = rankdata(scored.scores)  # average ranks on ties
    pos_rank_sum = ranks[scored.labels == 1].sum()
    n_pos, n_neg = scored.n_pos, scored.n_neg
    return float((pos_rank_sum - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def _sweep(scored: ScoredSet) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Cumulative (thresholds desc, tp, fp) at each distinct score cut."""
    order = np.argsort(-scored.scores, kind="stable")
    s = scored.scores[order]
    y = scored.labels[order]
    tp = np.cumsum(y)
    fp = np.cumsum(1 - y)
    last = np.append(np.flatnonzero(np.diff(s) != 0), s.size - 1)
    return s[last], tp[last], fp[last]


def average_precision(scored: ScoredSet) -> float:
    """AP = sum over descending thresholds of (R_n - R_{n-1}) * P_n."""
    if scored.n_pos == 0:
        raise MetricError("AP needs at least one positive")
    _, tp, fp = _sweep(scored)
    precision = tp / (tp + fp)
    recall = tp / scored.n_pos
    prev_recall = np.concatenate(([0.0], recall[:-1]))
    return float(((recall - prev_recall) * precision).sum())


def f1_max(scored: ScoredSet) -> tuple[float, float]:
    """Best F1 over all distinct thresholds and the smallest threshold attaining it."""
    if scored.n_pos == 0:
        raise MetricError("F1 needs at least one positive")
    thresholds, tp, fp = _sweep(scored)
    f1 = 2 * tp / (tp + fp + scored.n_pos)
    best = f1.max()
    idx = int(np.flatnonzero(f1 == best).max())  # deepest cut = smallest threshold
    return float(best), float(thresholds[idx])


def iou_max(scored: ScoredSet) -> float:
    """Best intersection-over-union of the thresholded prediction vs ground truth."""
    if scored.n_pos == 0:
        raise MetricError("IoU needs at least one positive")
    _, tp, fp = _sweep(scored)
    iou = tp / (scored.n_pos + fp)
    return float(iou.max())


def aupro(
    score_maps: Sequence[np.ndarray],
    gt_masks: Sequence[np.ndarray],
    fpr_cap: float = 0.3,
) -> float:
    """Area under the per-region-overlap curve vs pooled FPR, up to ``fpr_cap``.

    Regions are 8-connected components of the ground-truth masks. The curve is
    evaluated at every distinct score, integrated by trapezoid with linear
    interpolation at the cap, and normalized by the cap.
    """
    if fpr_cap <= 0:
        raise MetricError(f"fpr_cap must be positive, got {fpr_cap}")
    if len(score_maps) != len(gt_masks) or not score_maps:
        raise MetricError("need matching, non-empty score maps and masks")
    region_scores: list[np.ndarray] = []
    neg_parts: list[np.ndarray] = []
    all_parts: list[np.ndarray] = []
    for smap, mask in zip(score_maps, gt_masks):
        smap = np.asarray(smap, dtype=np.float64)
        mask = np.asarray(mask).astype(bool)
        if smap.shape != mask.shape:
            raise MetricError(f"map shape {smap.shape} != mask shape {mask.shape}")
        lab, n_regions = cc_label(mask, structure=EIGHT_CONN)
        for r in range(1, n_regions + 1):
            region_scores.append(np.sort(smap[lab == r]))
        neg_parts.append(smap[~mask])
        all_parts.append(smap.ravel())
    if not region_scores:
        raise MetricError("no ground-truth regions in the set")
    negatives = np.sort(np.concatenate(neg_parts))
    if negatives.size == 0:
        raise MetricError("no negative pixels; FPR undefined")

    thresholds = np.unique(np.concatenate(all_parts))[::-1]  # descending
    pro = np.zeros(thresholds.size)
    for rs in region_scores:
        pro += (rs.size - np.searchsorted(rs, thresholds, side="left")) / rs.size
    pro /= len(region_scores)
    fpr = (negatives.size - np.searchsorted(negatives, thresholds, side="left")) / negatives.size

    # prepend the empty-prediction anchor, clip the curve at the cap
    fpr = np.concatenate(([0.0], fpr))
    pro = np.concatenate(([0.0], pro))
    if fpr[-1] <= fpr_cap:
        area = float(np.trapezoid(pro, fpr))
        return area / fpr_cap
    cut = int(np.searchsorted(fpr, fpr_cap, side="right"))
    f0, f1_ = fpr[cut - 1], fpr[cut]
    p0, p1_ = pro[cut - 1], pro[cut]
    p_cap = p0 + (p1_ - p0) * ((fpr_cap - f0) / (f1_ - f0)) if f1_ > f0 else p0
    fpr_c = np.concatenate((fpr[:cut], [fpr_cap]))
    pro_c = np.concatenate((pro[:cut], [p_cap]))
    return float(np.trapezoid(pro_c, fpr_c)) / fpr_cap


# ---------------------------------------------------------------------------
# Report assembly

IMAGE_METRICS = ("auroc", "ap", "f1_max")
PIXEL_METRICS = ("auroc", "ap", "f1_max", "aupro", "iou_max")


@dataclass
class GroupMetrics:
    image: dict[str, float]
    pixel: dict[str, float]


@dataclass
class MetricReport:
    grouping: str
    groups: dict[str, GroupMetrics]
    image_macro: dict[str, float]  # m-prefixed means + mad
    pixel_macro: dict[str, float]

    def to_json(self) -> dict:
        return {
            "grouping": self.grouping,
            "groups": {
                g: {"image": gm.image, "pixel": gm.pixel} for g, gm in self.groups.items()
            },
            "image_macro": self.image_macro,
            "pixel_macro": self.pixel_macro,
        }


def _group_key(record, result, grouping: str):
    if grouping == GROUP_PER_CLASS:
        if record.class_label is None:
            raise MetricError(f"record {record.id!r} lacks class_label for per_class grouping")
        return record.class_label
    if grouping == GROUP_PER_CLUSTER:
        return f"cluster_{result.routed_cluster}"
    if grouping == GROUP_GLOBAL:
        return "all"
    raise MetricError(f"unknown grouping {grouping!r}")


def evaluate(
    results: list[AnomalyResult],
    archive: FeatureArchive,
    grouping: str = GROUP_GLOBAL,
    fpr_cap: float = 0.3,
) -> MetricReport:
    """Compute image- and pixel-level metrics within groups, then macro-average.

    ``mad`` is the mean of a level's metric values (3 at image level, 5 at
    pixel level).
    """
    by_id = {r.record_id: r for r in results}
    test = archive.test_records()
    missing = [r.id for r in test if r.id not in by_id]
    if missing:
        raise MetricError(f"results missing for test records: {missing[:5]}")

    groups: dict[str, dict] = {}
    for rec in test:
        res = by_id[rec.id]
        key = str(_group_key(rec, res, grouping))
        g = groups.setdefault(
            key,
            {"img_scores": [], "img_labels": [], "maps": [], "masks": []},
        )
        g["img_scores"].append(res.image_score)
        g["img_labels"].append(1 if rec.gt_label == "abnormal" else 0)
        g["maps"].append(res.score_map.astype(np.float64))
        g["masks"].append(rec.mask_array())

    out: dict[str, GroupMetrics] = {}
    for key in sorted(groups):
        g = groups[key]
        img = ScoredSet(np.array(g["img_scores"]), np.array(g["img_labels"]), level="image")
        pix = ScoredSet(
            np.concatenate([m.ravel() for m in g["maps"]]),
            np.concatenate([m.ravel() for m in g["masks"]]),
            level="pixel",
        )
        f1_i, t_i = f1_max(img)
        f1_p, t_p = f1_max(pix)
        out[key] = GroupMetrics(
            image={
                "auroc": auroc(img),
                "ap": average_precision(img),
                "f1_max": f1_i,
                "threshold": t_i,
            },
            pixel={
                "auroc": auroc(pix),
                "ap": average_precision(pix),
                "f1_max": f1_p,
                "aupro": aupro(g["maps"], g["masks"], fpr_cap=fpr_cap),
                "iou_max": iou_max(pix),
                "threshold": t_p,
            },
        )

    image_macro = {f"m{m}": float(np.mean([out[k].image[m] for k in out])) for m in IMAGE_METRICS}
    image_macro["mad"] = float(np.mean([image_macro[f"m{m}"] for m in IMAGE_METRICS]))
    pixel_macro = {f"m{m}": float(np.mean([out[k].pixel[m] for k in out])) for m in PIXEL_METRICS}
    pixel_macro["mad"] = float(np.mean([pixel_macro[f"m{m}"] for m in PIXEL_METRICS]))
    return MetricReport(
        grouping=grouping, groups=out, image_macro=image_macro, pixel_macro=pixel_macro
    )
