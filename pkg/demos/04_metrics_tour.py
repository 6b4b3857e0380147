#!/usr/bin/env python3
"""The evaluation suite on hand-built score sets.

Image level uses AUROC, AP, and F1 at the best threshold; pixel level adds
AUPRO (per-region overlap vs false-positive rate, capped at 0.3) and IoU at
the best threshold. Everything classifies via score >= T and sweeps T over
the distinct scores.
"""

import numpy as np

from clusterbank import ScoredSet, aupro, auroc, average_precision, f1_max, iou_max

# --- image-level metrics on a tiny score set -------------------------------
scores = np.array([0.1, 0.2, 0.35, 0.4, 0.8, 0.9])
labels = np.array([0, 0, 1, 0, 1, 1])
s = ScoredSet(scores, labels)
f1, threshold = f1_max(s)
print("image-level on", scores.tolist(), "labels", labels.tolist())
print(f"  AUROC {auroc(s):.4f}   AP {average_precision(s):.4f}   "
      f"F1max {f1:.4f} at T={threshold}")

# Threshold metrics only care about score ORDER: any increasing transform
# leaves them unchanged.
warped = ScoredSet(scores**3 * 2 + 1, labels)
assert auroc(warped) == auroc(s)
assert f1_max(warped)[0] == f1
print("  (invariant under x -> 2x^3 + 1)")

# --- pixel-level metrics with regions ---------------------------------------
rng = np.random.default_rng(0)
mask = np.zeros((48, 48), dtype=bool)
mask[6:14, 6:14] = True      # region A
mask[30:38, 28:40] = True    # region B

perfect = mask.astype(float)
print(f"\nindicator map:   AUPRO {aupro([perfect], [mask]):.4f} (exact localization)")

noisy = mask * 1.0 + rng.normal(0, 0.35, size=mask.shape)
print(f"noisy map:       AUPRO {aupro([noisy], [mask]):.4f}")

half = mask.astype(float)
half[30:38, 28:40] = 0.0     # second region completely missed
print(f"one region lost: AUPRO {aupro([half], [mask]):.4f} (plateaus at 1/2)")

pix = ScoredSet(noisy.ravel(), mask.ravel(), level="pixel")
print(f"noisy pixels:    AUROC {auroc(pix):.4f}  IoUmax {iou_max(pix):.4f}")
