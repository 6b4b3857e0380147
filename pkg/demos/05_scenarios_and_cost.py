#!/usr/bin/env python3
"""The four label-availability scenarios, the diff ratio, and why the
hierarchical bank is cheaper than a single pooled bank.

Training side: known = per-class banks, unknown = clustered pseudo-classes.
Evaluation side: known = per-class optimal thresholds, unknown = per-cluster
thresholds (cluster routing never needed labels). The diff ratio compares
unknown-evaluation F1 to known-evaluation F1 — 100% means the engine loses
nothing when labels disappear. A single pooled bank with one global threshold
is the baseline that does lose F1 when class score ranges differ.
"""

import clusterbank as cb
from clusterbank.harness import ALL_SCENARIOS, Scenario

cfg = cb.CoresetConfig(ratio=0.10, seed=0)

# pool sizes stay below the full-pairwise-matrix cutoff so both engines are
# counted under the same quadratic strategy
spec = cb.separable_spec(n_classes=3, margin=10.0, train_per_class=20, test_per_class=12)
archive = cb.synth_generate(spec, seed=2)

print("all four scenarios on a labeled 3-class archive:")
for scenario in ALL_SCENARIOS:
    rep = cb.run_scenario(archive, scenario, cfg)
    print(f"  {scenario}: bank={rep.bank_mode:7s} grouping={rep.grouping:11s} "
          f"image mF1 {rep.metrics.image_macro['mf1_max']:.4f}")

known = cb.run_scenario(archive, Scenario.parse("uk"), cfg)
unknown = cb.run_scenario(archive, Scenario.parse("uu"), cfg)
ratio = cb.diff_ratio(known, unknown)
print(f"\ndiff ratio (hierarchical): image {ratio.image_ratio_pct:.1f}%, "
      f"pixel {ratio.pixel_ratio_pct:.1f}%")

# The same comparison for the pooled single-bank baseline, on an archive whose
# two classes score in disjoint ranges — one global threshold cannot fit both.
shifted = cb.separable_spec(
    n_classes=2, margin=40.0, patch_margin=400.0,
    train_per_class=12, test_per_class=8,
    sigma_patch_by_class=[0.05, 3.0], delta_by_class=[0.8, 48.0],
)
archive2 = cb.synth_generate(shifted, seed=0)
mono_known = cb.run_scenario(archive2, Scenario.parse("uk"), cfg, engine="monolithic")
mono_unknown = cb.run_scenario(archive2, Scenario.parse("uu"), cfg, engine="monolithic")
mono_ratio = cb.diff_ratio(mono_known, mono_unknown)
print(f"diff ratio (monolithic, shifted ranges): image {mono_ratio.image_ratio_pct:.1f}% "
      f"<- the threshold gap")

# Cost side: building one coreset per cluster replaces one P^2 pass with
# sum of P_k^2, and each query searches only its routed bank.
comp = cb.compare_monolithic(archive, cfg)
h, m = comp.hier_counters, comp.mono_counters
print(f"\ncost counters on the 3-class archive (P = {m.total_patches:,} patches):")
print(f"  build evals: hierarchical {h.build_distance_evals:,} "
      f"vs monolithic {m.build_distance_evals:,} "
      f"(ratio {comp.build_ratio:.3f}, clusters {h.patch_counts})")
print(f"  query evals: hierarchical {h.query_distance_evals:,} "
      f"vs monolithic {m.query_distance_evals:,} "
      f"(ratio {comp.query_ratio:.3f})")
print(f"  clustering overhead: {h.clustering_distance_evals:,} evals")
