import csv

import numpy as np
import pytest

from clusterbank import (
    CoresetConfig,
    bench,
    build,
    compare_monolithic,
    diff_ratio,
    export_embeddings,
    run_scenario,
    separable_spec,
    strip_class_labels,
    synth_generate,
)
from clusterbank.harness import (
    ALL_SCENARIOS,
    Scenario,
    ScenarioError,
    build_monolithic,
    evaluate_bank,
    grouping_for,
)


def shifted_range_archive(seed=0):
    """Two classes whose score ranges are deliberately disjoint: the noisy
    class's normal patches score higher than the tight class's anomalies."""
    spec = separable_spec(
        n_classes=2,
        margin=40.0,
        patch_margin=400.0,
        train_per_class=12,
        test_per_class=8,
        sigma_patch_by_class=[0.05, 3.0],
        delta_by_class=[0.8, 48.0],
        grid=(8, 8),
        image_size=(64, 64),
        anomaly_rate=0.5,
    )
    return synth_generate(spec, seed=seed)


class TestScenario:
    def test_parse_forms(self):
        assert str(Scenario.parse("kk")) == "K->K"
        assert str(Scenario.parse("uk")) == "U->K"
        assert str(Scenario.parse("K->U")) == "K->U"
        assert str(Scenario.parse("uu")) == "U->U"

    def test_parse_garbage(self):
        with pytest.raises(ScenarioError):
            Scenario.parse("xyz")

    def test_all_four_combinations(self):
        assert len(ALL_SCENARIOS) == 4
        assert len({str(s) for s in ALL_SCENARIOS}) == 4

    def test_grouping_rules(self):
        assert grouping_for(Scenario.parse("uk")) == "per_class"
        assert grouping_for(Scenario.parse("uu")) == "per_cluster"
        assert grouping_for(Scenario.parse("uu"), engine="monolithic") == "global"


class TestRunScenario:
    def test_all_scenarios_on_labeled_archive(self, two_class_archive, default_cfg):
        for scenario in ALL_SCENARIOS:
            rep = run_scenario(two_class_archive, scenario, default_cfg)
            assert rep.scenario == str(scenario)
            assert 0.0 <= rep.metrics.image_macro["mad"] <= 1.0

    def test_uu_runs_without_labels(self, two_class_archive, default_cfg):
        stripped = strip_class_labels(two_class_archive)
        rep = run_scenario(stripped, Scenario.parse("uu"), default_cfg)
        assert rep.grouping == "per_cluster"

    def test_label_requirements_enforced(self, two_class_archive, default_cfg):
        stripped = strip_class_labels(two_class_archive)
        for text in ("kk", "ku"):
            with pytest.raises(ScenarioError, match="train"):
                run_scenario(stripped, Scenario.parse(text), default_cfg)
        with pytest.raises(ScenarioError, match="test"):
            run_scenario(
                strip_class_labels(two_class_archive, split="test"),
                Scenario.parse("uk"),
                default_cfg,
            )

    def test_uu_equals_uk_when_clusters_match_classes(self, two_class_archive, default_cfg):
        known = run_scenario(two_class_archive, Scenario.parse("uk"), default_cfg)
        unknown = run_scenario(two_class_archive, Scenario.parse("uu"), default_cfg)
        assert known.metrics.image_macro["mf1_max"] == unknown.metrics.image_macro["mf1_max"]
        assert known.metrics.pixel_macro["mf1_max"] == unknown.metrics.pixel_macro["mf1_max"]
        ratio = diff_ratio(known, unknown)
        assert ratio.image_ratio_pct == pytest.approx(100.0, abs=0.1)
        assert ratio.pixel_ratio_pct == pytest.approx(100.0, abs=0.1)

    def test_kk_bank_matches_uu_bank_up_to_relabeling(self, two_class_archive, default_cfg):
        from clusterbank.bank import MODE_LABELED, MODE_PSEUDO

        labeled = build(two_class_archive, default_cfg, mode=MODE_LABELED)
        pseudo = build(two_class_archive, default_cfg, mode=MODE_PSEUDO)
        matched = 0
        for kp in range(pseudo.n_clusters):
            d = np.linalg.norm(
                labeled.cluster_model.keys - pseudo.cluster_model.keys[kp], axis=1
            )
            kl = int(d.argmin())
            if pseudo.banks[kp].vectors.tobytes() == labeled.banks[kl].vectors.tobytes():
                matched += 1
        assert matched == pseudo.n_clusters


class TestDiffRatio:
    def test_identical_reports_100(self, two_class_archive, default_cfg):
        rep = run_scenario(two_class_archive, Scenario.parse("uk"), default_cfg)
        ratio = diff_ratio(rep, rep)
        assert ratio.image_ratio_pct == 100.0
        assert ratio.pixel_ratio_pct == 100.0

    def test_monolithic_loses_on_shifted_ranges(self, default_cfg):
        archive = shifted_range_archive()
        known = run_scenario(archive, Scenario.parse("uk"), default_cfg, engine="monolithic")
        unknown = run_scenario(archive, Scenario.parse("uu"), default_cfg, engine="monolithic")
        ratio = diff_ratio(known, unknown)
        assert ratio.image_ratio_pct < 100.0

    def test_zero_known_f1_rejected(self, two_class_archive, default_cfg):
        rep = run_scenario(two_class_archive, Scenario.parse("uk"), default_cfg)
        broken = run_scenario(two_class_archive, Scenario.parse("uk"), default_cfg)
        broken.metrics.image_macro["mf1_max"] = 0.0
        with pytest.raises(ScenarioError, match="zero"):
            diff_ratio(broken, rep)


class TestCostComparison:
    def test_hundred_patches_two_clusters(self):
        # 2 classes x 2 images x 25 cells: P=100 split into two 50-patch pools
        spec = separable_spec(
            n_classes=2, train_per_class=2, test_per_class=2,
            grid=(5, 5), image_size=(21, 21), anomaly_rate=0.5,
        )
        archive = synth_generate(spec, seed=1)
        comp = compare_monolithic(archive, CoresetConfig(ratio=0.2, seed=0))
        assert comp.hier_counters.patch_counts == [50, 50]
        assert comp.hier_counters.build_distance_evals == 2 * 50 * 50
        assert comp.mono_counters.build_distance_evals == 100 * 100
        assert comp.build_ratio == pytest.approx(0.5)

    def test_k1_hierarchical_equals_monolithic_plus_clustering(self, default_cfg):
        # two train images are mutual first neighbors: the hierarchy collapses
        # to K=1 and the only cost difference is the clustering term
        spec = separable_spec(n_classes=1, train_per_class=2, test_per_class=4)
        archive = synth_generate(spec, seed=2)
        comp = compare_monolithic(archive, default_cfg)
        assert comp.hier_counters.patch_counts == comp.mono_counters.patch_counts
        assert (
            comp.hier_counters.build_distance_evals
            == comp.mono_counters.build_distance_evals
        )
        assert comp.hier_counters.clustering_distance_evals > 0
        assert comp.mono_counters.clustering_distance_evals == 0

    def test_query_evals_shrink_with_routing(self, two_class_archive, default_cfg):
        comp = compare_monolithic(two_class_archive, default_cfg)
        assert comp.hier_counters.query_distance_evals < comp.mono_counters.query_distance_evals
        # per-record evals = grid cells x searched bank size
        cells = two_class_archive.patch_grid.grid_h * two_class_archive.patch_grid.grid_w
        n_test = len(two_class_archive.test_records())
        budget = lambda p: max(1, int(np.floor(default_cfg.ratio * p + 0.5)))  # noqa: E731
        hier_per_record = [cells * budget(p) for p in comp.hier_counters.patch_counts]
        assert comp.hier_counters.query_distance_evals <= n_test * max(hier_per_record)
        assert comp.hier_counters.query_distance_evals >= n_test * min(hier_per_record)
        mono_per_record = cells * budget(sum(comp.mono_counters.patch_counts))
        assert comp.mono_counters.query_distance_evals == n_test * mono_per_record

    def test_cost_ratio_approaches_one_over_k(self):
        for k in (2, 4):
            spec = separable_spec(
                n_classes=k, train_per_class=4, test_per_class=2,
                grid=(4, 4), image_size=(16, 16), semantic_dim=8, patch_dim=8,
            )
            archive = synth_generate(spec, seed=3)
            comp = compare_monolithic(archive, CoresetConfig(ratio=0.25, seed=0))
            assert len(comp.hier_counters.patch_counts) == k
            assert comp.build_ratio == pytest.approx(1 / k, rel=0.01)


class TestExportAndBench:
    def test_export_row_per_record(self, two_class_archive, default_cfg, tmp_path):
        bank = build(two_class_archive, default_cfg)
        out = tmp_path / "emb.csv"
        export_embeddings(two_class_archive, bank, out)
        with open(out) as f:
            rows = list(csv.reader(f))
        header, data = rows[0], rows[1:]
        assert header[:3] == ["id", "cluster", "class"]
        assert len(header) == 3 + two_class_archive.semantic_dim
        assert len(data) == len(two_class_archive.manifest)

    def test_export_roundtrip_assignments(self, two_class_archive, default_cfg, tmp_path):
        bank = build(two_class_archive, default_cfg)
        out = tmp_path / "emb.csv"
        export_embeddings(two_class_archive, bank, out)
        with open(out) as f:
            reader = csv.DictReader(f)
            parsed = {row["id"]: int(row["cluster"]) for row in reader}
        for i, rec in enumerate(two_class_archive.train_records()):
            assert parsed[rec.id] == bank.cluster_model.assignments[i]

    def test_bench_csv_columns(self, two_class_archive, default_cfg, tmp_path):
        rows = bench(two_class_archive, default_cfg, out_csv=tmp_path / "bench.csv")
        assert {r["scenario"] for r in rows} == {"hierarchical", "monolithic"}
        with open(tmp_path / "bench.csv") as f:
            reader = csv.DictReader(f)
            assert reader.fieldnames == [
                "scenario", "K", "P", "sum_pk_sq", "build_evals", "query_evals",
                "image_mF1_known", "image_mF1_unknown", "diff_ratio",
            ]
            assert len(list(reader)) == 2


class TestReportSerialization:
    def test_report_files(self, two_class_archive, default_cfg, tmp_path):
        import json

        rep = run_scenario(two_class_archive, Scenario.parse("uu"), default_cfg)
        rep.save(tmp_path)
        data = json.loads((tmp_path / "report.json").read_text())
        assert data["scenario"] == "U->U"
        assert "mad" in data["metrics"]["image_macro"]
        assert "timestamp" in data["provenance"]
        with open(tmp_path / "report.csv") as f:
            rows = list(csv.DictReader(f))
        assert {"group", "level", "metric", "value"} == set(rows[0].keys())
        macro_rows = [r for r in rows if r["group"] == "__macro__"]
        assert macro_rows

    def test_monolithic_bank_roundtrip(self, two_class_archive, default_cfg, tmp_path):
        from clusterbank import load, save, score_batch

        bank = build_monolithic(two_class_archive, default_cfg)
        save(bank, tmp_path / "mono.hcmb")
        back = load(tmp_path / "mono.hcmb")
        assert back.mode == "monolithic"
        r1, _ = score_batch(two_class_archive, bank)
        r2, _ = score_batch(two_class_archive, back)
        assert all(a.image_score == b.image_score for a, b in zip(r1, r2))
