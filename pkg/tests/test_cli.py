import json
import subprocess
import sys

import pytest

from clusterbank.cli import main


def run(args):
    return main(list(args))


def synth_archive(path, classes=2, seed=7, extra=()):
    code = run(
        ["synth", "--classes", str(classes), "--seed", str(seed),
         "--train-per-class", "8", "--test-per-class", "6", "-o", str(path), *extra]
    )
    assert code == 0
    return path


def strip_timestamp(raw: bytes) -> bytes:
    return b"\n".join(l for l in raw.splitlines() if b"timestamp" not in l)


class TestPipeline:
    def test_synth_build_eval(self, tmp_path):
        arch = synth_archive(tmp_path / "a")
        assert run(["build", "-a", str(arch), "-o", str(tmp_path / "b")]) == 0
        assert (tmp_path / "b" / "manifest.json").is_file()
        assert run(
            ["eval", "-a", str(arch), "-b", str(tmp_path / "b"),
             "--scenario", "uu", "-o", str(tmp_path / "r")]
        ) == 0
        report = json.loads((tmp_path / "r" / "report.json").read_text())
        assert "mad" in report["metrics"]["image_macro"]
        assert (tmp_path / "r" / "report.csv").is_file()

    def test_cluster_command(self, tmp_path):
        arch = synth_archive(tmp_path / "a")
        assert run(["cluster", "-a", str(arch), "-o", str(tmp_path / "c")]) == 0
        model = json.loads((tmp_path / "c" / "cluster_model.json").read_text())
        assert model["n_clusters"] == 2

    def test_score_command(self, tmp_path):
        arch = synth_archive(tmp_path / "a")
        run(["build", "-a", str(arch), "-o", str(tmp_path / "b")])
        assert run(
            ["score", "-a", str(arch), "-b", str(tmp_path / "b"), "-o", str(tmp_path / "s")]
        ) == 0
        lines = (tmp_path / "s" / "scores.jsonl").read_text().strip().splitlines()
        assert len(lines) == 12  # 2 classes x 6 test records

    def test_bench_command(self, tmp_path):
        arch = synth_archive(tmp_path / "a")
        assert run(["bench", "-a", str(arch), "-o", str(tmp_path / "out")]) == 0
        text = (tmp_path / "out" / "bench.csv").read_text()
        assert text.startswith("scenario,K,P,sum_pk_sq,build_evals,query_evals")

    def test_export_command(self, tmp_path):
        arch = synth_archive(tmp_path / "a")
        run(["build", "-a", str(arch), "-o", str(tmp_path / "b")])
        assert run(
            ["export", "-a", str(arch), "-b", str(tmp_path / "b"), "-o", str(tmp_path / "e")]
        ) == 0
        lines = (tmp_path / "e" / "embeddings.csv").read_text().strip().splitlines()
        assert len(lines) == 1 + 28  # header + 2*(8+6) records


class TestErrors:
    def test_bad_ratio_exit_3(self, tmp_path):
        arch = synth_archive(tmp_path / "a")
        assert run(["build", "-a", str(arch), "--ratio", "0", "-o", str(tmp_path / "b")]) == 3

    def test_kk_on_unlabeled_archive_names_scenario(self, tmp_path, capsys):
        arch = synth_archive(tmp_path / "a")
        manifest = json.loads((arch / "manifest.json").read_text())
        for rec in manifest["records"]:
            rec["class_label"] = None
        (arch / "manifest.json").write_text(json.dumps(manifest))
        code = run(["eval", "-a", str(arch), "--scenario", "kk", "-o", str(tmp_path / "r")])
        assert code == 3
        err = capsys.readouterr().err
        assert "K->K" in err and "error: validation" in err

    def test_missing_archive_exit_3(self, tmp_path):
        assert run(["cluster", "-a", str(tmp_path / "nope"), "-o", str(tmp_path / "c")]) == 3

    def test_empty_bank_path_exit_4(self, tmp_path):
        arch = synth_archive(tmp_path / "a")
        assert run(["build", "-a", str(arch), "-o", ""]) == 4

    def test_usage_error_exit_2(self):
        proc = subprocess.run(
            [sys.executable, "-m", "clusterbank.cli", "build", "--bogus-flag"],
            capture_output=True,
        )
        assert proc.returncode == 2

    def test_mismatched_bank_mode_exit_3(self, tmp_path):
        arch = synth_archive(tmp_path / "a")
        run(["build", "-a", str(arch), "--mode", "pseudo", "-o", str(tmp_path / "b")])
        code = run(
            ["eval", "-a", str(arch), "-b", str(tmp_path / "b"),
             "--scenario", "kk", "-o", str(tmp_path / "r")]
        )
        assert code == 3


class TestDeterminism:
    def test_identical_runs_identical_reports(self, tmp_path):
        arch = synth_archive(tmp_path / "a")
        for name in ("r1", "r2"):
            assert run(
                ["eval", "-a", str(arch), "--scenario", "uu", "--seed", "5",
                 "-o", str(tmp_path / name)]
            ) == 0
        b1 = strip_timestamp((tmp_path / "r1" / "report.json").read_bytes())
        b2 = strip_timestamp((tmp_path / "r2" / "report.json").read_bytes())
        assert b1 == b2

    def test_threads_do_not_change_output(self, tmp_path):
        arch = synth_archive(tmp_path / "a")
        for name, threads in (("r1", "1"), ("r4", "4")):
            assert run(
                ["eval", "-a", str(arch), "--scenario", "uu", "--threads", threads,
                 "-o", str(tmp_path / name)]
            ) == 0
        # numerical output must be identical; only the echoed flag may differ
        r1 = json.loads((tmp_path / "r1" / "report.json").read_text())
        r4 = json.loads((tmp_path / "r4" / "report.json").read_text())
        assert json.dumps(r1["metrics"], sort_keys=True) == json.dumps(
            r4["metrics"], sort_keys=True
        )
        assert r1["counters"] == r4["counters"]

    def test_synth_deterministic_across_runs(self, tmp_path):
        synth_archive(tmp_path / "a1", seed=3)
        synth_archive(tmp_path / "a2", seed=3)
        m1 = (tmp_path / "a1" / "manifest.json").read_bytes()
        m2 = (tmp_path / "a2" / "manifest.json").read_bytes()
        assert m1 == m2


class TestConfigPrecedence:
    def test_config_file_sets_defaults_flags_win(self, tmp_path):
        arch = synth_archive(tmp_path / "a")
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"ratio": 0.5, "seed": 9}))
        # config value applies
        assert run(
            ["build", "-a", str(arch), "--config", str(cfg), "-o", str(tmp_path / "b1")]
        ) == 0
        m1 = json.loads((tmp_path / "b1" / "manifest.json").read_text())
        assert m1["coreset_ratio"] == 0.5 and m1["coreset_seed"] == 9
        # explicit flag beats config
        assert run(
            ["build", "-a", str(arch), "--config", str(cfg), "--ratio", "0.2",
             "-o", str(tmp_path / "b2")]
        ) == 0
        m2 = json.loads((tmp_path / "b2" / "manifest.json").read_text())
        assert m2["coreset_ratio"] == 0.2 and m2["coreset_seed"] == 9

    def test_env_var_default_output(self, tmp_path, monkeypatch):
        arch = synth_archive(tmp_path / "a")
        monkeypatch.setenv("CLUSTERBANK_OUT", str(tmp_path / "envout"))
        assert run(["cluster", "-a", str(arch)]) == 0
        assert (tmp_path / "envout" / "cluster_model.json").is_file()

    def test_flags_echoed_in_provenance(self, tmp_path):
        arch = synth_archive(tmp_path / "a")
        assert run(
            ["eval", "-a", str(arch), "--scenario", "uu", "--ratio", "0.15",
             "--seed", "3", "--threads", "2", "-o", str(tmp_path / "r")]
        ) == 0
        report = json.loads((tmp_path / "r" / "report.json").read_text())
        prov = report["provenance"]
        assert prov["coreset_ratio"] == 0.15
        assert prov["seed"] == 3
        assert prov["threads"] == 2


class TestScoreMaps:
    def test_save_maps_blobs(self, tmp_path):
        from clusterbank.archive import read_blob

        arch = synth_archive(tmp_path / "a")
        run(["build", "-a", str(arch), "-o", str(tmp_path / "b")])
        assert run(
            ["score", "-a", str(arch), "-b", str(tmp_path / "b"),
             "--save-maps", "-o", str(tmp_path / "s")]
        ) == 0
        maps = sorted((tmp_path / "s" / "maps").iterdir())
        assert len(maps) == 12
        m = read_blob(maps[0])
        assert m.shape == (64, 64)

    def test_truncated_blob_is_validation_error(self, tmp_path):
        arch = synth_archive(tmp_path / "a")
        victim = next((arch / "blobs").glob("*.sem"))
        victim.write_bytes(victim.read_bytes()[:6])  # cut inside the header
        assert run(["cluster", "-a", str(arch), "-o", str(tmp_path / "c")]) == 3
