import json

import pytest

from qdgen.cli import EXIT_BACKEND, EXIT_CONFIG, EXIT_DATA, EXIT_OK, build_parser, main
from qdgen.persist import read_json, sha256_file

BASE_CONFIG = """
[run]
root_seed = 7
rounds = 6
batch_size = 4
policy = "{policy}"
working_set_cap = 32
checkpoint_every = 3
seed_dataset = "{seeds}"
out_dir = "{out_dir}"

[quality]
k_rollouts = 8
lower = 0.1
upper = 0.9

[skills]
max_labels = 3
vocabulary_size = 100

[gateway]
backend = "sim"
"""


def write_config(tmp_path, policy="dynamic_diverse", name="run.toml", out_name="run-out"):
    seeds = tmp_path / "seeds.jsonl"
    out_dir = tmp_path / out_name
    config = tmp_path / name
    config.write_text(
        BASE_CONFIG.format(policy=policy, seeds=seeds, out_dir=out_dir)
    )
    return config, seeds, out_dir


@pytest.fixture
def generated_run(tmp_path):
    config, seeds, out_dir = write_config(tmp_path)
    assert main(["make-sim-seed", "--count", "12", "--seed", "3", "--out", str(seeds)]) == EXIT_OK
    assert main(["generate", "--config", str(config)]) == EXIT_OK
    return config, seeds, out_dir


class TestGenerate:
    def test_happy_path_writes_everything(self, generated_run):
        _, _, out_dir = generated_run
        for name in ("archive.jsonl", "manifest.json", "checkpoint.json", "vocabulary.txt"):
            assert (out_dir / name).exists()
        manifest = read_json(out_dir / "manifest.json")
        assert manifest["completed"] is True
        assert manifest["counters"]["rounds_completed"] == 6

    def test_missing_seed_file_exits_2(self, tmp_path, capsys):
        config, seeds, _ = write_config(tmp_path)
        assert main(["generate", "--config", str(config)]) == EXIT_CONFIG
        assert "seed dataset not found" in capsys.readouterr().err

    def test_invalid_config_exits_2_with_diagnostics(self, tmp_path, capsys):
        config, seeds, out = write_config(tmp_path, policy="freestyle")
        main(["make-sim-seed", "--count", "4", "--seed", "1", "--out", str(seeds)])
        assert main(["generate", "--config", str(config)]) == EXIT_CONFIG
        assert "policy" in capsys.readouterr().err

    def test_missing_config_file_exits_2(self, tmp_path):
        assert main(["generate", "--config", str(tmp_path / "nope.toml")]) == EXIT_CONFIG

    def test_rerun_reproduces_archive_hash(self, tmp_path):
        config, seeds, out_dir = write_config(tmp_path)
        main(["make-sim-seed", "--count", "12", "--seed", "3", "--out", str(seeds)])
        assert main(["generate", "--config", str(config)]) == EXIT_OK
        first = sha256_file(out_dir / "archive.jsonl")
        assert main(["generate", "--config", str(config)]) == EXIT_OK
        assert sha256_file(out_dir / "archive.jsonl") == first

    def test_resume_without_checkpoint_exits_4(self, tmp_path, capsys):
        config, seeds, _ = write_config(tmp_path)
        main(["make-sim-seed", "--count", "4", "--seed", "1", "--out", str(seeds)])
        assert main(["generate", "--config", str(config), "--resume"]) == EXIT_DATA


class TestFilter:
    def test_filter_writes_dataset_and_manifest(self, generated_run, tmp_path):
        _, _, out_dir = generated_run
        out = tmp_path / "qd.jsonl"
        code = main([
            "filter", "--archive", str(out_dir), "--strategy", "qd",
            "--budget", "5", "--seed", "2", "--out", str(out),
        ])
        assert code == EXIT_OK
        rows = [json.loads(line) for line in out.read_text().splitlines()]
        assert len(rows) == 5
        manifest = read_json(tmp_path / "qd.jsonl.manifest.json")
        assert manifest["output"]["sha256"] == sha256_file(out)
        assert manifest["spec"]["strategy"] == "qd"

    def test_budget_zero_rejected_by_parser(self, generated_run, tmp_path):
        _, _, out_dir = generated_run
        with pytest.raises(SystemExit) as info:
            main([
                "filter", "--archive", str(out_dir), "--strategy", "random",
                "--budget", "0", "--seed", "1", "--out", str(tmp_path / "x.jsonl"),
            ])
        assert info.value.code == 2

    def test_budget_over_pool_exits_4_with_count(self, generated_run, tmp_path, capsys):
        _, _, out_dir = generated_run
        code = main([
            "filter", "--archive", str(out_dir), "--strategy", "random",
            "--budget", "100000", "--seed", "1", "--out", str(tmp_path / "x.jsonl"),
        ])
        assert code == EXIT_DATA
        assert "distinct problems available" in capsys.readouterr().err

    def test_quality_strategy_requires_mean(self, generated_run, tmp_path, capsys):
        _, _, out_dir = generated_run
        code = main([
            "filter", "--archive", str(out_dir), "--strategy", "quality",
            "--budget", "4", "--seed", "1", "--out", str(tmp_path / "x.jsonl"),
        ])
        assert code == EXIT_CONFIG

    def test_all_pairs_with_easy_keep(self, generated_run, tmp_path):
        _, _, out_dir = generated_run
        out = tmp_path / "all.jsonl"
        code = main([
            "filter", "--archive", str(out_dir), "--strategy", "random",
            "--pairs", "all", "--easy-keep", "0.25", "--budget", "5",
            "--seed", "2", "--out", str(out),
        ])
        assert code == EXIT_OK

    def test_missing_archive_exits_4(self, tmp_path):
        code = main([
            "filter", "--archive", str(tmp_path / "nowhere"), "--strategy", "random",
            "--budget", "1", "--seed", "1", "--out", str(tmp_path / "x.jsonl"),
        ])
        assert code == EXIT_DATA


class TestAnalyze:
    @pytest.mark.parametrize("report,extra", [
        ("coverage", ["--stride", "10"]),
        ("histogram", []),
    ])
    def test_offline_reports(self, generated_run, tmp_path, report, extra):
        _, _, out_dir = generated_run
        out = tmp_path / f"{report}.csv"
        code = main(["analyze", "--archive", str(out_dir), "--report", report, "--out", str(out)] + extra)
        assert code == EXIT_OK
        lines = out.read_text().splitlines()
        assert len(lines) >= 2

    def test_histogram_has_k_plus_one_buckets(self, generated_run, tmp_path):
        _, _, out_dir = generated_run
        out = tmp_path / "hist.csv"
        main(["analyze", "--archive", str(out_dir), "--report", "histogram", "--out", str(out)])
        assert len(out.read_text().splitlines()) == 1 + 9  # header + K=8 buckets

    def test_validity_requires_config(self, generated_run, tmp_path, capsys):
        _, _, out_dir = generated_run
        code = main([
            "analyze", "--archive", str(out_dir), "--report", "validity",
            "--out", str(tmp_path / "v.csv"),
        ])
        assert code == EXIT_CONFIG
        assert "oracle" in capsys.readouterr().err

    def test_validity_with_sim_oracle(self, generated_run, tmp_path):
        config, _, out_dir = generated_run
        out = tmp_path / "v.csv"
        code = main([
            "analyze", "--archive", str(out_dir), "--report", "validity",
            "--config", str(config), "--count", "20", "--bins", "4",
            "--out", str(out),
        ])
        assert code == EXIT_OK

    def test_perturbation_report(self, generated_run, tmp_path):
        config, _, out_dir = generated_run
        out = tmp_path / "p.csv"
        code = main([
            "analyze", "--archive", str(out_dir), "--report", "perturbation",
            "--config", str(config), "--count", "2", "--n", "3",
            "--out", str(out),
        ])
        assert code == EXIT_OK
        lines = out.read_text().splitlines()
        assert len(lines) == 3  # header + 2 parents

    def test_unknown_report_rejected_by_parser(self, generated_run, tmp_path):
        _, _, out_dir = generated_run
        with pytest.raises(SystemExit) as info:
            main(["analyze", "--archive", str(out_dir), "--report", "novelty", "--out", "x.csv"])
        assert info.value.code == 2

    def test_report_manifest_hash_matches(self, generated_run, tmp_path):
        _, _, out_dir = generated_run
        out = tmp_path / "hist.csv"
        main(["analyze", "--archive", str(out_dir), "--report", "histogram", "--out", str(out)])
        manifest = read_json(tmp_path / "hist.csv.manifest.json")
        assert manifest["output"]["sha256"] == sha256_file(out)


class TestBackendFailureExit:
    def test_dead_remote_exits_3(self, tmp_path, capsys):
        seeds = tmp_path / "seeds.jsonl"
        main(["make-sim-seed", "--count", "4", "--seed", "1", "--out", str(seeds)])
        config = tmp_path / "remote.toml"
        config.write_text(
            f"""
[run]
rounds = 2
batch_size = 2
seed_dataset = "{seeds}"
out_dir = "{tmp_path / 'out'}"

[gateway]
backend = "remote"

[gateway.remote]
base_url = "http://127.0.0.1:1/v1"
max_retries = 0
timeout = 0.2

[gateway.remote.models]
generator = "m"
student = "m"
skill_classifier = "m"
validity_oracle = "m"
"""
        )
        assert main(["generate", "--config", str(config)]) == EXIT_BACKEND
        assert "backend error" in capsys.readouterr().err


class TestMakeSimSeed:
    def test_writes_loadable_seeds(self, tmp_path):
        out = tmp_path / "seeds.jsonl"
        assert main(["make-sim-seed", "--count", "9", "--seed", "1", "--out", str(out)]) == EXIT_OK
        from qdgen.config import load_seed_samples

        assert len(load_seed_samples(out)) == 9


def test_parser_requires_subcommand():
    with pytest.raises(SystemExit) as info:
        build_parser().parse_args([])
    assert info.value.code == 2
