"""End-to-end command-line pipeline: artifacts, overrides, locking, verify."""

import json
import os
import shutil

import pytest

from ristwin.cli import build_parser, config_digest, load_config, main


def tiny_config(out_dir) -> dict:
    return {
        "seed": 0,
        "out_dir": str(out_dir),
        "threads": 1,
        "scenario": {
            "tx_m": [-2.0, 1.5, 1.8],
            "ris": {
                "center_m": [0.0, 0.0, 1.2],
                "n1": 4,
                "n2": 4,
                "spacing_wavelengths": 0.5,
            },
            "rx_grid": {
                "origin_m": [-1.0, 0.8, 1.0],
                "rows": 6,
                "cols": 8,
                "pitch_m": 0.25,
            },
            "carrier_freq_hz": 3.5e9,
            "bandwidth_hz": 1.0e8,
            "n_subcarriers": 8,
            "snr_budget": 2.0e7,
        },
        "channel": {"m_clusters": 5, "n_scatterers": 16},
        "model": {
            "conv_filters": [2, 3],
            "kernel_size": 3,
            "fc_widths": [8],
            "dropout": 0.0,
            "batch_size": 64,
            "max_epochs": 2,
            "patience": None,
        },
        "train": {"size": 16, "val_frac": 0.1},
        "eval": {"baseline_trials": 10},
        "sweep": {"sizes": [8], "seeds": [0]},
    }


def write_config(path, cfg) -> str:
    path.write_text(json.dumps(cfg, indent=2))
    return str(path)


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """One full scenario->dataset->train->eval->sweep->report run."""
    root = tmp_path_factory.mktemp("cli_run")
    out = root / "out"
    cfg_file = write_config(root / "config.json", tiny_config(out))
    for cmd in ("scenario", "dataset", "train", "eval", "sweep", "report"):
        rc = main([cmd, "--config", cfg_file])
        assert rc == 0, f"{cmd} failed"
    return out, cfg_file


class TestPipeline:
    def test_artifacts_present(self, pipeline):
        out, _ = pipeline
        for name in (
            "scenario.json",
            "dataset.bin",
            "model.bin",
            "train_report.json",
            "eval_report.json",
            "sweep.json",
            "sweep.csv",
            "report.md",
            "run_meta.json",
            "manifest.json",
        ):
            assert (out / name).exists(), name

    def test_config_hash_and_seed_stamped_everywhere(self, pipeline):
        out, _ = pipeline
        meta = json.loads((out / "run_meta.json").read_text())
        assert len(meta["config_hash"]) == 64
        for name in ("train_report.json", "eval_report.json", "sweep.json"):
            data = json.loads((out / name).read_text())
            assert data["config_hash"] == meta["config_hash"], name
            assert data["seed"] == meta["seed"] == 0

    def test_verify_passes_on_intact_tree(self, pipeline, capsys):
        out, cfg_file = pipeline
        assert main(["verify", "--config", cfg_file]) == 0
        assert "verify OK" in capsys.readouterr().out

    def test_verify_fails_on_corruption(self, pipeline, tmp_path, capsys):
        out, cfg_file = pipeline
        clone = tmp_path / "clone"
        shutil.copytree(out, clone)
        blob = bytearray((clone / "dataset.bin").read_bytes())
        blob[len(blob) // 2] ^= 0xFF
        (clone / "dataset.bin").write_bytes(bytes(blob))
        rc = main(["verify", "--config", cfg_file, "--out", str(clone)])
        assert rc == 1
        assert "hash mismatch" in capsys.readouterr().err

    def test_verify_without_manifest_exits_2(self, tmp_path, capsys):
        cfg_file = write_config(tmp_path / "c.json", tiny_config(tmp_path / "empty"))
        (tmp_path / "empty").mkdir()
        assert main(["verify", "--config", cfg_file]) == 2
        assert "manifest" in capsys.readouterr().err

    def test_report_mentions_every_stage(self, pipeline):
        out, _ = pipeline
        text = (out / "report.md").read_text()
        for heading in ("## Scenario", "## Training", "## Evaluation", "## Sweep"):
            assert heading in text
        assert "reference" in text

    def test_eval_report_fields(self, pipeline):
        out, _ = pipeline
        data = json.loads((out / "eval_report.json").read_text())
        assert data["u_test"] == 6 * 8 - 16
        assert 0 <= data["top1_acc"] <= data["top3_acc"] <= 1
        assert "spread" in data["stability"]


class TestDeterminism:
    def test_rerun_is_byte_identical(self, tmp_path):
        blobs = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            cfg_file = write_config(tmp_path / f"{sub}.json", tiny_config(out))
            assert main(["scenario", "--config", cfg_file]) == 0
            assert main(["dataset", "--config", cfg_file]) == 0
            blobs.append(
                ((out / "scenario.json").read_bytes(), (out / "dataset.bin").read_bytes())
            )
        assert blobs[0][0] == blobs[1][0]
        assert blobs[0][1] == blobs[1][1]

    def test_seed_changes_dataset_bytes(self, tmp_path):
        blobs = []
        for seed in (0, 1):
            out = tmp_path / f"s{seed}"
            cfg_file = write_config(tmp_path / f"s{seed}.json", tiny_config(out))
            assert main(["dataset", "--config", cfg_file, "--seed", str(seed)]) == 0
            blobs.append((out / "dataset.bin").read_bytes())
        assert blobs[0] != blobs[1]


class TestConfigHandling:
    def parse(self, *argv):
        return build_parser().parse_args(list(argv))

    def test_missing_config_file_exits_2(self, tmp_path, capsys):
        assert main(["scenario", "--config", str(tmp_path / "nope.json")]) == 2
        assert "not found" in capsys.readouterr().err

    def test_invalid_json_exits_2(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        assert main(["scenario", "--config", str(p)]) == 2
        assert "JSON" in capsys.readouterr().err

    def test_missing_required_key_exits_2(self, tmp_path, capsys):
        cfg = tiny_config(tmp_path / "o")
        del cfg["model"]
        cfg_file = write_config(tmp_path / "c.json", cfg)
        assert main(["scenario", "--config", cfg_file]) == 2
        assert "'model'" in capsys.readouterr().err

    def test_missing_scenario_field_named_in_error(self, tmp_path, capsys):
        cfg = tiny_config(tmp_path / "o")
        del cfg["scenario"]["ris"]["n1"]
        cfg_file = write_config(tmp_path / "c.json", cfg)
        assert main(["scenario", "--config", cfg_file]) == 2
        assert "ris.n1" in capsys.readouterr().err

    def test_set_override_applies(self, tmp_path):
        out = tmp_path / "o"
        cfg_file = write_config(tmp_path / "c.json", tiny_config(out))
        rc = main(["scenario", "--config", cfg_file, "--set", "scenario.n_subcarriers=4"])
        assert rc == 0
        assert json.loads((out / "scenario.json").read_text())["n_subcarriers"] == 4

    def test_set_requires_equals(self, tmp_path, capsys):
        cfg_file = write_config(tmp_path / "c.json", tiny_config(tmp_path / "o"))
        assert main(["scenario", "--config", cfg_file, "--set", "noequals"]) == 2
        assert "--set" in capsys.readouterr().err

    def test_seed_flag_wins(self, tmp_path):
        out = tmp_path / "o"
        cfg_file = write_config(tmp_path / "c.json", tiny_config(out))
        assert main(["scenario", "--config", cfg_file, "--seed", "7"]) == 0
        assert json.loads((out / "scenario.json").read_text())["seed"] == 7

    def test_env_override(self, tmp_path, monkeypatch):
        out = tmp_path / "o"
        cfg_file = write_config(tmp_path / "c.json", tiny_config(out))
        monkeypatch.setenv("RISTWIN_SEED", "9")
        assert main(["scenario", "--config", cfg_file]) == 0
        assert json.loads((out / "scenario.json").read_text())["seed"] == 9

    def test_env_override_nested_key(self, tmp_path, monkeypatch):
        cfg_file = write_config(tmp_path / "c.json", tiny_config(tmp_path / "o"))
        monkeypatch.setenv("RISTWIN_MODEL__MAX_EPOCHS", "50")
        args = self.parse("train", "--config", cfg_file)
        cfg = load_config(args)
        assert cfg["model"]["max_epochs"] == 50

    def test_flag_beats_env(self, tmp_path, monkeypatch):
        cfg_file = write_config(tmp_path / "c.json", tiny_config(tmp_path / "o"))
        monkeypatch.setenv("RISTWIN_SEED", "9")
        cfg = load_config(self.parse("scenario", "--config", cfg_file, "--seed", "3"))
        assert cfg["seed"] == 3

    def test_digest_stable_under_key_order(self, tmp_path):
        cfg = tiny_config(tmp_path / "o")
        shuffled = json.loads(json.dumps(cfg))  # fresh dict, same content
        assert config_digest(cfg) == config_digest(shuffled)
        shuffled["seed"] = 1
        assert config_digest(cfg) != config_digest(shuffled)

    def test_digest_ignores_run_location(self, tmp_path):
        # relocated or re-threaded reruns must stay comparable by hash
        a = tiny_config(tmp_path / "a")
        b = tiny_config(tmp_path / "b")
        b["threads"] = 4
        assert config_digest(a) == config_digest(b)

    def test_default_config_used_without_file(self):
        cfg = load_config(self.parse("scenario"))
        assert cfg["scenario"]["ris"]["n1"] == 8
        assert cfg["out_dir"] == "runs/desk"

    def test_large_panel_config_parses(self, tmp_path):
        from ristwin.cli import _scenario_from

        cfg = tiny_config(tmp_path / "o")
        cfg["scenario"]["ris"]["n1"] = 16
        cfg["scenario"]["ris"]["n2"] = 16
        cfg["scenario"]["n_subcarriers"] = 512
        scenario = _scenario_from(cfg)
        assert scenario.ris.n_elements == 256
        assert scenario.n_subcarriers == 512
        assert scenario.hash() == _scenario_from(cfg).hash()


class TestGuards:
    def test_eval_without_model_exits_2(self, tmp_path, capsys):
        out = tmp_path / "o"
        cfg_file = write_config(tmp_path / "c.json", tiny_config(out))
        assert main(["dataset", "--config", cfg_file]) == 0
        assert main(["eval", "--config", cfg_file]) == 2
        assert "model.bin" in capsys.readouterr().err

    def test_train_without_dataset_exits_2(self, tmp_path, capsys):
        cfg_file = write_config(tmp_path / "c.json", tiny_config(tmp_path / "o"))
        assert main(["train", "--config", cfg_file]) == 2
        assert "dataset.bin" in capsys.readouterr().err

    def test_live_lock_exits_2(self, tmp_path, capsys):
        out = tmp_path / "o"
        out.mkdir()
        (out / ".lock").write_text(str(os.getpid()))  # this very process: alive
        cfg_file = write_config(tmp_path / "c.json", tiny_config(out))
        assert main(["scenario", "--config", cfg_file]) == 2
        assert "locked" in capsys.readouterr().err

    def test_stale_lock_reclaimed(self, tmp_path):
        out = tmp_path / "o"
        out.mkdir()
        (out / ".lock").write_text("999999999")  # pid space exhausted long before this
        cfg_file = write_config(tmp_path / "c.json", tiny_config(out))
        assert main(["scenario", "--config", cfg_file]) == 0

    def test_threads_flag_sets_blas_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("OPENBLAS_NUM_THREADS", "sentinel")
        cfg_file = write_config(tmp_path / "c.json", tiny_config(tmp_path / "o"))
        assert main(["scenario", "--config", cfg_file, "--threads", "2"]) == 0
        assert os.environ["OPENBLAS_NUM_THREADS"] == "2"
        assert os.environ["OMP_NUM_THREADS"] == "2"
