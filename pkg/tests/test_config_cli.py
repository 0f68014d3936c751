"""Config parsing/digests and the CLI commands end to end (tiny settings)."""

import numpy as np
import pytest

from hoilab.cli import main
from hoilab.config import RunConfig, load_config
from hoilab.errors import ConfigError, ParseError

TINY = [
    "--set", "train_scenes=6",
    "--set", "eval_scenes=4",
    "--set", "epochs=1",
    "--set", "image_size=32",
    "--set", "patch_size=8",
    "--set", "embed_dim=32",
    "--set", "layers=2",
    "--set", "adapter_dim=8",
    "--set", "adapter_heads=2",
    "--set", "n_queries=2",
    "--set", "kernel_sizes=1,3",
    "--set", "text_dim=8",
    "--set", "det_dim=8",
    "--set", "roi_size=2",
    "--set", "split_k=2",
    "--set", "val_fraction=0.34",
]


class TestLoadConfig:
    def test_empty_file_gives_defaults_and_stable_digest(self, tmp_path):
        path = tmp_path / "empty.cfg"
        path.write_text("")
        cfg = load_config(path)
        assert cfg == RunConfig()
        assert cfg.digest() == RunConfig().digest()

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("learning_rate=0.1\n")
        with pytest.raises(ConfigError, match="learning_rate"):
            load_config(path)

    def test_type_mismatch_reports_line(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("# comment\nepochs=ten\n")
        with pytest.raises(ParseError, match="line 2"):
            load_config(path)

    def test_override_last_wins(self):
        cfg = load_config(None, ["lr=0.01", "lr=0.02"])
        assert cfg.lr == 0.02

    def test_digest_canonical_across_key_order(self, tmp_path):
        a = tmp_path / "a.cfg"
        b = tmp_path / "b.cfg"
        a.write_text("epochs=3\nlr=0.002\n")
        b.write_text("lr=2e-3\nepochs=3\n")
        assert load_config(a).digest() == load_config(b).digest()

    def test_path_keys_do_not_change_digest(self):
        base = load_config(None, ["epochs=2"])
        moved = load_config(None, ["epochs=2", "run_dir=/tmp/xyz", "data=/tmp/d.scenes"])
        assert base.digest() == moved.digest()
        changed = load_config(None, ["epochs=3"])
        assert base.digest() != changed.digest()

    def test_bool_and_list_parsing(self):
        cfg = load_config(None, ["use_locality=false", "kernel_sizes=1,5", "objects=person,dog"])
        assert cfg.use_locality is False
        assert cfg.kernel_sizes == (1, 5)
        assert cfg.objects == ("person", "dog")

    def test_config_file_round_trip(self, tmp_path):
        cfg = load_config(None, ["epochs=7", "kernel_sizes=1,3"])
        path = tmp_path / "resolved.cfg"
        cfg.write(path)
        again = load_config(path)
        assert again == cfg


class TestCliCommands:
    def test_unknown_override_exits_2(self, capsys):
        assert main(["gen", "--set", "nonsense=1"]) == 2
        assert "nonsense" in capsys.readouterr().err

    def test_gen_train_eval_pipeline(self, tmp_path, capsys):
        gen_dir = tmp_path / "gen"
        assert main(["gen", *TINY, "--set", f"run_dir={gen_dir}"]) == 0
        assert (gen_dir / "train.scenes").exists()
        assert (gen_dir / "eval.scenes").exists()

        train_dir = tmp_path / "train"
        assert (
            main(
                [
                    "train",
                    *TINY,
                    "--set", f"data={gen_dir / 'train.scenes'}",
                    "--set", f"run_dir={train_dir}",
                ]
            )
            == 0
        )
        assert (train_dir / "checkpoint.ckpt").exists()
        assert (train_dir / "train_log.csv").exists()
        assert (train_dir / "loss_curve.png").exists()
        assert (train_dir / "split.txt").exists()
        log = (train_dir / "train_log.csv").read_text().splitlines()
        assert log[0] == "epoch,mean_loss,val_map_seen,val_map_unseen,wall_seconds"
        assert len(log) == 2  # header + one epoch

        eval_dir = tmp_path / "eval"
        assert (
            main(
                [
                    "eval",
                    *TINY,
                    "--set", f"eval_data={gen_dir / 'eval.scenes'}",
                    "--set", f"checkpoint={train_dir / 'checkpoint.ckpt'}",
                    "--set", f"run_dir={eval_dir}",
                ]
            )
            == 0
        )
        assert (eval_dir / "report.csv").exists()
        assert (eval_dir / "report.json").exists()
        assert (eval_dir / "report_ap.png").exists()
        out = capsys.readouterr().out
        assert "mAP" in out

    def test_digest_mismatch_refused_then_forced(self, tmp_path, capsys):
        gen_dir = tmp_path / "gen"
        assert main(["gen", *TINY, "--set", f"run_dir={gen_dir}"]) == 0
        # a different epochs value changes the digest
        rc = main(
            [
                "train",
                *TINY,
                "--set", "epochs=2",
                "--set", f"data={gen_dir / 'train.scenes'}",
                "--set", f"run_dir={tmp_path / 't'}",
            ]
        )
        assert rc == 2
        assert "digest" in capsys.readouterr().err
        rc = main(
            [
                "train",
                *TINY,
                "--set", "epochs=2",
                "--set", "force_digest=true",
                "--set", f"data={gen_dir / 'train.scenes'}",
                "--set", f"run_dir={tmp_path / 't2'}",
            ]
        )
        assert rc == 0

    def test_missing_data_path_exits_2(self, capsys):
        assert main(["train", *TINY]) == 2
        assert "data" in capsys.readouterr().err

    def test_oracle_command(self, capsys):
        assert main(["oracle"]) == 0
        out = capsys.readouterr().out
        assert "PASS" in out and "FAIL" not in out

    def test_ablate_writes_four_rows(self, tmp_path):
        run_dir = tmp_path / "ablate"
        rc = main(
            [
                "ablate",
                *TINY,
                "--set", "ablate_seeds=1",
                "--set", f"run_dir={run_dir}",
            ]
        )
        assert rc == 0
        lines = (run_dir / "ablation.csv").read_text().splitlines()
        assert lines[1] == "locality,interaction,unseen,seen,full"
        rows = lines[2:]
        assert len(rows) == 4
        flags = [tuple(r.split(",")[:2]) for r in rows]
        assert flags == [("no", "no"), ("yes", "no"), ("no", "yes"), ("yes", "yes")]
        assert (run_dir / "ablation.png").exists()
        assert (run_dir / "ablation_seeds.csv").exists()
