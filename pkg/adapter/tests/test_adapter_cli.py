import json

from conftest import manifest_line, pair_features, write_feature_file
from iuseg_adapter import cli


def _stderr_kind(capsys):
    return json.loads(capsys.readouterr().err.strip())["error"]


class TestUsage:
    def test_unknown_subcommand(self, capsys):
        assert cli.main(["frobnicate"]) == 1
        assert _stderr_kind(capsys) == "usage"

    def test_missing_required_flag(self, capsys):
        assert cli.main(["finetune", "--out", "x"]) == 1
        assert _stderr_kind(capsys) == "usage"

    def test_lexical_segment_is_stubbed(self, capsys):
        assert cli.main(["lexical-segment"]) == 1
        err = json.loads(capsys.readouterr().err.strip())
        assert "not implemented" in err["message"]


class TestFinetuneCommand:
    def test_missing_targets_is_data_error(self, tmp_path, capsys):
        manifest = tmp_path / "m.jsonl"
        manifest.write_text(manifest_line(0, None, "f.bin") + "\n")
        rc = cli.main(["finetune", "--manifest", str(manifest), "--out", str(tmp_path / "ck")])
        assert rc == 2
        assert _stderr_kind(capsys) == "data"

    def test_small_run_writes_checkpoint(self, tmp_path, capsys):
        fp = tmp_path / "f.bin"
        write_feature_file(fp, pair_features(0, frames=32))
        manifest = tmp_path / "m.jsonl"
        manifest.write_text(manifest_line(0, "a b !!!!!", str(fp)) + "\n")
        rc = cli.main([
            "finetune", "--manifest", str(manifest), "--out", str(tmp_path / "ck"),
            "--steps", "2", "--warmup", "1", "--batch-size", "1",
            "--grad-accumulation", "1", "--d-model", "16", "--n-heads", "2",
            "--layers", "1",
        ])
        assert rc == 0
        assert "optimizer=adamw" in capsys.readouterr().out
        assert (tmp_path / "ck" / "model.pt").exists()


class TestTranscribeCommand:
    def test_empty_manifest_gives_empty_file(self, tmp_path, overfit_ckpt):
        manifest = tmp_path / "m.jsonl"
        manifest.write_text("")
        out = tmp_path / "hyp.tsv"
        rc = cli.main([
            "transcribe", "--checkpoint", str(overfit_ckpt),
            "--manifest", str(manifest), "--out", str(out),
        ])
        assert rc == 0
        assert out.read_text() == ""
        assert not out.with_name(out.name + ".errors").exists()

    def test_bad_record_goes_to_sidecar_and_run_continues(self, tmp_path, pair_set, overfit_ckpt):
        root, _ = pair_set
        good = root / "features" / "pair00.bin"
        manifest = tmp_path / "m.jsonl"
        manifest.write_text(
            manifest_line(0, "x", str(good)) + "\n"
            + manifest_line(1, "y", str(tmp_path / "missing.bin")) + "\n"
        )
        out = tmp_path / "hyp.tsv"
        rc = cli.main([
            "transcribe", "--checkpoint", str(overfit_ckpt),
            "--manifest", str(manifest), "--out", str(out),
        ])
        assert rc == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 1
        assert lines[0].startswith("pair00\t")
        sidecar = out.with_name(out.name + ".errors").read_text()
        assert "pair01" in sidecar

    def test_missing_checkpoint_is_data_error(self, tmp_path, capsys):
        manifest = tmp_path / "m.jsonl"
        manifest.write_text("")
        rc = cli.main([
            "transcribe", "--checkpoint", str(tmp_path / "nope"),
            "--manifest", str(manifest), "--out", str(tmp_path / "h.tsv"),
        ])
        assert rc == 2
        assert _stderr_kind(capsys) == "data"
