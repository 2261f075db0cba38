import json

import pytest

from conftest import manifest_line, pair_features, write_feature_file
from iuseg_adapter.errors import DataError
from iuseg_adapter.model import ModelConfig
from iuseg_adapter.recipe import TrainRecipe
from iuseg_adapter.train import finetune, load_checkpoint

TINY_MODEL = ModelConfig(d_model=16, n_heads=2, encoder_layers=1, decoder_layers=1, ff_dim=32)
TINY_RECIPE = TrainRecipe(total_steps=3, warmup_steps=2, peak_lr=1e-3, batch_size=2,
                          grad_accumulation=2, seed=1)


def _write_pairs(tmp_path, texts):
    lines = []
    for i, text in enumerate(texts):
        fp = tmp_path / f"pair{i:02d}.bin"
        write_feature_file(fp, pair_features(i, frames=32))
        lines.append(manifest_line(i, text, str(fp)))
    p = tmp_path / "m.jsonl"
    p.write_text("\n".join(lines) + "\n")
    return p


class TestFinetune:
    def test_log_has_one_row_per_step_with_scheduled_lr(self, tmp_path):
        manifest = _write_pairs(tmp_path, ["a b !!!!!", "c d !!!!!"])
        ckpt = finetune(manifest, tmp_path / "ckpt", TINY_RECIPE, model_config=TINY_MODEL)
        header, *rows = (ckpt / "training_log.csv").read_text().strip().splitlines()
        assert header == "step,loss,lr"
        assert len(rows) == TINY_RECIPE.total_steps
        for n, row in enumerate(rows, start=1):
            step, loss, lr = row.split(",")
            assert int(step) == n
            assert float(loss) > 0.0
            assert float(lr) == pytest.approx(TINY_RECIPE.lr_at(n), abs=1e-12)

    def test_checkpoint_contents_and_reload(self, tmp_path):
        manifest = _write_pairs(tmp_path, ["a b !!!!!", "c d !!!!!"])
        ckpt = finetune(manifest, tmp_path / "ckpt", TINY_RECIPE, model_config=TINY_MODEL)
        for name in ("model.pt", "vocab.json", "model_config.json", "recipe.json",
                     "meta.json", "training_log.csv"):
            assert (ckpt / name).exists()
        assert not list(ckpt.glob("*.tmp"))
        meta = json.loads((ckpt / "meta.json").read_text())
        assert meta["variant"] == "full"
        assert meta["optimizer"] == "adamw"
        model, tok = load_checkpoint(ckpt)
        assert model.config == TINY_MODEL
        assert tok.vocab[tok.marker_id] == "!!!!!"

    def test_acoustic_variant_recorded(self, tmp_path):
        manifest = _write_pairs(tmp_path, ["word word !!!!!", "word !!!!!"])
        ckpt = finetune(manifest, tmp_path / "ck", TINY_RECIPE, variant="acoustic",
                        model_config=TINY_MODEL)
        assert json.loads((ckpt / "meta.json").read_text())["variant"] == "acoustic"

    def test_unknown_variant_rejected(self, tmp_path):
        manifest = _write_pairs(tmp_path, ["a !!!!!"])
        with pytest.raises(DataError, match="variant"):
            finetune(manifest, tmp_path / "ck", TINY_RECIPE, variant="both")

    def test_missing_targets_fail_before_training(self, tmp_path):
        lines = [manifest_line(0, "a b !!!!!", "f.bin"), manifest_line(1, None, "f.bin")]
        manifest = tmp_path / "m.jsonl"
        manifest.write_text("\n".join(lines) + "\n")
        out = tmp_path / "ckpt"
        with pytest.raises(DataError, match="target_text"):
            finetune(manifest, out, TINY_RECIPE, model_config=TINY_MODEL)
        assert not out.exists()  # nothing was written

    def test_empty_manifest_rejected(self, tmp_path):
        manifest = tmp_path / "m.jsonl"
        manifest.write_text("")
        with pytest.raises(DataError, match="no records"):
            finetune(manifest, tmp_path / "ckpt", TINY_RECIPE, model_config=TINY_MODEL)

    def test_same_seed_same_log(self, tmp_path):
        manifest = _write_pairs(tmp_path, ["a b !!!!!", "c d !!!!!"])
        a = finetune(manifest, tmp_path / "a", TINY_RECIPE, model_config=TINY_MODEL)
        b = finetune(manifest, tmp_path / "b", TINY_RECIPE, model_config=TINY_MODEL)
        assert (a / "training_log.csv").read_bytes() == (b / "training_log.csv").read_bytes()
        assert (a / "vocab.json").read_bytes() == (b / "vocab.json").read_bytes()
