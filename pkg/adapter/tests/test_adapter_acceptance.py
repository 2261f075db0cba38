"""Acceptance gate for the adapter: the overfit/memorization property, the
warmup schedule, and the file contract with the segmentation toolkit."""

from conftest import TARGETS
from iuseg_adapter.infer import transcribe
from iuseg_adapter.recipe import TrainRecipe
from iuseg_adapter.train import finetune

from iuseg import cli as toolkit_cli
from iuseg.evaluate import EvalReport
from iuseg.targets import extract_boundaries


def _read_hyps(path):
    out = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        chunk_id, text = line.split("\t", 1)
        out[chunk_id] = text
    return out


def test_overfit_reduces_loss_and_memorizes(pair_set, overfit_ckpt, tmp_path):
    _, manifest = pair_set
    rows = (overfit_ckpt / "training_log.csv").read_text().strip().splitlines()[1:]
    assert len(rows) == 50
    initial = float(rows[0].split(",")[1])
    final = float(rows[-1].split(",")[1])
    assert final < 0.5 * initial

    hyp = tmp_path / "hyp.tsv"
    errors = transcribe(overfit_ckpt, manifest, hyp)
    assert errors == []
    got = _read_hyps(hyp)
    for i, target in enumerate(TARGETS):
        assert got[f"pair{i:02d}"] == target
        assert "!!!!!" in got[f"pair{i:02d}"]


def test_warmup_lr_at_step_25(pair_set, tmp_path):
    assert TrainRecipe().lr_at(25) == 0.5e-5

    _, manifest = pair_set
    recipe = TrainRecipe(
        total_steps=25, warmup_steps=50, peak_lr=1e-5,
        batch_size=2, grad_accumulation=1, seed=3,
    )
    ckpt = finetune(manifest, tmp_path / "warmup_ckpt", recipe=recipe)
    rows = (ckpt / "training_log.csv").read_text().strip().splitlines()[1:]
    step, _, lr = rows[24].split(",")
    assert int(step) == 25
    assert abs(float(lr) - 0.5e-5) <= 1e-8


def test_output_contract_with_toolkit(pair_set, overfit_ckpt, tmp_path):
    _, manifest = pair_set

    # the toolkit's subprocess hook runs the adapter end to end
    hyp = tmp_path / "hyp.tsv"
    cmd = (
        f"python3 -m iuseg_adapter.cli transcribe --checkpoint {overfit_ckpt} "
        "--manifest {manifest} --out {out}"
    )
    assert toolkit_cli.main(
        ["infer", "--manifest", str(manifest), "--out", str(hyp), "--cmd", cmd]
    ) == 0

    lines = hyp.read_text(encoding="utf-8").splitlines()
    assert len(lines) == len(TARGETS)
    for line in lines:
        _, text = line.split("\t", 1)
        parse = extract_boundaries(text)
        assert parse.words
        assert parse.terminal

    report_path = tmp_path / "report.json"
    assert toolkit_cli.main(
        [
            "eval",
            "--manifest", str(manifest),
            "--hypothesis", str(hyp),
            "--out", str(report_path),
        ]
    ) == 0
    report = EvalReport.from_json(report_path.read_text())
    assert len(report.per_chunk) == len(TARGETS)
    assert report.f1 == 1.0
