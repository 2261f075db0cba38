import json
import struct
from pathlib import Path

import numpy as np
import pytest

from iuseg_adapter.recipe import TrainRecipe
from iuseg_adapter.train import finetune

TARGETS = [
    "so anyway !!!!! we left !!!!!",
    "that was !!!!! really nice !!!!!",
    "i mean !!!!! come on !!!!!",
    "she went home !!!!!",
    "okay !!!!! right !!!!! fine !!!!!",
]

# small recipe for desk-scale overfit runs; the contract defaults stay 400/50/1e-5
OVERFIT_RECIPE = TrainRecipe(
    total_steps=50,
    warmup_steps=10,
    peak_lr=2e-3,
    batch_size=5,
    grad_accumulation=1,
    seed=7,
)


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_adapter_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::", 1)[1]
    print(f"\n[{'PASS' if report.passed else 'FAIL'}] {name}")


def write_feature_file(path: Path, matrix: np.ndarray) -> None:
    header = struct.pack("<4sIII", b"IUFM", 1, *matrix.shape)
    Path(path).write_bytes(header + np.ascontiguousarray(matrix, "<f4").tobytes())


def pair_features(i: int, frames: int = 96) -> np.ndarray:
    """Light noise with one loud mel band per pair, so inputs are separable."""
    rng = np.random.default_rng(1000 + i)
    mat = 0.1 * rng.uniform(0.0, 1.0, size=(80, frames))
    mat[16 * i : 16 * (i + 1), :] += 0.9
    return np.clip(mat, 0.0, 1.0).astype("<f4")


def manifest_line(i: int, text: str | None, feature_path: str | None) -> str:
    return json.dumps(
        {
            "chunk_id": f"pair{i:02d}",
            "conversation_id": "synth",
            "speaker": "A",
            "audio_path": "synth.wav",
            "start_ms": i * 1000,
            "end_ms": i * 1000 + 960,
            "split": "test",
            "unit_ends_ms": [i * 1000 + 960],
            "target_text": text,
            "feature_path": feature_path,
        },
        ensure_ascii=False,
    )


@pytest.fixture(scope="session")
def pair_set(tmp_path_factory):
    """Five synthetic feature/target pairs plus their manifest."""
    root = tmp_path_factory.mktemp("pairs")
    feats = root / "features"
    feats.mkdir()
    lines = []
    for i, text in enumerate(TARGETS):
        fp = feats / f"pair{i:02d}.bin"
        write_feature_file(fp, pair_features(i))
        lines.append(manifest_line(i, text, str(fp)))
    manifest = root / "manifest.jsonl"
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return root, manifest


@pytest.fixture(scope="session")
def overfit_ckpt(pair_set, tmp_path_factory):
    _, manifest = pair_set
    out = tmp_path_factory.mktemp("ckpt") / "overfit"
    return finetune(manifest, out, recipe=OVERFIT_RECIPE)
