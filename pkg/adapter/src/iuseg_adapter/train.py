"""Fine-tuning loop: AdamW, linear warmup to a constant peak LR.

A training step means one optimizer step; each consumes
batch_size * grad_accumulation examples, cycling through the manifest in
order. The per-step log (step, loss, lr) is the record of what actually ran.
"""

import io
import json
import os
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from .data import Example, build_dataset, read_manifest
from .errors import DataError
from .model import ModelConfig, Seq2Seq, loss_for_batch
from .recipe import TrainRecipe
from .tokenizer import PAD, Tokenizer

VARIANTS = ("full", "acoustic")
OPTIMIZER = "adamw"


def atomic_write_bytes(path: Path, blob: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(blob)
    os.replace(tmp, path)


def atomic_write_text(path: Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def pad_batch(examples: Sequence[Example]) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """(features B x N_MELS x Tmax, frame lengths, target ids B x Lmax)."""
    max_frames = max(e.features.shape[1] for e in examples)
    max_len = max(len(e.target_ids) for e in examples)
    feats = np.zeros((len(examples), examples[0].features.shape[0], max_frames), np.float32)
    targets = np.full((len(examples), max_len), PAD, np.int64)
    lengths = []
    for i, e in enumerate(examples):
        feats[i, :, : e.features.shape[1]] = e.features
        targets[i, : len(e.target_ids)] = e.target_ids
        lengths.append(e.features.shape[1])
    return (
        torch.from_numpy(feats),
        torch.tensor(lengths, dtype=torch.long),
        torch.from_numpy(targets),
    )


def _cycle(examples: Sequence[Example], start: int, count: int) -> tuple[list[Example], int]:
    out = []
    idx = start
    for _ in range(count):
        out.append(examples[idx % len(examples)])
        idx += 1
    return out, idx


def finetune(
    manifest_path: Path,
    out_dir: Path,
    recipe: TrainRecipe = TrainRecipe(),
    variant: str = "full",
    model_config: ModelConfig = ModelConfig(),
    features_root: Path = Path("."),
) -> Path:
    """Train on the manifest's target_text and write a checkpoint directory."""
    if variant not in VARIANTS:
        raise DataError(f"variant must be one of {VARIANTS}, got {variant!r}")
    records = read_manifest(manifest_path)
    if not records:
        raise DataError(f"manifest {manifest_path} has no records")
    missing = [r.chunk_id for r in records if not r.target_text]
    if missing:
        raise DataError(
            f"{len(missing)} record(s) have no target_text "
            f"(first: {missing[0]}); run the targets stage first"
        )

    torch.manual_seed(recipe.seed)
    tokenizer = Tokenizer.build(r.target_text for r in records)
    examples = build_dataset(records, tokenizer, features_root)
    model = Seq2Seq(len(tokenizer), model_config)
    model.train()
    optimizer = torch.optim.AdamW(model.parameters(), lr=recipe.peak_lr)

    log = io.StringIO()
    log.write("step,loss,lr\n")
    cursor = 0
    for step in range(1, recipe.total_steps + 1):
        lr = recipe.lr_at(step)
        for group in optimizer.param_groups:
            group["lr"] = lr
        optimizer.zero_grad()
        step_loss = 0.0
        for _ in range(recipe.grad_accumulation):
            batch, cursor = _cycle(examples, cursor, recipe.batch_size)
            loss = loss_for_batch(model, *pad_batch(batch))
            (loss / recipe.grad_accumulation).backward()
            step_loss += float(loss.item()) / recipe.grad_accumulation
        optimizer.step()
        log.write(f"{step},{step_loss:.6f},{lr:.10e}\n")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    buf = io.BytesIO()
    torch.save(model.state_dict(), buf)
    atomic_write_bytes(out_dir / "model.pt", buf.getvalue())
    tokenizer.save(out_dir / "vocab.json")
    atomic_write_text(out_dir / "model_config.json", model_config.to_json())
    atomic_write_text(out_dir / "recipe.json", recipe.to_json())
    atomic_write_text(
        out_dir / "meta.json",
        json.dumps(
            {
                "variant": variant,
                "optimizer": OPTIMIZER,
                "vocab_size": len(tokenizer),
                "examples": len(examples),
            },
            sort_keys=True,
        ),
    )
    atomic_write_text(out_dir / "training_log.csv", log.getvalue())
    return out_dir


def load_checkpoint(ckpt_dir: Path) -> tuple[Seq2Seq, Tokenizer]:
    ckpt_dir = Path(ckpt_dir)
    for name in ("model.pt", "vocab.json", "model_config.json"):
        if not (ckpt_dir / name).exists():
            raise DataError(f"checkpoint {ckpt_dir} is missing {name}")
    tokenizer = Tokenizer.load(ckpt_dir / "vocab.json")
    config = ModelConfig.from_json((ckpt_dir / "model_config.json").read_text())
    model = Seq2Seq(len(tokenizer), config)
    state = torch.load(ckpt_dir / "model.pt", map_location="cpu", weights_only=True)
    model.load_state_dict(state)
    model.eval()
    return model, tokenizer
