"""Inference: manifest in, hypothesis TSV (chunk_id<TAB>text) out.

Records whose features cannot be read produce an error line in the `.errors`
sidecar and the run continues; the hypothesis file only ever contains lines
that decoded cleanly.
"""

from pathlib import Path
from typing import Sequence

from .data import Example, read_features, read_manifest, resolve_path, N_MELS
from .errors import AdapterError, UsageError
from .train import atomic_write_text, load_checkpoint, pad_batch

BATCH = 16


def transcribe(
    ckpt_dir: Path,
    manifest_path: Path,
    out_path: Path,
    features_root: Path = Path("."),
) -> list[str]:
    """Write hypotheses for every decodable record; returns error lines."""
    model, tokenizer = load_checkpoint(ckpt_dir)
    records = read_manifest(manifest_path)

    loaded: list[Example] = []
    errors: list[str] = []
    for rec in records:
        if not rec.feature_path:
            errors.append(f"{rec.chunk_id}: record has no feature_path")
            continue
        try:
            feats = read_features(resolve_path(rec.feature_path, features_root))
        except AdapterError as exc:
            errors.append(f"{rec.chunk_id}: {exc}")
            continue
        if feats.shape[0] != N_MELS:
            errors.append(f"{rec.chunk_id}: expected {N_MELS} mel rows, got {feats.shape[0]}")
            continue
        # target ids are unused at inference; a PAD sentinel keeps pad_batch happy
        loaded.append(Example(rec.chunk_id, feats, (0,)))

    lines = []
    for lo in range(0, len(loaded), BATCH):
        batch = loaded[lo : lo + BATCH]
        feats, lengths, _ = pad_batch(batch)
        decoded = model.greedy_decode(feats, lengths)
        for e, ids in zip(batch, decoded):
            lines.append(f"{e.chunk_id}\t{tokenizer.decode(ids)}\n")

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out_path, "".join(lines))
    sidecar = out_path.with_name(out_path.name + ".errors")
    if errors:
        atomic_write_text(sidecar, "".join(f"{e}\n" for e in errors))
    elif sidecar.exists():
        sidecar.unlink()
    return errors


def lexical_segment(word_sequences: Sequence[Sequence[str]]) -> None:
    """Boundary placement over text alone; deliberately not implemented."""
    raise UsageError("lexical_segment is not implemented")
