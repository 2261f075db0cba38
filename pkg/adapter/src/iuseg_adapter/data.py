"""Input formats the toolkit side of the pipeline produces.

The coupling is the file contract only: manifest JSONL with chunk_id /
target_text / feature_path fields, and the flat binary feature files
(IUFM magic, version, rows, cols, then row-major float32 LE).
"""

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError, IOFailure
from .tokenizer import Tokenizer

_FEATURE_MAGIC = b"IUFM"
_FEATURE_VERSION = 1

N_MELS = 80


@dataclass(frozen=True)
class ChunkRecord:
    chunk_id: str
    target_text: str | None
    feature_path: str | None
    split: str = "train"


def read_manifest(path: Path) -> list[ChunkRecord]:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise IOFailure(f"cannot read manifest {path}: {e}") from e
    records = []
    seen = set()
    for n, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise DataError(f"{path} line {n}: invalid JSON ({e})") from e
        if "chunk_id" not in obj:
            raise DataError(f"{path} line {n}: record has no chunk_id")
        cid = obj["chunk_id"]
        if cid in seen:
            raise DataError(f"{path} line {n}: duplicate chunk_id {cid!r}")
        seen.add(cid)
        records.append(
            ChunkRecord(
                chunk_id=cid,
                target_text=obj.get("target_text"),
                feature_path=obj.get("feature_path"),
                split=obj.get("split", "train"),
            )
        )
    return records


def read_features(path: Path) -> np.ndarray:
    try:
        blob = Path(path).read_bytes()
    except OSError as e:
        raise IOFailure(f"cannot read feature file {path}: {e}") from e
    if len(blob) < 16 or blob[:4] != _FEATURE_MAGIC:
        raise DataError(f"not a feature file: {path}")
    _, version, rows, cols = struct.unpack("<4sIII", blob[:16])
    if version != _FEATURE_VERSION:
        raise DataError(f"unsupported feature file version {version} in {path}")
    values = np.frombuffer(blob[16:], dtype="<f4")
    if values.size != rows * cols:
        raise DataError(f"feature file {path} truncated")
    return values.reshape(rows, cols).astype(np.float32)


@dataclass(frozen=True)
class Example:
    chunk_id: str
    features: np.ndarray  # (N_MELS, frames)
    target_ids: tuple[int, ...]  # BOS ... EOS


def build_dataset(
    records: Sequence[ChunkRecord],
    tokenizer: Tokenizer,
    base_dir: Path = Path("."),
) -> list[Example]:
    """Manifest order in, manifest order out; rebuilding is bit-identical."""
    examples = []
    for rec in records:
        if rec.target_text is None:
            raise DataError(f"{rec.chunk_id}: record has no target_text")
        if rec.feature_path is None:
            raise DataError(f"{rec.chunk_id}: record has no feature_path")
        feats = read_features(resolve_path(rec.feature_path, base_dir))
        if feats.shape[0] != N_MELS:
            raise DataError(
                f"{rec.chunk_id}: expected {N_MELS} mel rows, got {feats.shape[0]}"
            )
        examples.append(
            Example(rec.chunk_id, feats, tuple(tokenizer.encode(rec.target_text)))
        )
    return examples


def resolve_path(path_str: str, base_dir: Path) -> Path:
    p = Path(path_str)
    return p if p.is_absolute() else Path(base_dir) / p
