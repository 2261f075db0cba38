"""Whitespace tokenizer over target text.

The boundary marker is a reserved symbol with a fixed id, so it always maps
to exactly one token no matter what vocabulary the targets produce.
"""

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DataError

BOUNDARY_MARKER = "!!!!!"

PAD, BOS, EOS, UNK, MARKER = 0, 1, 2, 3, 4
_SPECIALS = ["<pad>", "<s>", "</s>", "<unk>", BOUNDARY_MARKER]


@dataclass(frozen=True)
class Tokenizer:
    vocab: tuple[str, ...]  # index == token id

    def __post_init__(self):
        if list(self.vocab[: len(_SPECIALS)]) != _SPECIALS:
            raise DataError("vocabulary does not start with the reserved symbols")
        if len(set(self.vocab)) != len(self.vocab):
            raise DataError("vocabulary contains duplicate tokens")
        object.__setattr__(self, "_index", {tok: i for i, tok in enumerate(self.vocab)})

    @classmethod
    def build(cls, texts: Iterable[str]) -> "Tokenizer":
        words = sorted(
            {w for t in texts for w in t.split()} - set(_SPECIALS)
        )
        return cls(tuple(_SPECIALS + words))

    @property
    def marker_id(self) -> int:
        return MARKER

    def __len__(self) -> int:
        return len(self.vocab)

    def encode(self, text: str) -> list[int]:
        index = self._index
        return [BOS] + [index.get(w, UNK) for w in text.split()] + [EOS]

    def decode(self, ids: Sequence[int]) -> str:
        words = []
        for i in ids:
            if i == EOS:
                break
            if i in (PAD, BOS):
                continue
            if not 0 <= i < len(self.vocab):
                raise DataError(f"token id {i} out of range")
            words.append(self.vocab[i])
        return " ".join(words)

    def save(self, path: Path) -> None:
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(json.dumps(list(self.vocab), ensure_ascii=False), encoding="utf-8")
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: Path) -> "Tokenizer":
        return cls(tuple(json.loads(Path(path).read_text(encoding="utf-8"))))
