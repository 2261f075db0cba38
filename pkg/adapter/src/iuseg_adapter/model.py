"""Compact encoder-decoder over log-mel features.

No pretrained weights are fetched; the "base model" is built locally with a
configurable size and fine-tuned from its random initialization. Acceptance
is property-based (overfit a tiny set, reproduce targets), so nothing here
depends on large-scale pretraining.
"""

import json
import math
from dataclasses import asdict, dataclass

import torch
from torch import nn

from .data import N_MELS
from .tokenizer import BOS, EOS, PAD


@dataclass(frozen=True)
class ModelConfig:
    d_model: int = 64
    n_heads: int = 4
    encoder_layers: int = 2
    decoder_layers: int = 2
    ff_dim: int = 256
    dropout: float = 0.0
    max_decode_len: int = 128

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ModelConfig":
        return cls(**json.loads(text))


def _sinusoid_table(length: int, dim: int) -> torch.Tensor:
    pos = torch.arange(length, dtype=torch.float32).unsqueeze(1)
    div = torch.exp(
        torch.arange(0, dim, 2, dtype=torch.float32) * (-math.log(10000.0) / dim)
    )
    table = torch.zeros(length, dim)
    table[:, 0::2] = torch.sin(pos * div)
    table[:, 1::2] = torch.cos(pos * div)
    return table


def _conv_out_len(n: int) -> int:
    # two conv1d layers, kernel 3 stride 2 padding 1
    for _ in range(2):
        n = (n - 1) // 2 + 1
    return n


class Seq2Seq(nn.Module):
    def __init__(self, vocab_size: int, config: ModelConfig):
        super().__init__()
        self.config = config
        d = config.d_model
        self.frontend = nn.Sequential(
            nn.Conv1d(N_MELS, d, kernel_size=3, stride=2, padding=1),
            nn.GELU(),
            nn.Conv1d(d, d, kernel_size=3, stride=2, padding=1),
            nn.GELU(),
        )
        self.encoder = nn.TransformerEncoder(
            nn.TransformerEncoderLayer(
                d,
                config.n_heads,
                config.ff_dim,
                dropout=config.dropout,
                batch_first=True,
            ),
            config.encoder_layers,
            enable_nested_tensor=False,
        )
        self.embed = nn.Embedding(vocab_size, d, padding_idx=PAD)
        self.decoder = nn.TransformerDecoder(
            nn.TransformerDecoderLayer(
                d,
                config.n_heads,
                config.ff_dim,
                dropout=config.dropout,
                batch_first=True,
            ),
            config.decoder_layers,
        )
        self.out = nn.Linear(d, vocab_size)
        self.register_buffer("positions", _sinusoid_table(4096, d), persistent=False)

    def encode(
        self, features: torch.Tensor, frame_lengths: torch.Tensor
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """features (B, N_MELS, T) -> (memory, key padding mask)."""
        x = self.frontend(features).transpose(1, 2)  # (B, T', d)
        x = x + self.positions[: x.shape[1]]
        out_lengths = torch.tensor(
            [_conv_out_len(int(n)) for n in frame_lengths], device=x.device
        )
        mask = torch.arange(x.shape[1], device=x.device)[None, :] >= out_lengths[:, None]
        return self.encoder(x, src_key_padding_mask=mask), mask

    def decode_logits(
        self,
        memory: torch.Tensor,
        memory_mask: torch.Tensor,
        token_ids: torch.Tensor,
    ) -> torch.Tensor:
        """Teacher-forced logits for token_ids (B, L)."""
        y = self.embed(token_ids) + self.positions[: token_ids.shape[1]]
        length = token_ids.shape[1]
        causal = torch.triu(
            torch.ones(length, length, dtype=torch.bool, device=token_ids.device),
            diagonal=1,
        )
        h = self.decoder(
            y,
            memory,
            tgt_mask=causal,
            tgt_key_padding_mask=token_ids == PAD,
            memory_key_padding_mask=memory_mask,
        )
        return self.out(h)

    @torch.no_grad()
    def greedy_decode(self, features: torch.Tensor, frame_lengths: torch.Tensor) -> list[list[int]]:
        """Batch greedy decoding; returns token ids without BOS/EOS."""
        self.eval()
        memory, mask = self.encode(features, frame_lengths)
        batch = features.shape[0]
        tokens = torch.full((batch, 1), BOS, dtype=torch.long, device=features.device)
        finished = torch.zeros(batch, dtype=torch.bool, device=features.device)
        for _ in range(self.config.max_decode_len):
            logits = self.decode_logits(memory, mask, tokens)
            nxt = logits[:, -1].argmax(dim=-1)
            nxt = torch.where(finished, torch.full_like(nxt, PAD), nxt)
            tokens = torch.cat([tokens, nxt.unsqueeze(1)], dim=1)
            finished |= nxt == EOS
            if bool(finished.all()):
                break
        out = []
        for row in tokens[:, 1:].tolist():
            ids = []
            for t in row:
                if t in (EOS, PAD):
                    break
                ids.append(t)
            out.append(ids)
        return out


def loss_for_batch(
    model: Seq2Seq,
    features: torch.Tensor,
    frame_lengths: torch.Tensor,
    targets: torch.Tensor,
) -> torch.Tensor:
    """Cross entropy of next-token prediction; PAD positions are ignored."""
    memory, mask = model.encode(features, frame_lengths)
    logits = model.decode_logits(memory, mask, targets[:, :-1])
    return nn.functional.cross_entropy(
        logits.reshape(-1, logits.shape[-1]),
        targets[:, 1:].reshape(-1),
        ignore_index=PAD,
    )
