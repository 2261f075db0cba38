"""Training recipe: linear warmup to a constant peak learning rate."""

import json
from dataclasses import asdict, dataclass

from .errors import DataError


@dataclass(frozen=True)
class TrainRecipe:
    total_steps: int = 400
    warmup_steps: int = 50
    peak_lr: float = 1e-5
    batch_size: int = 32
    grad_accumulation: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.total_steps < 1:
            raise DataError(f"total_steps must be >= 1, got {self.total_steps}")
        if self.warmup_steps < 0:
            raise DataError(f"warmup_steps must be >= 0, got {self.warmup_steps}")
        if self.peak_lr <= 0:
            raise DataError(f"peak_lr must be positive, got {self.peak_lr}")
        if self.batch_size < 1 or self.grad_accumulation < 1:
            raise DataError("batch_size and grad_accumulation must be >= 1")

    @property
    def effective_batch(self) -> int:
        return self.batch_size * self.grad_accumulation

    def lr_at(self, step: int) -> float:
        """LR applied on optimizer step `step` (1-based)."""
        if step < 1:
            raise DataError(f"steps are 1-based, got {step}")
        if self.warmup_steps == 0 or step >= self.warmup_steps:
            return self.peak_lr
        return self.peak_lr * step / self.warmup_steps

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TrainRecipe":
        return cls(**json.loads(text))
