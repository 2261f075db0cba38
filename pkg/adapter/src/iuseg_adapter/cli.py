"""Command line entry points: finetune, transcribe, lexical-segment.

Exit codes match the toolkit convention: 0 ok, 1 usage, 2 data error,
3 I/O error, with a one-line JSON error on stderr.
"""

import argparse
import json
import sys
from pathlib import Path

from .errors import DataError, IOFailure, UsageError
from .infer import lexical_segment, transcribe
from .model import ModelConfig
from .recipe import TrainRecipe
from .train import finetune


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _recipe_from(args) -> TrainRecipe:
    return TrainRecipe(
        total_steps=args.steps,
        warmup_steps=args.warmup,
        peak_lr=args.peak_lr,
        batch_size=args.batch_size,
        grad_accumulation=args.grad_accumulation,
        seed=args.seed,
    )


def cmd_finetune(args) -> int:
    recipe = _recipe_from(args)
    config = ModelConfig(
        d_model=args.d_model,
        n_heads=args.n_heads,
        encoder_layers=args.layers,
        decoder_layers=args.layers,
        ff_dim=4 * args.d_model,
    )
    out = finetune(
        Path(args.manifest),
        Path(args.out),
        recipe=recipe,
        variant=args.variant,
        model_config=config,
        features_root=Path(args.features_root),
    )
    print(
        f"checkpoint -> {out} "
        f"(steps={recipe.total_steps}, effective batch={recipe.effective_batch}, "
        f"optimizer=adamw)"
    )
    return 0


def cmd_transcribe(args) -> int:
    errors = transcribe(
        Path(args.checkpoint),
        Path(args.manifest),
        Path(args.out),
        features_root=Path(args.features_root),
    )
    print(f"hypotheses -> {args.out} ({len(errors)} record error(s))")
    return 0


def cmd_lexical_segment(args) -> int:
    lexical_segment([])
    return 0


def build_parser() -> _Parser:
    p = _Parser(prog="iuseg-adapter")
    sub = p.add_subparsers(dest="command", required=True)

    ft = sub.add_parser("finetune")
    ft.add_argument("--manifest", required=True)
    ft.add_argument("--out", required=True)
    ft.add_argument("--variant", choices=("full", "acoustic"), default="full")
    ft.add_argument("--features-root", default=".")
    ft.add_argument("--steps", type=int, default=TrainRecipe.total_steps)
    ft.add_argument("--warmup", type=int, default=TrainRecipe.warmup_steps)
    ft.add_argument("--peak-lr", type=float, default=TrainRecipe.peak_lr)
    ft.add_argument("--batch-size", type=int, default=TrainRecipe.batch_size)
    ft.add_argument(
        "--grad-accumulation", type=int, default=TrainRecipe.grad_accumulation
    )
    ft.add_argument("--seed", type=int, default=0)
    ft.add_argument("--d-model", type=int, default=ModelConfig.d_model)
    ft.add_argument("--n-heads", type=int, default=ModelConfig.n_heads)
    ft.add_argument("--layers", type=int, default=ModelConfig.encoder_layers)
    ft.set_defaults(fn=cmd_finetune)

    tr = sub.add_parser("transcribe")
    tr.add_argument("--checkpoint", required=True)
    tr.add_argument("--manifest", required=True)
    tr.add_argument("--out", required=True)
    tr.add_argument("--features-root", default=".")
    tr.set_defaults(fn=cmd_transcribe)

    ls = sub.add_parser("lexical-segment")
    ls.set_defaults(fn=cmd_lexical_segment)
    return p


def _fail(kind: str, exc: Exception, code: int) -> int:
    print(json.dumps({"error": kind, "message": str(exc)}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.fn(args)
    except UsageError as exc:
        return _fail("usage", exc, 1)
    except DataError as exc:
        return _fail("data", exc, 2)
    except (IOFailure, OSError) as exc:
        return _fail("io", exc, 3)


if __name__ == "__main__":
    sys.exit(main())
