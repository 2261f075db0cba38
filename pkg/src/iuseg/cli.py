"""Command-line driver for the segmentation pipeline.

Subcommands run in sequence: parse -> build -> targets -> features/filter,
then eval/report close the loop, and infer hands a manifest to an external
transcriber over a file-based contract. Re-running any subcommand on
unchanged inputs produces byte-identical outputs.

Exit codes: 0 ok, 1 usage, 2 data error, 3 I/O error. Failures also emit a
single machine-readable JSON line on stderr. Record-level problems (one bad
transcript, one missing audio file) go to a `.errors` sidecar next to the
output and the run continues; structural problems fail the whole command.
"""

from __future__ import annotations

import argparse
import json
import os
import shlex
import subprocess
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import chat, corpus, dsp, evaluate, report, targets
from .config import Config, load_config
from .corpus import Manifest, ManifestRecord
from .errors import DataError, IOFailure, IusegError, ParseError, UsageError


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; route through UsageError
    # instead so usage problems uniformly exit 1.
    def error(self, message):
        raise UsageError(message)


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _write_errors(path: Path, errors: list[str]) -> None:
    if errors:
        _atomic_write(path, "".join(e + "\n" for e in errors))
    elif path.exists():
        path.unlink()


def _read_text(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IOFailure(f"cannot read {path}: {exc}") from exc


def _read_hypotheses(path: Path) -> dict[str, str]:
    """Hypothesis file: one `chunk_id<TAB>text` line per chunk."""
    out: dict[str, str] = {}
    text = _read_text(Path(path))
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        chunk_id, sep, hyp = line.partition("\t")
        if not sep:
            raise DataError(f"{path}:{line_no}: expected chunk_id<TAB>text")
        if chunk_id in out:
            raise DataError(f"{path}:{line_no}: duplicate chunk_id {chunk_id}")
        out[chunk_id] = hyp
    return out


def _load_transcripts(transcripts_dir: Path) -> list[chat.Transcript]:
    files = sorted(Path(transcripts_dir).glob("*.json"))
    if not files:
        raise DataError(f"no transcript documents in {transcripts_dir}")
    return [chat.deserialize_transcript(_read_text(f)) for f in files]


def _derive_chunks(transcripts, cfg: Config, warnings: list[str] | None = None):
    return corpus.build_chunks(
        transcripts,
        max_gap_ms=cfg.corpus.max_gap_ms,
        max_units=cfg.corpus.max_units,
        max_span_ms=cfg.corpus.max_span_ms,
        test_count=cfg.corpus.test_conversations,
        warnings=warnings,
    )


# ---------------------------------------------------------------- parse


def cmd_parse(args, cfg: Config) -> int:
    corpus_dir = Path(args.corpus_dir or cfg.paths.corpus_dir)
    out_dir = Path(args.out or Path(cfg.paths.work_dir) / "transcripts")
    if not corpus_dir.is_dir():
        raise IOFailure(f"corpus directory not found: {corpus_dir}")
    files = sorted(corpus_dir.glob("*.cha"))
    if not files:
        raise DataError(f"no .cha files in {corpus_dir}")
    out_dir.mkdir(parents=True, exist_ok=True)
    errors: list[str] = []
    written = 0
    for f in files:
        try:
            transcript = chat.parse_cha(_read_text(f), f.stem)
        except ParseError as exc:
            errors.append(f"{f.name}: {exc}")
            continue
        if not args.raw:
            transcript = chat.clean_transcript(transcript)
        _atomic_write(out_dir / (f.stem + ".json"), chat.serialize_transcript(transcript))
        written += 1
    _write_errors(out_dir / "parse.errors", errors)
    if written == 0:
        raise DataError(f"no transcript in {corpus_dir} parsed cleanly")
    print(f"parsed {written} of {len(files)} transcripts -> {out_dir}")
    return 0


# ---------------------------------------------------------------- build


def cmd_build(args, cfg: Config) -> int:
    transcripts_dir = Path(args.transcripts or Path(cfg.paths.work_dir) / "transcripts")
    audio_dir = Path(args.audio_dir or cfg.paths.audio_dir)
    out = Path(args.out or Path(cfg.paths.work_dir) / "manifest.jsonl")
    transcripts = _load_transcripts(transcripts_dir)
    warnings: list[str] = []
    chunks = _derive_chunks(transcripts, cfg, warnings)
    manifest = corpus.build_manifest(chunks, audio_dir, dsp.wav_duration_ms)
    manifest.errors = warnings + manifest.errors
    out.parent.mkdir(parents=True, exist_ok=True)
    manifest.save(out)
    n_test = sum(1 for r in manifest.records if r.split == "test")
    print(
        f"built {len(manifest.records)} chunks ({n_test} test) -> {out}"
        + (f" ({len(manifest.errors)} errors)" if manifest.errors else "")
    )
    return 0


# ---------------------------------------------------------------- targets


def cmd_targets(args, cfg: Config) -> int:
    manifest_path = Path(args.manifest or Path(cfg.paths.work_dir) / "manifest.jsonl")
    transcripts_dir = Path(args.transcripts or Path(cfg.paths.work_dir) / "transcripts")
    manifest = Manifest.load(manifest_path)
    chunks = {c.chunk_id: c for c in _derive_chunks(_load_transcripts(transcripts_dir), cfg)}
    errors: list[str] = []
    filled = 0
    for rec in manifest.records:
        chunk = chunks.get(rec.chunk_id)
        if chunk is None:
            errors.append(f"{rec.chunk_id}: not derivable from {transcripts_dir}")
            continue
        text = targets.render_target(chunk, cfg.tokens.boundary_marker)
        if args.mode == "masked":
            text = targets.mask_syntax(text, cfg.tokens.common_token, cfg.tokens.boundary_marker)
        rec.target_text = text
        filled += 1
    manifest.save(manifest_path, write_sidecar=False)
    _write_errors(manifest_path.with_name(manifest_path.name + ".targets.errors"), errors)
    print(f"rendered {args.mode} targets for {filled} chunks -> {manifest_path}")
    return 0


# ---------------------------------------------------------------- features

# Worker task: one conversation's audio, sliced per chunk. Module-level so
# it pickles into a process pool; output bytes depend only on the task.


def _feature_task(task) -> tuple[dict[str, str], list[str]]:
    audio_path, records, out_dir, scale, area_normalize = task
    out_dir = Path(out_dir)
    done: dict[str, str] = {}
    errors: list[str] = []
    try:
        buf = dsp.load_wav(Path(audio_path))
    except IusegError as exc:
        return done, [f"{audio_path}: {exc}"]
    for chunk_id, start_ms, end_ms in records:
        try:
            piece = dsp.slice_buffer(buf, chat.TimeInterval(start_ms, end_ms))
            piece = dsp.resample(piece, dsp.TARGET_SAMPLE_RATE)
            matrix = dsp.log_mel(piece, scale=scale, area_normalize=area_normalize)
        except IusegError as exc:
            errors.append(f"{chunk_id}: {exc}")
            continue
        path = out_dir / (chunk_id + ".bin")
        dsp.save_features(path, matrix)
        done[chunk_id] = str(path)
    return done, errors


def cmd_features(args, cfg: Config, workers: int) -> int:
    manifest_path = Path(args.manifest or Path(cfg.paths.work_dir) / "manifest.jsonl")
    out_dir = Path(args.out or Path(cfg.paths.work_dir) / "features")
    manifest = Manifest.load(manifest_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    groups: dict[str, list[ManifestRecord]] = {}
    for rec in manifest.records:
        groups.setdefault(rec.audio_path, []).append(rec)
    tasks = [
        (
            audio_path,
            [(r.chunk_id, r.start_ms, r.end_ms) for r in recs],
            str(out_dir),
            cfg.dsp.mel_scale,
            cfg.dsp.mel_area_normalize,
        )
        for audio_path, recs in sorted(groups.items())
    ]
    done: dict[str, str] = {}
    errors: list[str] = []
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_feature_task, tasks))
    else:
        results = [_feature_task(t) for t in tasks]
    for paths, errs in results:
        done.update(paths)
        errors.extend(errs)
    for rec in manifest.records:
        rec.feature_path = done.get(rec.chunk_id)
    manifest.save(manifest_path, write_sidecar=False)
    _write_errors(out_dir / "features.errors", sorted(errors))
    print(f"wrote {len(done)} feature files -> {out_dir}")
    return 0


# ---------------------------------------------------------------- filter


def _filter_task(task) -> str | None:
    src, dst, spec = task
    try:
        buf = dsp.load_wav(Path(src))
        dsp.save_wav(Path(dst), dsp.butterworth(buf, spec))
    except IusegError as exc:
        return f"{spec.label}/{Path(src).name}: {exc}"
    return None


def cmd_filter(args, cfg: Config, workers: int) -> int:
    manifest_path = Path(args.manifest or Path(cfg.paths.work_dir) / "manifest.jsonl")
    out_root = Path(args.out or Path(cfg.paths.work_dir) / "filtered")
    manifest = Manifest.load(manifest_path)
    audio_paths = sorted({rec.audio_path for rec in manifest.records})
    if not audio_paths:
        raise DataError(f"manifest has no records: {manifest_path}")
    specs = dsp.sweep_specs(cfg.dsp.filter_order, cfg.dsp.zero_phase)
    tasks = []
    for spec in specs:
        tree = out_root / spec.label
        tree.mkdir(parents=True, exist_ok=True)
        for src in audio_paths:
            tasks.append((src, str(tree / Path(src).name), spec))
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_filter_task, tasks))
    else:
        results = [_filter_task(t) for t in tasks]
    errors = sorted(r for r in results if r is not None)
    _write_errors(out_root / "filter.errors", errors)
    print(f"filtered {len(audio_paths)} files into {len(specs)} trees -> {out_root}")
    return 0


# ---------------------------------------------------------------- eval


def _parse_times(text: str, where: str) -> list[int]:
    times = []
    for tok in text.replace(",", " ").split():
        try:
            times.append(int(tok))
        except ValueError:
            raise DataError(f"{where}: bad boundary time {tok!r}") from None
    return sorted(times)


def cmd_eval(args, cfg: Config) -> int:
    manifest_path = Path(args.manifest or Path(cfg.paths.work_dir) / "manifest.jsonl")
    manifest = Manifest.load(manifest_path)
    hyps = _read_hypotheses(Path(args.hypothesis))
    out = Path(args.out or Path(cfg.paths.work_dir) / "reports" / f"eval_{args.mode}.json")
    records = [r for r in manifest.records if args.split in ("all", r.split)]
    known = {r.chunk_id for r in records}
    errors = [f"{cid}: hypothesis for unknown chunk" for cid in sorted(set(hyps) - known)]
    scores: list[evaluate.ChunkScore] = []
    for rec in records:
        if rec.chunk_id not in hyps:
            errors.append(f"{rec.chunk_id}: no hypothesis line")
            continue
        if args.mode == "juncture":
            if rec.target_text is None:
                errors.append(f"{rec.chunk_id}: manifest has no target_text (run targets)")
                continue
            scores.append(
                evaluate.score_hypothesis(
                    rec.chunk_id,
                    rec.target_text,
                    hyps[rec.chunk_id],
                    marker=cfg.tokens.boundary_marker,
                    include_terminal=cfg.eval.include_terminal,
                    score_unaligned=cfg.eval.score_unaligned,
                )
            )
        else:
            if not rec.unit_ends_ms:
                errors.append(f"{rec.chunk_id}: manifest has no unit end times")
                continue
            ref_times = list(rec.unit_ends_ms)
            if not cfg.eval.include_terminal:
                ref_times = ref_times[:-1]
            counts = evaluate.time_match(
                sorted(ref_times),
                _parse_times(hyps[rec.chunk_id], rec.chunk_id),
                window_ms=cfg.eval.window_ms,
            )
            scores.append(evaluate.ChunkScore(chunk_id=rec.chunk_id, counts=counts))
    if not scores:
        raise DataError("no chunk could be scored (see sidecar)")
    rep = evaluate.aggregate(scores, mode=args.mode)
    out.parent.mkdir(parents=True, exist_ok=True)
    _atomic_write(out, rep.to_json())
    _write_errors(out.with_name(out.name + ".errors"), errors)
    acc = "-" if rep.accuracy is None else f"{rep.accuracy:.4f}"
    print(
        f"{args.mode} over {len(scores)} chunks: "
        f"P={rep.precision:.4f} R={rep.recall:.4f} F1={rep.f1:.4f} acc={acc} -> {out}"
    )
    return 0


# ---------------------------------------------------------------- report


def _named_reports(pairs: list[str], what: str) -> dict[str, evaluate.EvalReport]:
    out: dict[str, evaluate.EvalReport] = {}
    for pair in pairs:
        name, sep, path = pair.partition("=")
        if not sep or not name or not path:
            raise UsageError(f"{what} expects NAME=REPORT.json, got {pair!r}")
        if name in out:
            raise UsageError(f"duplicate {what} name {name!r}")
        out[name] = evaluate.EvalReport.from_json(_read_text(Path(path)))
    return out


def _csv_text(rows: list) -> str:
    return "".join(",".join(str(v) for v in row) + "\n" for row in rows)


def cmd_report(args, cfg: Config) -> int:
    out = Path(args.out) if args.out else None
    if args.kind == "compare":
        reports = _named_reports(args.reports, "compare")
        if not reports:
            raise UsageError("compare needs at least one NAME=REPORT.json")
        table = report.comparison_table(reports)
        print(table)
        if out:
            out.parent.mkdir(parents=True, exist_ok=True)
            _atomic_write(out, _csv_text(report.comparison_csv_rows(reports)))
            print(f"wrote {out}")
        return 0
    if args.kind == "sweep":
        if not args.baseline:
            raise UsageError("sweep needs --baseline REPORT.json")
        reports = _named_reports(args.reports, "sweep cell")
        reports["baseline"] = evaluate.EvalReport.from_json(_read_text(Path(args.baseline)))
        specs = dsp.sweep_specs(cfg.dsp.filter_order, cfg.dsp.zero_phase)
        grid = report.sweep_report(reports, specs)
        rows = grid.csv_rows()
        print(_csv_text(rows), end="")
        if out:
            out.parent.mkdir(parents=True, exist_ok=True)
            _atomic_write(out, _csv_text(rows))
            print(f"wrote {out}")
        return 0
    # hist
    transcripts_dir = Path(args.transcripts or Path(cfg.paths.work_dir) / "transcripts")
    rows = []
    series = {}
    for label, directory in [("corpus", transcripts_dir)] + (
        [("other", Path(args.compare))] if args.compare else []
    ):
        units = [u for t in _load_transcripts(directory) for u in t.units if not u.is_empty]
        if args.unit == "duration":
            units = [u for u in units if u.interval is not None]
        hist = report.iu_length_histogram(units, unit=args.unit)
        series[label] = hist
        rows.extend(hist.as_long_rows(label))
    text = "series,x,y\n" + _csv_text(rows)
    print(text, end="")
    if args.compare:
        tvd = report.total_variation_distance(series["corpus"], series["other"])
        print(f"total variation distance: {tvd:.4f}")
    if out:
        out.parent.mkdir(parents=True, exist_ok=True)
        _atomic_write(out, text)
        print(f"wrote {out}")
    return 0


# ---------------------------------------------------------------- infer


def cmd_infer(args, cfg: Config) -> int:
    manifest_path = Path(args.manifest or Path(cfg.paths.work_dir) / "manifest.jsonl")
    if not manifest_path.exists():
        raise IOFailure(f"manifest not found: {manifest_path}")
    out = Path(args.out or Path(cfg.paths.work_dir) / "hypotheses.tsv")
    if "{manifest}" not in args.cmd or "{out}" not in args.cmd:
        raise UsageError("--cmd must contain {manifest} and {out} placeholders")
    out.parent.mkdir(parents=True, exist_ok=True)
    command = [
        part.format(manifest=str(manifest_path), out=str(out))
        for part in shlex.split(args.cmd)
    ]
    proc = subprocess.run(command, capture_output=True, text=True)
    if proc.returncode != 0:
        tail = (proc.stderr or proc.stdout).strip().splitlines()[-5:]
        raise DataError(
            f"inference command exited {proc.returncode}: " + " | ".join(tail)
        )
    if not out.exists():
        raise DataError(f"inference command wrote no hypothesis file at {out}")
    hyps = _read_hypotheses(out)
    for chunk_id, text in hyps.items():
        targets.extract_boundaries(text, cfg.tokens.boundary_marker)
    print(f"inference wrote {len(hyps)} hypotheses -> {out}")
    return 0


# ---------------------------------------------------------------- driver


def build_parser() -> _Parser:
    parser = _Parser(prog="iuseg", description=__doc__.splitlines()[0])
    parser.add_argument("--config", type=Path, default=None, help="JSON or YAML config file")
    parser.add_argument("--workers", type=int, default=None, help="parallel workers")
    parser.add_argument("--seed", type=int, default=None, help="rng seed for fixture generation")
    # the same flags are accepted after the subcommand; SUPPRESS keeps a
    # sub-level absence from clobbering a value given before the subcommand
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", type=Path, default=argparse.SUPPRESS)
    shared.add_argument("--workers", type=int, default=argparse.SUPPRESS)
    shared.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add_parser(name, help):
        return sub.add_parser(name, help=help, parents=[shared])

    p = add_parser("parse", help="parse .cha transcripts into JSON documents")
    p.add_argument("--corpus-dir", type=Path, default=None)
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("--raw", action="store_true", help="keep breath/laughter/artifact tokens")

    p = add_parser("build", help="chunk transcripts into a training manifest")
    p.add_argument("--transcripts", type=Path, default=None)
    p.add_argument("--audio-dir", type=Path, default=None)
    p.add_argument("--out", type=Path, default=None)

    p = add_parser("targets", help="render boundary-marked target text into the manifest")
    p.add_argument("--manifest", type=Path, default=None)
    p.add_argument("--transcripts", type=Path, default=None)
    p.add_argument("--mode", choices=("plain", "masked"), default="plain")

    p = add_parser("features", help="compute log-mel features per chunk")
    p.add_argument("--manifest", type=Path, default=None)
    p.add_argument("--out", type=Path, default=None)

    p = add_parser("filter", help="write the filter-sweep audio trees")
    p.add_argument("--manifest", type=Path, default=None)
    p.add_argument("--out", type=Path, default=None)

    p = add_parser("eval", help="score a hypothesis file against the manifest")
    p.add_argument("--manifest", type=Path, default=None)
    p.add_argument("--hypothesis", type=Path, required=True)
    p.add_argument("--mode", choices=("juncture", "time"), default="juncture")
    p.add_argument("--split", choices=("all", "train", "test"), default="all")
    p.add_argument("--out", type=Path, default=None)

    p = add_parser("report", help="tables, sweep grids, and length histograms")
    p.add_argument("kind", choices=("compare", "sweep", "hist"))
    p.add_argument("reports", nargs="*", help="NAME=REPORT.json pairs (compare, sweep)")
    p.add_argument("--baseline", type=Path, default=None, help="unfiltered report (sweep)")
    p.add_argument("--transcripts", type=Path, default=None, help="transcript dir (hist)")
    p.add_argument("--compare", type=Path, default=None, help="second transcript dir (hist)")
    p.add_argument("--unit", choices=("words", "duration"), default="words")
    p.add_argument("--out", type=Path, default=None)

    p = add_parser("infer", help="run an external transcriber over the manifest")
    p.add_argument("--manifest", type=Path, default=None)
    p.add_argument("--out", type=Path, default=None)
    p.add_argument(
        "--cmd",
        required=True,
        help="command template with {manifest} and {out} placeholders",
    )
    return parser


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    cfg = load_config(args.config)
    if args.workers is not None:
        if args.workers < 1:
            raise UsageError("--workers must be >= 1")
        cfg.workers = args.workers
    if args.seed is not None:
        cfg.seed = args.seed
    if args.command == "parse":
        return cmd_parse(args, cfg)
    if args.command == "build":
        return cmd_build(args, cfg)
    if args.command == "targets":
        return cmd_targets(args, cfg)
    if args.command == "features":
        return cmd_features(args, cfg, cfg.workers)
    if args.command == "filter":
        return cmd_filter(args, cfg, cfg.workers)
    if args.command == "eval":
        return cmd_eval(args, cfg)
    if args.command == "report":
        return cmd_report(args, cfg)
    if args.command == "infer":
        return cmd_infer(args, cfg)
    raise UsageError(f"unknown command {args.command!r}")


def main(argv: list[str] | None = None) -> int:
    try:
        return run(argv)
    except UsageError as exc:
        return _fail("usage", exc, 1)
    except (ParseError, DataError) as exc:
        return _fail("data", exc, 2)
    except IOFailure as exc:
        return _fail("io", exc, 3)
    except OSError as exc:
        return _fail("io", exc, 3)


def _fail(kind: str, exc: Exception, code: int) -> int:
    print(json.dumps({"error": kind, "message": str(exc)}), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
