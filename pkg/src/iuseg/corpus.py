"""Validity filtering, chunking, split assignment, and manifest building.

A Run is a maximal sequence of same-speaker units that are connected (gap
<= max_gap_ms) and clash with nothing: units that overlap another speaker's
unit, are tagged overlapping, are empty after cleaning, or carry no
timestamp are excluded and break runs. Runs are packed greedily into chunks
of up to `max_units` units spanning at most `max_span_ms`.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .chat import IntonationUnit, TimeInterval, Transcript
from .errors import DataError

MAX_UNITS = 10
MAX_SPAN_MS = 30_000
MAX_GAP_MS = 1_000
TEST_CONVERSATIONS = 5


@dataclass(frozen=True)
class Run:
    conversation_id: str
    speaker: str
    units: tuple[IntonationUnit, ...]

    @property
    def span(self) -> TimeInterval:
        return TimeInterval(self.units[0].interval.start_ms, self.units[-1].interval.end_ms)


@dataclass
class Chunk:
    conversation_id: str
    chunk_id: str
    units: tuple[IntonationUnit, ...]
    split: str = "train"

    @property
    def span(self) -> TimeInterval:
        return TimeInterval(self.units[0].interval.start_ms, self.units[-1].interval.end_ms)

    @property
    def speaker(self) -> str:
        return self.units[0].speaker


@dataclass
class ManifestRecord:
    chunk_id: str
    conversation_id: str
    speaker: str
    audio_path: str
    start_ms: int
    end_ms: int
    split: str
    unit_ends_ms: list[int] | None = None  # unit end times, for time-mode eval
    target_text: str | None = None
    feature_path: str | None = None

    def to_json(self) -> str:
        # Stable field order; manifests must be byte-identical across runs.
        return json.dumps(
            {
                "chunk_id": self.chunk_id,
                "conversation_id": self.conversation_id,
                "speaker": self.speaker,
                "audio_path": self.audio_path,
                "start_ms": self.start_ms,
                "end_ms": self.end_ms,
                "split": self.split,
                "unit_ends_ms": self.unit_ends_ms,
                "target_text": self.target_text,
                "feature_path": self.feature_path,
            },
            ensure_ascii=False,
        )

    @classmethod
    def from_json(cls, line: str) -> "ManifestRecord":
        d = json.loads(line)
        return cls(**d)


@dataclass
class Manifest:
    records: list[ManifestRecord]
    errors: list[str]

    def save(self, path: Path, write_sidecar: bool = True) -> None:
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        with tmp.open("w", encoding="utf-8") as f:
            for rec in self.records:
                f.write(rec.to_json() + "\n")
        os.replace(tmp, path)
        if not write_sidecar:
            return
        sidecar = path.with_name(path.name + ".errors")
        if self.errors:
            sidecar.write_text("".join(e + "\n" for e in self.errors), encoding="utf-8")
        elif sidecar.exists():
            sidecar.unlink()

    @classmethod
    def load(cls, path: Path) -> "Manifest":
        records = []
        with Path(path).open("r", encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if line:
                    records.append(ManifestRecord.from_json(line))
        ids = [r.chunk_id for r in records]
        if len(ids) != len(set(ids)):
            raise DataError(f"duplicate chunk_ids in manifest {path}")
        return cls(records=records, errors=[])


def _overlapping_unit_indices(units: Sequence[IntonationUnit]) -> set[int]:
    """Indices of units whose interval intersects a different speaker's unit."""
    timed = [(i, u) for i, u in enumerate(units) if u.interval is not None]
    timed.sort(key=lambda iu: iu[1].interval.start_ms)
    flagged: set[int] = set()
    # Sweep over start-sorted units; active holds units whose end is still open.
    active: list[tuple[int, IntonationUnit]] = []
    for i, u in timed:
        active = [(j, v) for j, v in active if v.interval.end_ms > u.interval.start_ms]
        for j, v in active:
            if v.speaker != u.speaker and v.interval.overlaps(u.interval):
                flagged.add(i)
                flagged.add(j)
        active.append((i, u))
    return flagged


def find_valid_runs(t: Transcript, max_gap_ms: int = MAX_GAP_MS) -> list[Run]:
    """Split a cleaned transcript into maximal valid same-speaker runs."""
    overlap_idx = _overlapping_unit_indices(t.units)

    runs: list[Run] = []
    current: list[IntonationUnit] = []

    def close():
        nonlocal current
        if current:
            runs.append(Run(t.conversation_id, current[0].speaker, tuple(current)))
            current = []

    for i, u in enumerate(t.units):
        excluded = (
            u.interval is None or u.overlapping or u.is_empty or i in overlap_idx
        )
        if excluded:
            close()
            continue
        if current:
            prev = current[-1]
            gap = u.interval.start_ms - prev.interval.end_ms
            if u.speaker != prev.speaker or gap < 0 or gap > max_gap_ms:
                close()
        current.append(u)
    close()
    return runs


def chunk_run(
    run: Run,
    max_units: int = MAX_UNITS,
    max_span_ms: int = MAX_SPAN_MS,
    warnings: list[str] | None = None,
) -> list[Chunk]:
    """Greedy left-to-right packing of a run into chunks.

    Chunk ids are assigned later by `number_chunks`; here they are positional
    placeholders. A single unit longer than max_span_ms is dropped with a
    warning record.
    """
    chunks: list[Chunk] = []
    current: list[IntonationUnit] = []
    for u in run.units:
        if u.interval.duration_ms > max_span_ms:
            if current:
                chunks.append(Chunk(run.conversation_id, "", tuple(current)))
                current = []
            if warnings is not None:
                warnings.append(
                    f"{run.conversation_id}: unit at {u.interval.start_ms}ms "
                    f"({u.interval.duration_ms}ms) exceeds {max_span_ms}ms, dropped"
                )
            continue
        if current:
            span_ms = u.interval.end_ms - current[0].interval.start_ms
            if len(current) >= max_units or span_ms > max_span_ms:
                chunks.append(Chunk(run.conversation_id, "", tuple(current)))
                current = []
        current.append(u)
    if current:
        chunks.append(Chunk(run.conversation_id, "", tuple(current)))
    return chunks


def number_chunks(chunks: Iterable[Chunk]) -> list[Chunk]:
    """Assign deterministic per-conversation chunk ids (conv_c0001, ...)."""
    counters: dict[str, int] = {}
    out = []
    for c in chunks:
        n = counters.get(c.conversation_id, 0) + 1
        counters[c.conversation_id] = n
        c.chunk_id = f"{c.conversation_id}_c{n:04d}"
        out.append(c)
    return out


def assign_splits(
    conversation_ids: Sequence[str],
    test_count: int = TEST_CONVERSATIONS,
    warnings: list[str] | None = None,
) -> dict[str, str]:
    """First `test_count` conversations (corpus order) -> test, rest -> train."""
    split = {}
    for i, conv in enumerate(conversation_ids):
        split[conv] = "test" if i < test_count else "train"
    if 0 < test_count and len(conversation_ids) <= test_count and warnings is not None:
        warnings.append(
            f"degenerate split: {len(conversation_ids)} conversation(s), "
            f"test_count={test_count}; every chunk lands in the test split"
        )
    return split


def build_chunks(
    transcripts: Sequence[Transcript],
    max_gap_ms: int = MAX_GAP_MS,
    max_units: int = MAX_UNITS,
    max_span_ms: int = MAX_SPAN_MS,
    test_count: int = TEST_CONVERSATIONS,
    warnings: list[str] | None = None,
) -> list[Chunk]:
    """Runs + chunking + split assignment over a whole corpus, in corpus order."""
    ordered = sorted(transcripts, key=lambda t: t.conversation_id)
    split_map = assign_splits([t.conversation_id for t in ordered], test_count, warnings)
    chunks: list[Chunk] = []
    for t in ordered:
        for run in find_valid_runs(t, max_gap_ms):
            chunks.extend(chunk_run(run, max_units, max_span_ms, warnings))
    chunks = number_chunks(chunks)
    for c in chunks:
        c.split = split_map[c.conversation_id]
    return chunks


def build_manifest(
    chunks: Sequence[Chunk],
    audio_dir: Path,
    audio_duration_ms: Callable[[Path], int],
    audio_suffix: str = ".wav",
) -> Manifest:
    """One record per chunk, spans validated against audio durations.

    Missing audio or an out-of-range span produces an error entry and the
    record is omitted; the build continues.
    """
    audio_dir = Path(audio_dir)
    records: list[ManifestRecord] = []
    errors: list[str] = []
    durations: dict[str, int | None] = {}
    for c in chunks:
        conv = c.conversation_id
        if conv not in durations:
            path = audio_dir / (conv + audio_suffix)
            if not path.exists():
                durations[conv] = None
                errors.append(f"{conv}: audio file not found: {path}")
            else:
                durations[conv] = audio_duration_ms(path)
        dur = durations[conv]
        if dur is None:
            errors.append(f"{c.chunk_id}: skipped, no audio for {conv}")
            continue
        span = c.span
        if span.end_ms > dur:
            errors.append(
                f"{c.chunk_id}: span ends at {span.end_ms}ms but audio is {dur}ms"
            )
            continue
        records.append(
            ManifestRecord(
                chunk_id=c.chunk_id,
                conversation_id=conv,
                speaker=c.speaker,
                audio_path=str(audio_dir / (conv + audio_suffix)),
                start_ms=span.start_ms,
                end_ms=span.end_ms,
                split=c.split,
                unit_ends_ms=[u.interval.end_ms for u in c.units],
            )
        )
    return Manifest(records=records, errors=errors)
