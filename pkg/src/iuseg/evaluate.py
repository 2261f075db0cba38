"""Segmentation scoring at word junctures.

The reference partition comes from target texts; hypotheses may disagree
lexically, so hypothesis boundaries are projected onto reference junctures
through a minimal-edit-distance word alignment (the stand-in for forced
alignment). A juncture is the slot after reference word i (1-based,
i < n_words); the chunk-final juncture is excluded by default since every
chunk ends a unit by construction. An alternative time-window mode matches
boundary timestamps within +/- window_ms.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .targets import BOUNDARY_MARKER, extract_boundaries

TIME_WINDOW_MS = 20


def normalize_word(word: str) -> str:
    """Lowercase and keep only letters, digits, and apostrophes."""
    return "".join(c for c in word.lower() if c.isalnum() or c == "'")


def _renumber_junctures(
    words: Sequence[str], junctures: Iterable[int]
) -> tuple[list[str], set[int], bool]:
    """Re-index junctures after dropping words that normalize to nothing.

    Returns (normalized kept words, remapped junctures, extra-terminal flag);
    the flag is raised when a juncture lands after the last surviving word.
    """
    kept: list[str] = []
    kept_after = [0] * (len(words) + 1)
    for idx, w in enumerate(words, start=1):
        n = normalize_word(w)
        if n:
            kept.append(n)
        kept_after[idx] = len(kept)
    remapped: set[int] = set()
    terminal = False
    for j in junctures:
        nj = kept_after[j]
        if nj == 0:
            continue
        if nj == len(kept):
            terminal = True
        else:
            remapped.add(nj)
    return kept, remapped, terminal


@dataclass(frozen=True)
class AlignOp:
    kind: str  # match | substitute | delete | insert
    ref_index: int | None
    hyp_index: int | None


@dataclass(frozen=True)
class WordAlignment:
    ops: tuple[AlignOp, ...]
    n_ref: int
    n_hyp: int

    @property
    def distance(self) -> int:
        return sum(1 for op in self.ops if op.kind != "match")


def align_words(ref: Sequence[str], hyp: Sequence[str]) -> WordAlignment:
    """Minimal-edit-distance alignment, ties broken match > substitute >
    delete > insert at the earliest position."""
    m, n = len(ref), len(hyp)
    # dist[i][j] = edit distance between ref[i:] and hyp[j:], so the path can
    # be walked forward and tie-breaks apply at the earliest index.
    dist = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(m + 1):
        dist[i][n] = m - i
    for j in range(n + 1):
        dist[m][j] = n - j
    for i in range(m - 1, -1, -1):
        row, below = dist[i], dist[i + 1]
        for j in range(n - 1, -1, -1):
            sub = below[j + 1] + (0 if ref[i] == hyp[j] else 1)
            row[j] = min(sub, below[j] + 1, row[j + 1] + 1)

    ops: list[AlignOp] = []
    i = j = 0
    while i < m or j < n:
        if i < m and j < n and ref[i] == hyp[j] and dist[i][j] == dist[i + 1][j + 1]:
            ops.append(AlignOp("match", i, j))
            i, j = i + 1, j + 1
        elif i < m and j < n and dist[i][j] == dist[i + 1][j + 1] + 1:
            ops.append(AlignOp("substitute", i, j))
            i, j = i + 1, j + 1
        elif i < m and dist[i][j] == dist[i + 1][j] + 1:
            ops.append(AlignOp("delete", i, None))
            i += 1
        else:
            ops.append(AlignOp("insert", None, j))
            j += 1
    return WordAlignment(tuple(ops), m, n)


def project_boundaries(
    alignment: WordAlignment, hyp_junctures: Iterable[int]
) -> tuple[frozenset[int], bool]:
    """Map hypothesis junctures onto reference junctures.

    A boundary after hypothesis word j lands after the last reference word
    consumed by the path up to and including hypothesis word j. Boundaries
    that collapse onto the same reference juncture merge; boundaries mapping
    past the last reference word (trailing insertions) raise the terminal
    flag instead of scoring.
    """
    # ref_consumed_after[j] = reference words consumed once hyp word j-1 is.
    ref_consumed_after = [0] * (alignment.n_hyp + 1)
    ref_count = 0
    for op in alignment.ops:
        if op.ref_index is not None:
            ref_count += 1
        if op.hyp_index is not None:
            ref_consumed_after[op.hyp_index + 1] = ref_count
    projected: set[int] = set()
    terminal = False
    for j in hyp_junctures:
        if not 1 <= j <= alignment.n_hyp:
            continue
        r = ref_consumed_after[j]
        if r >= alignment.n_ref:
            terminal = True
        elif r >= 1:
            projected.add(r)
    return frozenset(projected), terminal


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.tn + other.tn
        )


def score_chunk(
    ref_boundaries: Iterable[int],
    hyp_boundaries: Iterable[int],
    n_ref_words: int,
    include_terminal: bool = False,
    ref_terminal: bool = False,
    hyp_terminal: bool = False,
    skip_junctures: Iterable[int] = (),
) -> ConfusionCounts:
    """Classify every scored juncture of one chunk.

    Junctures 1..n-1; with include_terminal the final juncture n is scored
    too, fed by the terminal flags. skip_junctures removes junctures from
    scoring entirely (used when deletions should not be counted).
    """
    if n_ref_words < 1 or (n_ref_words < 2 and not include_terminal):
        return ConfusionCounts()
    ref = set(ref_boundaries)
    hyp = set(hyp_boundaries)
    last = n_ref_words - 1
    if include_terminal:
        last = n_ref_words
        if ref_terminal:
            ref.add(n_ref_words)
        if hyp_terminal:
            hyp.add(n_ref_words)
    skip = set(skip_junctures)
    tp = fp = fn = tn = 0
    for j in range(1, last + 1):
        if j in skip:
            continue
        in_ref = j in ref
        in_hyp = j in hyp
        if in_ref and in_hyp:
            tp += 1
        elif in_hyp:
            fp += 1
        elif in_ref:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp, fp, fn, tn)


def time_match(
    ref_times_ms: Sequence[int],
    hyp_times_ms: Sequence[int],
    window_ms: int = TIME_WINDOW_MS,
) -> ConfusionCounts:
    """Greedy one-to-one matching of boundary timestamps within +/- window_ms.

    Each hypothesis time takes the earliest unmatched reference time in
    range. True negatives are undefined in this mode (tn stays 0 and
    accuracy is omitted from reports).
    """
    matched = [False] * len(ref_times_ms)
    tp = fp = 0
    for h in hyp_times_ms:
        hit = None
        for k, r in enumerate(ref_times_ms):
            if not matched[k] and abs(h - r) <= window_ms:
                hit = k
                break
        if hit is None:
            fp += 1
        else:
            matched[hit] = True
            tp += 1
    fn = matched.count(False)
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=0)


@dataclass
class ChunkScore:
    chunk_id: str
    counts: ConfusionCounts
    ref_words: int = 0
    align_distance: int = 0


@dataclass
class EvalReport:
    counts: ConfusionCounts
    precision: float
    recall: float
    f1: float
    accuracy: float | None
    mode: str  # juncture | time
    per_chunk: list[ChunkScore] = field(default_factory=list)

    def to_json(self) -> str:
        doc = {
            "mode": self.mode,
            "counts": {
                "tp": self.counts.tp,
                "fp": self.counts.fp,
                "fn": self.counts.fn,
                "tn": self.counts.tn,
            },
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "accuracy": self.accuracy,
            "per_chunk": [
                {
                    "chunk_id": c.chunk_id,
                    "tp": c.counts.tp,
                    "fp": c.counts.fp,
                    "fn": c.counts.fn,
                    "tn": c.counts.tn,
                    "ref_words": c.ref_words,
                    "align_distance": c.align_distance,
                }
                for c in self.per_chunk
            ],
        }
        return json.dumps(doc, ensure_ascii=False, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        doc = json.loads(text)
        per_chunk = [
            ChunkScore(
                chunk_id=c["chunk_id"],
                counts=ConfusionCounts(c["tp"], c["fp"], c["fn"], c["tn"]),
                ref_words=c.get("ref_words", 0),
                align_distance=c.get("align_distance", 0),
            )
            for c in doc.get("per_chunk", [])
        ]
        return cls(
            counts=ConfusionCounts(**doc["counts"]),
            precision=doc["precision"],
            recall=doc["recall"],
            f1=doc["f1"],
            accuracy=doc["accuracy"],
            mode=doc["mode"],
            per_chunk=per_chunk,
        )

    def csv_rows(self) -> list[list[str]]:
        header = ["chunk_id", "tp", "fp", "fn", "tn", "precision", "recall", "f1"]
        rows = [header]
        for c in self.per_chunk:
            p, r, f1, _ = _metrics(c.counts)
            rows.append(
                [c.chunk_id]
                + [str(v) for v in (c.counts.tp, c.counts.fp, c.counts.fn, c.counts.tn)]
                + [f"{p:.4f}", f"{r:.4f}", f"{f1:.4f}"]
            )
        return rows


def _metrics(c: ConfusionCounts) -> tuple[float, float, float, float]:
    precision = c.tp / (c.tp + c.fp) if (c.tp + c.fp) else 0.0
    recall = c.tp / (c.tp + c.fn) if (c.tp + c.fn) else 0.0
    f1 = 2 * precision * recall / (precision + recall) if (precision + recall) else 0.0
    accuracy = (c.tp + c.tn) / c.total if c.total else 0.0
    return precision, recall, f1, accuracy


def aggregate(per_chunk: Sequence[ChunkScore], mode: str = "juncture") -> EvalReport:
    """Micro-average: sum counts across chunks, then recompute metrics."""
    total = ConfusionCounts()
    for c in per_chunk:
        total = total + c.counts
    precision, recall, f1, accuracy = _metrics(total)
    return EvalReport(
        counts=total,
        precision=precision,
        recall=recall,
        f1=f1,
        accuracy=None if mode == "time" else accuracy,
        mode=mode,
        per_chunk=list(per_chunk),
    )


def score_hypothesis(
    chunk_id: str,
    target_text: str,
    hypothesis_text: str,
    marker: str = BOUNDARY_MARKER,
    include_terminal: bool = False,
    score_unaligned: bool = True,
) -> ChunkScore:
    """Juncture-mode scoring of one chunk's hypothesis against its target.

    Both sides are parsed for boundaries and normalized (dropping marker
    remnants and pure punctuation), the hypothesis is aligned to the
    reference, and its junctures projected. With score_unaligned=False,
    junctures whose preceding reference word has no hypothesis counterpart
    (a deletion) are left out of the counts.
    """
    ref_parse = extract_boundaries(target_text, marker)
    hyp_parse = extract_boundaries(hypothesis_text, marker)

    ref_words, ref_junctures, ref_term_extra = _renumber_junctures(
        ref_parse.words, ref_parse.junctures
    )
    hyp_words, hyp_junctures, hyp_term_extra = _renumber_junctures(
        hyp_parse.words, hyp_parse.junctures
    )

    alignment = align_words(ref_words, hyp_words)
    projected, proj_terminal = project_boundaries(alignment, hyp_junctures)

    skip: set[int] = set()
    if not score_unaligned:
        deleted = {op.ref_index for op in alignment.ops if op.kind == "delete"}
        skip = {i + 1 for i in deleted}  # juncture right after a deleted word

    counts = score_chunk(
        ref_junctures,
        projected,
        n_ref_words=len(ref_words),
        include_terminal=include_terminal,
        ref_terminal=ref_parse.terminal or ref_term_extra,
        hyp_terminal=hyp_parse.terminal or hyp_term_extra or proj_terminal,
        skip_junctures=skip,
    )
    return ChunkScore(
        chunk_id=chunk_id,
        counts=counts,
        ref_words=len(ref_words),
        align_distance=alignment.distance,
    )
