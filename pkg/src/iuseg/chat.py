"""CHAT (.cha) transcript parsing into typed intonation units.

Supports the dialect subset found in prosodically annotated conversation
corpora: speaker
tiers (`*ABC:`), millisecond time bullets (0x15-framed `start_end`, with a
visible `·start_end·` fallback), `@` headers and `%` dependent
tiers. Tokens are classified into speech vs. non-speech kinds so breaths,
laughter, and stray artifacts can be dropped while filled pauses survive.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable

from .errors import ParseError

# Time bullets: the real CHAT delimiter is 0x15; a visible middle dot is
# accepted so fixtures and hand-written files stay printable.
_BULLET_RE = re.compile("[\x15·]([^\x15·]*)[\x15·]")
_BULLET_BODY_RE = re.compile(r"^(\d+)_(\d+)$")
_SPEAKER_RE = re.compile(r"^\*([^:]+):\s*(.*)$")

# Tokens made only of these characters are transcription punctuation, not
# speech material, and are dropped before classification.
_PUNCT_CHARS = set(".,;:?!+-^\"'()[]<>{}=~_…")

_OVERLAP_MARKS = ("[>]", "[<]", "[>", "[<")


class TokenKind(Enum):
    WORD = "word"
    FILLED_PAUSE = "filled_pause"
    BREATH = "breath"
    LAUGHTER = "laughter"
    MASKED = "masked"
    ARTIFACT = "artifact"


@dataclass(frozen=True)
class TimeInterval:
    """Half-open [start_ms, end_ms) interval at millisecond resolution."""

    start_ms: int
    end_ms: int

    def __post_init__(self):
        if self.start_ms < 0:
            raise ValueError(f"start_ms must be >= 0, got {self.start_ms}")
        if self.end_ms < self.start_ms:
            raise ValueError(f"end_ms {self.end_ms} < start_ms {self.start_ms}")

    @property
    def duration_ms(self) -> int:
        return self.end_ms - self.start_ms

    def overlaps(self, other: "TimeInterval") -> bool:
        return self.start_ms < other.end_ms and other.start_ms < self.end_ms


@dataclass(frozen=True)
class IUToken:
    kind: TokenKind
    text: str

    def __post_init__(self):
        if not self.text:
            raise ValueError("token text must be non-empty")


@dataclass(frozen=True)
class IntonationUnit:
    speaker: str
    interval: TimeInterval | None
    tokens: tuple[IUToken, ...]
    overlapping: bool = False

    @property
    def is_empty(self) -> bool:
        return not self.tokens

    @property
    def words(self) -> list[str]:
        return [t.text for t in self.tokens]


@dataclass(frozen=True)
class Transcript:
    conversation_id: str
    speakers: frozenset[str]
    units: tuple[IntonationUnit, ...]


class TokenTable:
    """Classification inventory for non-word markers, overridable per corpus."""

    def __init__(
        self,
        breath: Iterable[str] = ("(H)", "(HX)", "(SNIFF)"),
        laughter: Iterable[str] = ("&=laughs", "&=laugh"),
        laughter_suffixes: Iterable[str] = ("@l",),
        fillers: Iterable[str] = ("um", "uh", "uhm", "mm", "hm", "huh"),
        masked: Iterable[str] = ("xxx", "xx"),
    ):
        self.breath = {t.upper() for t in breath}
        self.laughter = {t.lower() for t in laughter}
        self.laughter_suffixes = tuple(s.lower() for s in laughter_suffixes)
        self.fillers = {t.lower() for t in fillers}
        self.masked = {t.lower() for t in masked}


DEFAULT_TOKEN_TABLE = TokenTable()


def classify_token(raw: str, table: TokenTable = DEFAULT_TOKEN_TABLE) -> IUToken:
    """Map one surface token to an IUToken. Total: unknown markers -> artifact."""
    if raw.upper() in table.breath:
        return IUToken(TokenKind.BREATH, raw)
    low = raw.lower()
    if low in table.laughter or any(low.endswith(s) for s in table.laughter_suffixes):
        return IUToken(TokenKind.LAUGHTER, raw)
    if low in table.fillers or (low.startswith("&-") and len(low) > 2):
        return IUToken(TokenKind.FILLED_PAUSE, raw)
    if low in table.masked:
        return IUToken(TokenKind.MASKED, raw)
    # Marker-like leftovers: event codes (&=coughs), parenthesized codes we
    # don't know, or symbol runs like @@@.
    if raw.startswith("&=") or (raw.startswith("(") and raw.endswith(")")):
        return IUToken(TokenKind.ARTIFACT, raw)
    if not any(c.isalnum() for c in raw):
        return IUToken(TokenKind.ARTIFACT, raw)
    return IUToken(TokenKind.WORD, raw)


def _is_punct_only(tok: str) -> bool:
    return bool(tok) and all(c in _PUNCT_CHARS for c in tok)


def _parse_bullet(body: str, line_no: int) -> TimeInterval:
    m = _BULLET_BODY_RE.match(body)
    if not m:
        raise ParseError(f"malformed time bullet {body!r}", line_no)
    start, end = int(m.group(1)), int(m.group(2))
    if end < start:
        raise ParseError(f"time bullet end {end} < start {start}", line_no)
    return TimeInterval(start, end)


def _tokenize_tier(body: str, table: TokenTable) -> tuple[tuple[IUToken, ...], bool]:
    overlapping = any(mark in body for mark in _OVERLAP_MARKS)
    if "<" in body and ">" in body:
        overlapping = True
    tokens: list[IUToken] = []
    for raw in body.split():
        if raw in _OVERLAP_MARKS:
            continue
        stripped = raw.strip("<>")
        if not stripped or _is_punct_only(stripped):
            continue
        tokens.append(classify_token(stripped, table))
    return tuple(tokens), overlapping


def parse_cha(
    raw_text: str,
    conversation_id: str,
    table: TokenTable = DEFAULT_TOKEN_TABLE,
) -> Transcript:
    """Parse CHAT text into a Transcript of time-ordered intonation units.

    One unit per speaker-tier line; `@` headers and `%` dependent tiers are
    ignored; tab-indented continuation lines are folded into the tier above.
    Lines without a bullet yield a unit with interval=None (excluded
    downstream). Units are sorted by (start_ms, source order); bulletless
    units keep their source position in the sort via a sentinel start.
    """
    # Fold continuation lines (leading whitespace) into their tier line.
    logical: list[tuple[int, str]] = []
    for line_no, line in enumerate(raw_text.splitlines(), start=1):
        if not line.strip():
            continue
        if line[0] in " \t" and logical:
            prev_no, prev = logical[-1]
            logical[-1] = (prev_no, prev + " " + line.strip())
            continue
        logical.append((line_no, line.rstrip()))

    units: list[tuple[int, int, IntonationUnit]] = []  # (start key, order, unit)
    speakers: set[str] = set()
    for order, (line_no, line) in enumerate(logical):
        if line.startswith("@") or line.startswith("%"):
            continue
        m = _SPEAKER_RE.match(line)
        if not m:
            raise ParseError(f"unrecognized line {line!r}", line_no)
        speaker = m.group(1).strip()
        body = m.group(2)

        interval: TimeInterval | None = None
        bm = _BULLET_RE.search(body)
        if bm:
            interval = _parse_bullet(bm.group(1), line_no)
            body = _BULLET_RE.sub(" ", body)

        tokens, overlapping = _tokenize_tier(body, table)
        speakers.add(speaker)
        unit = IntonationUnit(speaker, interval, tokens, overlapping)
        start_key = interval.start_ms if interval is not None else -1
        units.append((start_key, order, unit))

    # Bulletless units (key -1) would jump to the front under a plain sort;
    # give them the previous unit's start so source order is preserved.
    patched: list[tuple[int, int, IntonationUnit]] = []
    last_start = 0
    for start_key, order, unit in units:
        if start_key < 0:
            start_key = last_start
        else:
            last_start = start_key
        patched.append((start_key, order, unit))
    patched.sort(key=lambda item: (item[0], item[1]))

    return Transcript(
        conversation_id=conversation_id,
        speakers=frozenset(speakers),
        units=tuple(u for _, _, u in patched),
    )


_REMOVED_KINDS = {TokenKind.BREATH, TokenKind.LAUGHTER, TokenKind.ARTIFACT}


def clean_unit(unit: IntonationUnit) -> IntonationUnit:
    """Drop breath/laughter/artifact tokens; keep the rest in order."""
    kept = tuple(t for t in unit.tokens if t.kind not in _REMOVED_KINDS)
    return replace(unit, tokens=kept)


def clean_transcript(t: Transcript) -> Transcript:
    return replace(t, units=tuple(clean_unit(u) for u in t.units))


def serialize_transcript(t: Transcript) -> str:
    """Canonical JSON document; deserialize_transcript inverts it exactly."""
    doc = {
        "conversation_id": t.conversation_id,
        "speakers": sorted(t.speakers),
        "units": [
            {
                "speaker": u.speaker,
                "start_ms": u.interval.start_ms if u.interval else None,
                "end_ms": u.interval.end_ms if u.interval else None,
                "overlapping": u.overlapping,
                "tokens": [{"kind": tok.kind.value, "text": tok.text} for tok in u.tokens],
            }
            for u in t.units
        ],
    }
    return json.dumps(doc, ensure_ascii=False, indent=2) + "\n"


def deserialize_transcript(text: str) -> Transcript:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid transcript document: {e}") from None
    units = []
    for u in doc["units"]:
        interval = None
        if u["start_ms"] is not None:
            interval = TimeInterval(u["start_ms"], u["end_ms"])
        tokens = tuple(IUToken(TokenKind(tok["kind"]), tok["text"]) for tok in u["tokens"])
        units.append(IntonationUnit(u["speaker"], interval, tokens, u["overlapping"]))
    return Transcript(
        conversation_id=doc["conversation_id"],
        speakers=frozenset(doc["speakers"]),
        units=tuple(units),
    )
