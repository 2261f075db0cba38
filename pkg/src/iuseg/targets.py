"""Training-target rendering with the repurposed boundary token.

Targets are the chunk's words joined by spaces with the boundary marker
("!!!!!") inserted after every intonation unit, including the last one. The
syntax-masked variant replaces every non-marker word with one common token
so only unit structure survives. `extract_boundaries` is the inverse,
tolerant of arbitrary model output.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

from .corpus import Chunk
from .errors import DataError

BOUNDARY_MARKER = "!!!!!"
DEFAULT_COMMON_TOKEN = "word"


@dataclass(frozen=True)
class BoundaryParse:
    """Words plus the junctures (1-based, after word i) that carry a boundary.

    A marker after the final word sets `terminal` instead of adding a
    juncture; chunk-final boundaries are true by construction and are scored
    separately.
    """

    words: tuple[str, ...]
    junctures: frozenset[int]
    terminal: bool


def render_target(chunk: Chunk, marker: str = BOUNDARY_MARKER) -> str:
    if not chunk.units:
        raise DataError(f"chunk {chunk.chunk_id or '<unnamed>'} has no units")
    parts: list[str] = []
    for unit in chunk.units:
        words = unit.words
        if not words:
            raise DataError(
                f"chunk {chunk.chunk_id or '<unnamed>'} contains an empty unit"
            )
        parts.extend(words)
        parts.append(marker)
    return " ".join(parts)


def mask_syntax(
    target_text: str,
    common_token: str = DEFAULT_COMMON_TOKEN,
    marker: str = BOUNDARY_MARKER,
) -> str:
    if common_token == marker:
        raise DataError("common token must differ from the boundary marker")
    return " ".join(tok if tok == marker else common_token for tok in target_text.split())


def extract_boundaries(hypothesis: str, marker: str = BOUNDARY_MARKER) -> BoundaryParse:
    """Split model output into words and boundary junctures.

    Leading markers and marker runs collapse; a trailing marker becomes the
    terminal flag rather than a juncture.
    """
    words: list[str] = []
    junctures: set[int] = set()
    last_was_marker = False
    for tok in hypothesis.split():
        if tok == marker:
            if words:
                junctures.add(len(words))
            last_was_marker = True
        else:
            words.append(tok)
            last_was_marker = False
    terminal = last_was_marker and bool(words)
    if terminal:
        junctures.discard(len(words))
    return BoundaryParse(tuple(words), frozenset(junctures), terminal)


def scan_rare_tokens(
    table: Mapping[str, int],
    max_count: int,
    pattern: Callable[[str], bool] | None = None,
    reserved: Iterable[str] = (),
) -> list[str]:
    """Candidate boundary tokens: count <= max_count, not reserved, ranked
    ascending by count then lexicographically."""
    reserved_set = set(reserved)
    candidates = [
        (count, tok)
        for tok, count in table.items()
        if count <= max_count
        and tok not in reserved_set
        and (pattern is None or pattern(tok))
    ]
    candidates.sort()
    return [tok for _, tok in candidates]


def token_frequencies(texts: Iterable[str]) -> Counter:
    """Whitespace-token counts over a corpus of target/transcript texts."""
    counts: Counter = Counter()
    for text in texts:
        counts.update(text.split())
    return counts
