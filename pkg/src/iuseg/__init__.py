"""Corpus preparation, scoring, and signal tooling for intonation-unit
boundary segmentation experiments."""

from .chat import (
    IntonationUnit,
    IUToken,
    TimeInterval,
    TokenKind,
    Transcript,
    classify_token,
    clean_transcript,
    deserialize_transcript,
    parse_cha,
    serialize_transcript,
)
from .config import Config, load_config
from .corpus import (
    Chunk,
    Manifest,
    ManifestRecord,
    Run,
    build_chunks,
    build_manifest,
    chunk_run,
    find_valid_runs,
)
from .errors import DataError, IOFailure, IusegError, ParseError, UsageError
from .evaluate import (
    ChunkScore,
    ConfusionCounts,
    EvalReport,
    aggregate,
    align_words,
    project_boundaries,
    score_chunk,
    score_hypothesis,
    time_match,
)
from .targets import (
    BOUNDARY_MARKER,
    BoundaryParse,
    extract_boundaries,
    mask_syntax,
    render_target,
)

__version__ = "0.1.0"
