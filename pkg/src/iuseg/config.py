"""Single config file for the whole pipeline.

Loads JSON or YAML, rejects unknown keys, and applies environment overrides
of the form IUSEG_<SECTION>_<KEY> (e.g. IUSEG_CORPUS_MAX_GAP_MS=500).
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import UsageError

ENV_PREFIX = "IUSEG_"


@dataclass
class PathsConfig:
    corpus_dir: Path = Path("corpus")
    audio_dir: Path = Path("audio")
    work_dir: Path = Path("work")


@dataclass
class CorpusConfig:
    max_gap_ms: int = 1000
    max_units: int = 10
    max_span_ms: int = 30000
    test_conversations: int = 5


@dataclass
class DspConfig:
    filter_order: int = 4
    zero_phase: bool = False
    mel_scale: str = "slaney"
    mel_area_normalize: bool = True


@dataclass
class EvalConfig:
    window_ms: int = 20
    include_terminal: bool = False
    score_unaligned: bool = True


@dataclass
class TokensConfig:
    boundary_marker: str = "!!!!!"
    common_token: str = "word"


@dataclass
class Config:
    paths: PathsConfig = field(default_factory=PathsConfig)
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    dsp: DspConfig = field(default_factory=DspConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    tokens: TokensConfig = field(default_factory=TokensConfig)
    workers: int = 1
    seed: int = 0  # only consulted when generating fuzz fixtures


def _coerce(value, target_type, where: str):
    if target_type is Path:
        return Path(value)
    if target_type is bool:
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "1", "yes"):
            return True
        if isinstance(value, str) and value.lower() in ("false", "0", "no"):
            return False
        raise UsageError(f"{where}: cannot read {value!r} as a boolean")
    if target_type is int:
        if isinstance(value, bool):
            raise UsageError(f"{where}: expected an integer, got {value!r}")
        try:
            return int(value)
        except (TypeError, ValueError):
            raise UsageError(f"{where}: expected an integer, got {value!r}") from None
    if target_type is float:
        try:
            return float(value)
        except (TypeError, ValueError):
            raise UsageError(f"{where}: expected a number, got {value!r}") from None
    return str(value)


def _target_type(current):
    return Path if isinstance(current, Path) else type(current)


def _apply_section(section, data: dict, section_name: str):
    fields = {f.name for f in dataclasses.fields(section)}
    for key, value in data.items():
        if key not in fields:
            raise UsageError(f"unknown config key: {section_name}.{key}")
        current = getattr(section, key)
        setattr(section, key, _coerce(value, _target_type(current), f"{section_name}.{key}"))


def load_config(path: Path | None = None, env: dict | None = None) -> Config:
    """Config from defaults <- file <- environment, in that order."""
    cfg = Config()
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise UsageError(f"config file not found: {path}")
        text = path.read_text(encoding="utf-8")
        if path.suffix in (".yaml", ".yml"):
            data = yaml.safe_load(text) or {}
        else:
            data = json.loads(text) if text.strip() else {}
        if not isinstance(data, dict):
            raise UsageError(f"config root must be a mapping: {path}")
        sections = {f.name: getattr(cfg, f.name) for f in dataclasses.fields(cfg)}
        for key, value in data.items():
            if key in ("workers", "seed"):
                setattr(cfg, key, _coerce(value, int, key))
            elif key in sections and dataclasses.is_dataclass(sections[key]):
                if not isinstance(value, dict):
                    raise UsageError(f"config section {key} must be a mapping")
                _apply_section(sections[key], value, key)
            else:
                raise UsageError(f"unknown config key: {key}")

    env = os.environ if env is None else env
    for name, raw in env.items():
        if not name.startswith(ENV_PREFIX):
            continue
        rest = name[len(ENV_PREFIX):].lower()
        if rest in ("workers", "seed"):
            setattr(cfg, rest, _coerce(raw, int, name))
            continue
        section_name, _, key = rest.partition("_")
        section = getattr(cfg, section_name, None)
        if section is None or not dataclasses.is_dataclass(section):
            raise UsageError(f"unknown config section in {name}")
        if not hasattr(section, key):
            raise UsageError(f"unknown config key in {name}")
        setattr(section, key, _coerce(raw, _target_type(getattr(section, key)), name))
    return cfg
